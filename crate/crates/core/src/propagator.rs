//! Strang split-step Fourier integration of
//!
//! ```text
//! i ∂t u = -Δu + V u + λ |u|^α u
//! ```
//!
//! with `λ = 1` (defocusing) or `λ = 0` (linear). The kinetic sub-flow is the
//! exact multiplier `exp(-i|k|²τ)`; the potential + nonlinear sub-flow is the
//! exact pointwise phase `exp(-iτ(V + λ|u|^α))` since `|u|` is invariant under
//! it. Adjacent half kinetic steps between observations are merged, so a
//! step costs one forward and one inverse FFT.

use serde::{Deserialize, Serialize};

use crate::potential::PotentialSpec;
use crate::spectral::{fft_forward, fft_inverse, gradient_l2_sq, mass, ComplexField, Grid, Snapshot};
use crate::{linalg, par, Complex64, Error, Result};

/// Runs abort once `‖u‖_{L²(|x| ≥ 0.9L)}` exceeds this.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-6;
/// Fraction of the half-width beyond which mass counts as boundary tail.
pub const TAIL_RADIUS_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub field: ComplexField,
    pub time: f64,
    pub alpha: f64,
    /// Coefficient of `|u|^α u`: 1 for the defocusing equation, 0 to switch
    /// the nonlinearity off.
    pub coupling: f64,
    pub potential: Option<PotentialSpec>,
    pub dt: f64,
}

impl SimState {
    pub fn new(field: ComplexField, alpha: f64, potential: Option<PotentialSpec>, dt: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::precondition(format!("alpha = {alpha} must be positive")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::precondition(format!("dt = {dt} must be positive")));
        }
        if let Some(spec) = &potential {
            if spec.dim() != field.grid().dim() {
                return Err(Error::precondition("potential and grid dimensions differ"));
            }
        }
        if !field.is_finite() {
            return Err(Error::NonFinite("initial data"));
        }
        Ok(SimState {
            field,
            time: 0.0,
            alpha,
            coupling: 1.0,
            potential,
            dt,
        })
    }

    /// Same state with the nonlinearity switched off.
    pub fn linear(mut self) -> Self {
        self.coupling = 0.0;
        self
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn stepper(&self) -> Stepper {
        Stepper::new(
            *self.grid(),
            self.potential.as_ref(),
            self.alpha,
            self.coupling,
            self.dt,
        )
    }
}

/// Precomputed multipliers and potential samples for a fixed `dt`.
pub struct Stepper {
    grid: Grid,
    dt: f64,
    alpha: f64,
    coupling: f64,
    potential: Option<Vec<f64>>,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
}

fn kinetic_multiplier(grid: &Grid, tau: f64) -> Vec<Complex64> {
    par::map_range(grid.len(), |i| Complex64::from_polar(1.0, -grid.k_squared(i) * tau))
}

impl Stepper {
    /// `dt` may be negative (backward stepping).
    pub fn new(grid: Grid, potential: Option<&PotentialSpec>, alpha: f64, coupling: f64, dt: f64) -> Self {
        let potential = potential.filter(|s| !s.is_zero()).map(|s| s.sample(&grid));
        Stepper {
            grid,
            dt,
            alpha,
            coupling,
            potential,
            half: kinetic_multiplier(&grid, 0.5 * dt),
            full: kinetic_multiplier(&grid, dt),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn kinetic(&self, data: &mut [Complex64], mult: &[Complex64]) {
        fft_forward(&self.grid, data).expect("stepper grid");
        par::for_each_indexed(data, |i, v| *v *= mult[i]);
        fft_inverse(&self.grid, data).expect("stepper grid");
    }

    fn phase(&self, data: &mut [Complex64]) {
        let dt = self.dt;
        let half_alpha = 0.5 * self.alpha;
        let g = self.coupling;
        let pot = self.potential.as_deref();
        par::for_each_indexed(data, |i, v| {
            let mut theta = 0.0;
            if let Some(p) = pot {
                theta += p[i];
            }
            if g != 0.0 {
                theta += g * v.norm_sqr().powf(half_alpha);
            }
            if theta != 0.0 {
                *v *= Complex64::from_polar(1.0, -dt * theta);
            }
        });
    }

    /// Applies `steps` Strang steps in place, merging interior half-steps.
    pub fn advance(&self, field: &mut ComplexField, steps: usize) -> Result<()> {
        if field.grid() != &self.grid {
            return Err(Error::precondition("field grid differs from the stepper grid"));
        }
        if steps == 0 {
            return Ok(());
        }
        let data = field.values_mut();
        self.kinetic(data, &self.half);
        for s in 0..steps {
            self.phase(data);
            let last = s + 1 == steps;
            self.kinetic(data, if last { &self.half } else { &self.full });
        }
        if !data.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite("solution"));
        }
        Ok(())
    }
}

/// One Strang step of size `state.dt`.
pub fn step_strang(state: &SimState) -> Result<SimState> {
    let mut next = state.clone();
    state.stepper().advance(&mut next.field, 1)?;
    next.time = state.time + state.dt;
    Ok(next)
}

/// Which energy functional a value refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyVariant {
    /// `½∫|∇u|² + ½∫V|u|² + λ/(α+2) ∫|u|^{α+2}`, the Hamiltonian of the
    /// equation as integrated here.
    Hamiltonian,
    /// `½∫|∇u|² + ∫V|u|² + λ/(α+2) ∫|u|^{α+2}` (no ½ on the potential term).
    FullPotential,
}

impl EnergyVariant {
    pub fn label(self) -> &'static str {
        match self {
            EnergyVariant::Hamiltonian => "hamiltonian",
            EnergyVariant::FullPotential => "full-potential",
        }
    }
}

/// The three integrals the energy variants are assembled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub gradient_sq: f64,
    pub potential: f64,
    pub nonlinear: f64,
}

impl EnergyParts {
    pub fn compute(field: &ComplexField, potential: Option<&PotentialSpec>, alpha: f64, coupling: f64) -> Self {
        let grid = field.grid();
        let v = field.values();
        let vol = grid.cell_volume();
        let pot = match potential {
            Some(spec) if !spec.is_zero() => {
                par::sum_range(v.len(), |i| spec.value(&grid.point(i)) * v[i].norm_sqr()) * vol
            }
            _ => 0.0,
        };
        let half_p = 0.5 * (alpha + 2.0);
        let nl = if coupling != 0.0 {
            coupling * par::sum_range(v.len(), |i| v[i].norm_sqr().powf(half_p)) * vol
        } else {
            0.0
        };
        EnergyParts {
            gradient_sq: gradient_l2_sq(field),
            potential: pot,
            nonlinear: nl,
        }
    }

    pub fn energy(&self, variant: EnergyVariant, alpha: f64) -> f64 {
        let nl = self.nonlinear / (alpha + 2.0);
        match variant {
            EnergyVariant::Hamiltonian => 0.5 * self.gradient_sq + 0.5 * self.potential + nl,
            EnergyVariant::FullPotential => 0.5 * self.gradient_sq + self.potential + nl,
        }
    }
}

/// `‖u‖_{L²(|x| ≥ 0.9 L)}`
pub fn boundary_tail(field: &ComplexField) -> f64 {
    let grid = field.grid();
    let r = TAIL_RADIUS_FRACTION * grid.half_width();
    let v = field.values();
    let s = par::sum_range(v.len(), |i| {
        if linalg::norm(&grid.point(i)) >= r {
            v[i].norm_sqr()
        } else {
            0.0
        }
    });
    (s * grid.cell_volume()).sqrt()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConservationLog {
    pub times: Vec<f64>,
    pub masses: Vec<f64>,
    /// Hamiltonian energy (see [`EnergyVariant::Hamiltonian`]).
    pub energies: Vec<f64>,
    /// Energy without the ½ on the potential term.
    pub energies_full_potential: Vec<f64>,
    pub boundary_tail: Vec<f64>,
}

impl ConservationLog {
    pub fn push(&mut self, time: f64, field: &ComplexField, potential: Option<&PotentialSpec>, alpha: f64, coupling: f64) {
        let parts = EnergyParts::compute(field, potential, alpha, coupling);
        self.times.push(time);
        self.masses.push(mass(field));
        self.energies.push(parts.energy(EnergyVariant::Hamiltonian, alpha));
        self.energies_full_potential
            .push(parts.energy(EnergyVariant::FullPotential, alpha));
        self.boundary_tail.push(boundary_tail(field));
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `max |M(t) - M(0)| / M(0)`; zero for zero data.
    pub fn mass_drift(&self) -> f64 {
        relative_drift(&self.masses)
    }

    pub fn energy_series(&self, variant: EnergyVariant) -> &[f64] {
        match variant {
            EnergyVariant::Hamiltonian => &self.energies,
            EnergyVariant::FullPotential => &self.energies_full_potential,
        }
    }

    /// `max |E(t) - E(0)|`
    pub fn energy_drift(&self, variant: EnergyVariant) -> f64 {
        let e = self.energy_series(variant);
        e.iter().map(|v| (v - e[0]).abs()).fold(0.0, f64::max)
    }

    pub fn max_tail(&self) -> f64 {
        self.boundary_tail.iter().copied().fold(0.0, f64::max)
    }
}

fn relative_drift(series: &[f64]) -> f64 {
    match series.first() {
        Some(&m0) if m0 > 0.0 => series.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max) / m0,
        _ => 0.0,
    }
}

/// Fitted drift order of each energy variant over a dt ladder, and the
/// variant that is conserved at second order (if any).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyConsistency {
    pub dts: Vec<f64>,
    pub drift_hamiltonian: Vec<f64>,
    pub drift_full_potential: Vec<f64>,
    pub order_hamiltonian: Option<f64>,
    pub order_full_potential: Option<f64>,
    pub consistent: Option<EnergyVariant>,
}

/// Minimum fitted order for a functional to count as conserved by the
/// second-order scheme.
pub const CONSERVED_ORDER: f64 = 1.8;

pub fn energy_consistency(ladder: &[(f64, ConservationLog)]) -> EnergyConsistency {
    let dts: Vec<f64> = ladder.iter().map(|(dt, _)| *dt).collect();
    let drift = |v| ladder.iter().map(|(_, log)| log.energy_drift(v)).collect::<Vec<f64>>();
    let dh = drift(EnergyVariant::Hamiltonian);
    let df = drift(EnergyVariant::FullPotential);
    let order = |d: &[f64]| {
        if d.iter().all(|v| *v == 0.0) {
            Some(f64::INFINITY)
        } else {
            crate::fit::convergence_order(&dts, d)
        }
    };
    let oh = order(&dh);
    let of = order(&df);
    let consistent = if oh.is_some_and(|o| o >= CONSERVED_ORDER) {
        Some(EnergyVariant::Hamiltonian)
    } else if of.is_some_and(|o| o >= CONSERVED_ORDER) {
        Some(EnergyVariant::FullPotential)
    } else {
        None
    };
    EnergyConsistency {
        dts,
        drift_hamiltonian: dh,
        drift_full_potential: df,
        order_hamiltonian: oh,
        order_full_potential: of,
        consistent,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    pub t_final: f64,
    /// Observe every `stride` steps (and always at the final step).
    pub stride: usize,
    pub tail_threshold: f64,
    pub keep_snapshots: bool,
}

impl EvolveOptions {
    pub fn new(t_final: f64, stride: usize) -> Self {
        EvolveOptions {
            t_final,
            stride,
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
            keep_snapshots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Abort {
    NonFinite { time: f64 },
    TailOverflow { time: f64, tail: f64, threshold: f64 },
}

impl std::fmt::Display for Abort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Abort::NonFinite { time } => write!(f, "non-finite solution at t = {time}"),
            Abort::TailOverflow { time, tail, threshold } => write!(
                f,
                "boundary tail {tail:.3e} exceeds {threshold:.1e} at t = {time}; enlarge the box"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOutcome {
    pub log: ConservationLog,
    pub snapshots: Vec<Snapshot>,
    /// Set when the run stopped early; the log and snapshots cover the part
    /// completed before the abort.
    pub abort: Option<Abort>,
}

/// Number of whole steps of size `dt` covering `span`.
pub fn step_count(span: f64, dt: f64) -> Result<usize> {
    let k = (span / dt).round();
    if !(span > 0.0) || (k * dt - span).abs() > 1e-9 * span.max(1.0) || k < 1.0 {
        return Err(Error::precondition(format!(
            "t_final - t0 = {span} is not a positive multiple of dt = {dt}"
        )));
    }
    Ok(k as usize)
}

/// Integrates to `opts.t_final`, observing at `t0` and every `stride` steps.
/// The observer sees each snapshot before it is stored.
pub fn evolve<O>(state: &mut SimState, opts: &EvolveOptions, mut observer: O) -> Result<EvolveOutcome>
where
    O: FnMut(&Snapshot),
{
    if opts.stride == 0 {
        return Err(Error::precondition("snapshot stride must be at least 1"));
    }
    let steps = step_count(opts.t_final - state.time, state.dt)?;
    let t0 = state.time;
    let stepper = state.stepper();
    let mut log = ConservationLog::default();
    let mut snapshots = Vec::new();

    let mut observe = |state: &SimState, log: &mut ConservationLog| -> Option<Abort> {
        log.push(
            state.time,
            &state.field,
            state.potential.as_ref(),
            state.alpha,
            state.coupling,
        );
        let snap = Snapshot {
            time: state.time,
            field: state.field.clone(),
        };
        observer(&snap);
        if opts.keep_snapshots {
            snapshots.push(snap);
        }
        let tail = *log.boundary_tail.last().expect("just pushed");
        (tail > opts.tail_threshold).then_some(Abort::TailOverflow {
            time: state.time,
            tail,
            threshold: opts.tail_threshold,
        })
    };

    let mut abort = observe(state, &mut log);
    let mut done = 0;
    while abort.is_none() && done < steps {
        let chunk = opts.stride.min(steps - done);
        match stepper.advance(&mut state.field, chunk) {
            Ok(()) => {}
            Err(Error::NonFinite(_)) => {
                abort = Some(Abort::NonFinite {
                    time: t0 + (done + chunk) as f64 * state.dt,
                });
                break;
            }
            Err(e) => return Err(e),
        }
        done += chunk;
        state.time = t0 + done as f64 * state.dt;
        abort = observe(state, &mut log);
    }
    Ok(EvolveOutcome {
        log,
        snapshots,
        abort,
    })
}

/// Exact free flow `exp(itΔ)`: multiplier `exp(-i|k|²t)`.
pub fn free_flow(field: &ComplexField, t: f64) -> ComplexField {
    if t == 0.0 {
        return field.clone();
    }
    let grid = *field.grid();
    let mut hat = field.to_fourier();
    par::for_each_indexed(&mut hat, |i, v| *v *= Complex64::from_polar(1.0, -grid.k_squared(i) * t));
    ComplexField::from_fourier(grid, hat).expect("same grid")
}

/// Linear flow `exp(-it(-Δ+V))`: exact when `potential` is `None` or zero,
/// otherwise Strang splitting with the largest step `≤ dt` dividing `t`.
pub fn linear_flow(field: &ComplexField, t: f64, potential: Option<&PotentialSpec>, dt: f64) -> Result<ComplexField> {
    if !t.is_finite() {
        return Err(Error::precondition("flow time must be finite"));
    }
    let spec = match potential {
        Some(s) if !s.is_zero() => s,
        _ => return Ok(free_flow(field, t)),
    };
    if t == 0.0 {
        return Ok(field.clone());
    }
    if !(dt > 0.0) {
        return Err(Error::precondition(format!("dt = {dt} must be positive")));
    }
    let steps = (t.abs() / dt - 1e-9).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut out = field.clone();
    Stepper::new(*field.grid(), Some(spec), 1.0, 0.0, h).advance(&mut out, steps)?;
    Ok(out)
}

/// Closed-form free evolution of `exp(-|x|²/2)` under `i∂t u = -Δu`:
/// `(1+2it)^{-d/2} exp(-|x|²/(2(1+2it)))`.
pub fn free_gaussian_exact(grid: &Grid, t: f64) -> ComplexField {
    let d = grid.dim() as f64;
    let z = Complex64::new(1.0, 2.0 * t);
    let pre = z.powf(-0.5 * d);
    ComplexField::from_fn(*grid, move |x| {
        let r2 = linalg::dot(x, x);
        pre * (-r2 / (2.0 * z)).exp()
    })
}
