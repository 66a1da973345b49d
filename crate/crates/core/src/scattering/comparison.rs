use serde::{Deserialize, Serialize};

use crate::linalg::Point;
use crate::potential::PotentialSpec;
use crate::propagator::{boundary_tail, free_flow, step_count, Stepper, DEFAULT_TAIL_THRESHOLD};
use crate::spectral::{lp_norm, mass, mixed_norm, ComplexField, Snapshot};
use crate::{par, Complex64, Error, Result};

/// Exponents of the `L^p_t L^r_x` norm used for flow differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormPair {
    pub p: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowComparison {
    pub shifts: Vec<Point>,
    pub norm: NormPair,
    pub times: Vec<f64>,
    /// `‖exp(itΔ)τψ - exp(-it(-Δ+V))τψ‖_{L^p L^r}` per shift.
    pub differences: Vec<f64>,
}

impl FlowComparison {
    pub fn strictly_decreasing(&self) -> bool {
        self.differences.windows(2).all(|w| w[1] < w[0])
    }
}

fn shifted(field: &ComplexField, shift: &Point) -> Result<ComplexField> {
    let s = ComplexField::node_shift(field.grid(), shift)?;
    let out = field.roll(s);
    let tail = boundary_tail(&out);
    let scale = mass(&out).sqrt().max(f64::MIN_POSITIVE);
    if tail > DEFAULT_TAIL_THRESHOLD * scale.max(1.0) {
        return Err(Error::precondition(format!(
            "shift {shift:?} pushes the data to the box edge (tail {tail:.3e})"
        )));
    }
    Ok(out)
}

/// Evenly spaced sample times `k T / m`, `k = 0..=m`, each a whole number of
/// `dt` steps apart.
fn sample_times(t_final: f64, samples: usize, dt: f64) -> Result<(Vec<f64>, usize)> {
    if samples < 1 {
        return Err(Error::precondition("need at least one sample interval"));
    }
    let stride = step_count(t_final / samples as f64, dt)?;
    Ok(((0..=samples).map(|k| (k * stride) as f64 * dt).collect(), stride))
}

fn difference_norm(a: &ComplexField, b: &ComplexField, r: f64) -> Result<f64> {
    lp_norm(&a.sub(b)?, r)
}

/// Runs the free flow and the flow with `V` from each shifted copy of `psi`
/// and measures their difference in `L^p([0,T]; L^r)`.
pub fn flow_comparison(
    psi: &ComplexField,
    shifts: &[Point],
    spec: &PotentialSpec,
    t_final: f64,
    dt: f64,
    samples: usize,
    norm: NormPair,
) -> Result<FlowComparison> {
    if spec.dim() != psi.grid().dim() {
        return Err(Error::precondition("potential and grid dimensions differ"));
    }
    let (times, stride) = sample_times(t_final, samples, dt)?;
    let stepper = (!spec.is_zero()).then(|| Stepper::new(*psi.grid(), Some(spec), 1.0, 0.0, dt));
    let mut differences = Vec::with_capacity(shifts.len());
    for shift in shifts {
        let start = shifted(psi, shift)?;
        let mut perturbed = start.clone();
        let mut diffs = Vec::with_capacity(times.len());
        for (k, &t) in times.iter().enumerate() {
            let free = free_flow(&start, t);
            match &stepper {
                Some(st) => {
                    if k > 0 {
                        st.advance(&mut perturbed, stride)?;
                    }
                }
                None => perturbed = free_flow(&start, t),
            }
            diffs.push(difference_norm(&free, &perturbed, norm.r)?);
        }
        differences.push(mixed_norm(&times, &diffs, norm.p)?);
    }
    Ok(FlowComparison {
        shifts: shifts.to_vec(),
        norm,
        times,
        differences,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuhamelComparison {
    pub shifts: Vec<Point>,
    pub norm: NormPair,
    pub times: Vec<f64>,
    pub differences: Vec<f64>,
    /// Relative change of the Duhamel integrals when the quadrature stride is
    /// halved, per shift.
    pub quadrature_error: Vec<f64>,
}

impl DuhamelComparison {
    pub fn strictly_decreasing(&self) -> bool {
        self.differences.windows(2).all(|w| w[1] < w[0])
    }
}

/// `I(t_k) ≈ ∫₀^{t_k} P(t_k - s) F(s) ds` by the recursive trapezoid rule
/// `I_{k+1} = P(Δ)(I_k + Δ/2 F_k) + Δ/2 F_{k+1}`.
fn duhamel_series<P>(sources: &[ComplexField], delta: f64, propagate: P) -> Result<Vec<ComplexField>>
where
    P: Fn(&mut ComplexField) -> Result<()>,
{
    let half = Complex64::new(0.5 * delta, 0.0);
    let mut out = Vec::with_capacity(sources.len());
    let mut acc = ComplexField::zeros(*sources[0].grid());
    out.push(acc.clone());
    for k in 1..sources.len() {
        let prev = &sources[k - 1];
        par::for_each_indexed(acc.values_mut(), |i, v| *v += half * prev.values()[i]);
        propagate(&mut acc)?;
        let cur = &sources[k];
        par::for_each_indexed(acc.values_mut(), |i, v| *v += half * cur.values()[i]);
        out.push(acc.clone());
    }
    Ok(out)
}

fn l2(field: &ComplexField) -> f64 {
    mass(field).sqrt()
}

/// Compares the Duhamel integrals of the source `|U|^α U`, built from a run
/// `U` of the equation without potential, under the free flow and under the
/// flow with `V`, for each shift of `U`.
///
/// The run must be sampled at `0, Δ, 2Δ, …` with `Δ` a multiple of `dt` and at
/// least three snapshots. The integrals are recomputed with stride `2Δ`;
/// if they move by more than `quadrature_tol` (relative, at the shared times)
/// the stride is declared too coarse.
pub fn duhamel_comparison(
    run: &[Snapshot],
    alpha: f64,
    shifts: &[Point],
    spec: &PotentialSpec,
    dt: f64,
    norm: NormPair,
    quadrature_tol: f64,
) -> Result<DuhamelComparison> {
    if run.len() < 3 {
        return Err(Error::precondition("Duhamel comparison needs at least 3 snapshots"));
    }
    let grid = *run[0].field.grid();
    if spec.dim() != grid.dim() {
        return Err(Error::precondition("potential and grid dimensions differ"));
    }
    let times: Vec<f64> = run.iter().map(|s| s.time).collect();
    let delta = times[1] - times[0];
    if times[0] != 0.0 || !(delta > 0.0) {
        return Err(Error::precondition("run must start at t = 0 with increasing times"));
    }
    for (k, &t) in times.iter().enumerate() {
        if (t - k as f64 * delta).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::precondition("snapshots must be equally spaced"));
        }
    }
    let stride = step_count(delta, dt)?;

    let free_step = |d: f64| move |f: &mut ComplexField| -> Result<()> {
        *f = free_flow(f, d);
        Ok(())
    };
    let perturbed = |d: f64, steps: usize| {
        let st = (!spec.is_zero()).then(|| Stepper::new(grid, Some(spec), 1.0, 0.0, dt));
        move |f: &mut ComplexField| -> Result<()> {
            match &st {
                Some(st) => st.advance(f, steps),
                None => {
                    *f = free_flow(f, d);
                    Ok(())
                }
            }
        }
    };

    let mut differences = Vec::with_capacity(shifts.len());
    let mut quadrature_error = Vec::with_capacity(shifts.len());
    for shift in shifts {
        shifted(&run[0].field, shift)?;
        let node = ComplexField::node_shift(&grid, shift)?;
        let half_alpha = 0.5 * alpha;
        let sources: Vec<ComplexField> = run
            .iter()
            .map(|s| {
                let mut u = s.field.roll(node);
                par::for_each_indexed(u.values_mut(), |_, v| *v *= v.norm_sqr().powf(half_alpha));
                u
            })
            .collect();
        let fine_free = duhamel_series(&sources, delta, free_step(delta))?;
        let fine_pert = duhamel_series(&sources, delta, perturbed(delta, stride))?;

        let coarse_sources: Vec<ComplexField> = sources.iter().step_by(2).cloned().collect();
        let mut err: f64 = 0.0;
        if coarse_sources.len() >= 2 {
            let coarse_free = duhamel_series(&coarse_sources, 2.0 * delta, free_step(2.0 * delta))?;
            let coarse_pert = duhamel_series(&coarse_sources, 2.0 * delta, perturbed(2.0 * delta, 2 * stride))?;
            let scale = fine_free.iter().chain(&fine_pert).map(l2).fold(0.0, f64::max);
            if scale > 0.0 {
                for (j, (cf, cp)) in coarse_free.iter().zip(&coarse_pert).enumerate() {
                    err = err.max(l2(&fine_free[2 * j].sub(cf)?) / scale);
                    err = err.max(l2(&fine_pert[2 * j].sub(cp)?) / scale);
                }
            }
        }
        if err > quadrature_tol {
            return Err(Error::Quadrature(format!(
                "halving the stride {delta} changes the Duhamel integral by {err:.3e} (tolerance {quadrature_tol:.1e})"
            )));
        }
        quadrature_error.push(err);

        let diffs = fine_free
            .iter()
            .zip(&fine_pert)
            .map(|(a, b)| difference_norm(a, b, norm.r))
            .collect::<Result<Vec<_>>>()?;
        differences.push(mixed_norm(&times, &diffs, norm.p)?);
    }
    Ok(DuhamelComparison {
        shifts: shifts.to_vec(),
        norm,
        times,
        differences,
        quadrature_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::{evolve, EvolveOptions, SimState};
    use crate::spectral::Grid;

    const NORM: NormPair = NormPair { p: 4.0, r: 4.0 };

    fn pair(dim: usize) -> PotentialSpec {
        PotentialSpec::symmetric_pair(dim, 3.0, 1.0, 1.0, 2.0).unwrap()
    }

    fn ladder() -> Vec<Point> {
        [0.0, 2.0, 4.0, 8.0].iter().map(|&s| [0.0, s, 0.0]).collect()
    }

    #[test]
    fn free_potential_gives_zero_difference() {
        let grid = Grid::new(2, 64, 16.0).unwrap();
        let psi = ComplexField::gaussian(grid, 1.0, 1.0, [0.0; 3], [0.0; 3]);
        let cmp = flow_comparison(&psi, &ladder(), &PotentialSpec::zero(2), 1.0, 0.01, 10, NORM).unwrap();
        assert!(cmp.differences.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn differences_fall_along_ladder() {
        let grid = Grid::new(2, 64, 16.0).unwrap();
        let psi = ComplexField::gaussian(grid, 1.0, 1.0, [0.0; 3], [0.0; 3]);
        let cmp = flow_comparison(&psi, &ladder(), &pair(2), 1.0, 0.01, 10, NORM).unwrap();
        assert!(cmp.differences[0] > 0.0);
        assert!(cmp.strictly_decreasing(), "{:?}", cmp.differences);
    }

    #[test]
    fn translation_covariance() {
        let grid = Grid::new(2, 64, 16.0).unwrap();
        let psi = ComplexField::gaussian(grid, 1.0, 1.0, [0.0; 3], [0.0; 3]);
        let spec = pair(2);
        let base = flow_comparison(&psi, &ladder()[..2], &spec, 0.5, 0.01, 5, NORM).unwrap();
        let v = [1.0, -2.0, 0.0];
        let moved_psi = psi.roll(ComplexField::node_shift(&grid, &v).unwrap());
        let moved = flow_comparison(&moved_psi, &ladder()[..2], &spec.translated(&v), 0.5, 0.01, 5, NORM).unwrap();
        for (a, b) in base.differences.iter().zip(&moved.differences) {
            assert!((a - b).abs() <= 1e-10 * a, "{a} {b}");
        }
    }

    #[test]
    fn off_lattice_shift_and_edge_rejected() {
        let grid = Grid::new(1, 64, 8.0).unwrap();
        let psi = ComplexField::gaussian(grid, 1.0, 0.5, [0.0; 3], [0.0; 3]);
        let spec = pair(1);
        assert!(flow_comparison(&psi, &[[0.1, 0.0, 0.0]], &spec, 0.1, 0.01, 1, NORM).is_err());
        assert!(flow_comparison(&psi, &[[7.75, 0.0, 0.0]], &spec, 0.1, 0.01, 1, NORM).is_err());
    }

    fn homogeneous_run(grid: Grid, t: f64, stride: usize) -> Vec<Snapshot> {
        let u0 = ComplexField::gaussian(grid, 0.5, 1.0, [0.0; 3], [0.0; 3]);
        let mut st = SimState::new(u0, 2.0, None, 0.005).unwrap();
        let out = evolve(&mut st, &EvolveOptions::new(t, stride), |_| {}).unwrap();
        assert!(out.abort.is_none(), "{:?}", out.abort);
        out.snapshots
    }

    #[test]
    fn duhamel_zero_cases() {
        let grid = Grid::new(2, 128, 16.0).unwrap();
        let run = homogeneous_run(grid, 0.5, 5);
        let zero = duhamel_comparison(&run, 2.0, &ladder(), &PotentialSpec::zero(2), 0.005, NORM, 1e-2).unwrap();
        assert!(zero.differences.iter().all(|&d| d == 0.0));
        let empty: Vec<Snapshot> = run
            .iter()
            .map(|s| Snapshot { time: s.time, field: ComplexField::zeros(grid) })
            .collect();
        let none = duhamel_comparison(&empty, 2.0, &ladder(), &pair(2), 0.005, NORM, 1e-2).unwrap();
        assert!(none.differences.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn duhamel_differences_fall_along_ladder() {
        let grid = Grid::new(2, 128, 16.0).unwrap();
        let run = homogeneous_run(grid, 0.8, 5);
        let cmp = duhamel_comparison(&run, 2.0, &ladder(), &pair(2), 0.005, NORM, 1e-2).unwrap();
        assert!(cmp.strictly_decreasing(), "{:?}", cmp.differences);
        assert!(cmp.quadrature_error.iter().all(|&e| e < 1e-2));
    }

    #[test]
    fn coarse_stride_fails_quadrature_check() {
        let grid = Grid::new(2, 128, 16.0).unwrap();
        let run = homogeneous_run(grid, 0.8, 40);
        let r = duhamel_comparison(&run, 2.0, &ladder()[..1], &pair(2), 0.005, NORM, 1e-2);
        assert!(matches!(r, Err(Error::Quadrature(_))), "{r:?}");
    }
}
