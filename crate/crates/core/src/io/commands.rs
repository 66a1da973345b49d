//! One function per CLI subcommand. Each writes its tables and a manifest
//! into the output directory and reports a status that maps onto the exit
//! code: 0 ok, 2 failed invariant check, 3 numerical abort.

use std::path::PathBuf;
use std::str::FromStr;

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use super::config::ExperimentConfig;
use super::csv::{fmt_f64, table, timeseries};
use super::manifest::{ArtifactWriter, RunManifest, RunStatus};
use super::snapshot::encode;
use crate::geometry::{
    expansion_check, find_trapped_ray, hamiltonian, hamiltonian_flow, margin_at, margin_scaling, off_axis_escapes,
    ScalingVerdict,
};
use crate::linalg::{self, Point};
use crate::morawetz::{
    derivative_bound_check, rigidity_report, verify_virial, virial_convergence, weight_derivative_consistency,
    MorawetzWeight, VirialContext, VirialRecord,
};
use crate::potential::{check_repulsive, level_surface_sample, CurvatureReport, PotentialSpec, SIGN_TOLERANCE};
use crate::propagator::{evolve, EnergyVariant, EvolveOptions, EvolveOutcome, SimState};
use crate::scattering::{dispersive_decay, duhamel_comparison, flow_comparison, pullback, NormPair};
use crate::spectral::{compute_exponents, compute_exponents_exact, lp_norm, Grid, Snapshot};
use crate::{Error, Result};

/// Relative mass drift tolerated by `simulate`.
pub const MASS_DRIFT_TOLERANCE: f64 = 1e-9;
/// Virial identity errors tolerated by `verify-virial`.
pub const VIRIAL_TOLERANCE: f64 = 1e-3;
pub const MIN_ORDER: f64 = 1.8;
/// Random sample count for the repulsivity check.
pub const REPULSION_SAMPLES: usize = 10_000;
const CURVATURE_SAMPLES: usize = 2000;
const MARGIN_AXIS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    VerifyVirial,
    WeightCheck,
    CheckHypotheses,
    LemmaMargin,
    TrappedRay,
    ScatteringReport,
    FlowCompare,
    Exponents,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Simulate,
        Command::VerifyVirial,
        Command::WeightCheck,
        Command::CheckHypotheses,
        Command::LemmaMargin,
        Command::TrappedRay,
        Command::ScatteringReport,
        Command::FlowCompare,
        Command::Exponents,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::VerifyVirial => "verify-virial",
            Command::WeightCheck => "weight-check",
            Command::CheckHypotheses => "check-hypotheses",
            Command::LemmaMargin => "lemma-margin",
            Command::TrappedRay => "trapped-ray",
            Command::ScatteringReport => "scattering-report",
            Command::FlowCompare => "flow-compare",
            Command::Exponents => "exponents",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::precondition(format!("unknown command `{s}`")))
    }
}

/// Command-line overrides of the config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct CommandOutcome {
    pub status: RunStatus,
    pub manifest: RunManifest,
    /// Human-readable summary, one line per entry.
    pub lines: Vec<String>,
}

impl CommandOutcome {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }
}

/// Shared state while a command runs.
struct Run {
    cfg: ExperimentConfig,
    seed: u64,
    out: ArtifactWriter,
    lines: Vec<String>,
    failures: Vec<String>,
    abort: Option<crate::propagator::Abort>,
}

impl Run {
    fn say(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            let w = what.into();
            self.lines.push(format!("FAILED: {w}"));
            self.failures.push(w);
        }
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        self.out.write(name, table(header, rows).as_bytes())?;
        Ok(())
    }

    fn finish(self, command: Command) -> Result<CommandOutcome> {
        let status = if self.abort.is_some() {
            RunStatus::NumericalAbort
        } else if !self.failures.is_empty() {
            RunStatus::InvariantFailure
        } else {
            RunStatus::Ok
        };
        let manifest = self
            .out
            .finish(command.name(), status, self.seed, &self.cfg, self.abort, self.failures)?;
        Ok(CommandOutcome {
            status,
            manifest,
            lines: self.lines,
        })
    }
}

pub fn run_command(command: Command, config: &ExperimentConfig, opts: &RunOptions) -> Result<CommandOutcome> {
    let mut cfg = config.clone();
    if let Some(dir) = &opts.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(seed) = opts.seed {
        cfg.output.seed = seed;
    }
    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }
    let mut run = Run {
        seed: cfg.output.seed,
        out: ArtifactWriter::new(&cfg.output.dir)?,
        cfg,
        lines: Vec::new(),
        failures: Vec::new(),
        abort: None,
    };
    match command {
        Command::Simulate => simulate(&mut run)?,
        Command::VerifyVirial => verify_virial_cmd(&mut run)?,
        Command::WeightCheck => weight_check(&mut run)?,
        Command::CheckHypotheses => check_hypotheses(&mut run)?,
        Command::LemmaMargin => lemma_margin_cmd(&mut run)?,
        Command::TrappedRay => trapped_ray(&mut run)?,
        Command::ScatteringReport => scattering_report(&mut run)?,
        Command::FlowCompare => flow_compare(&mut run)?,
        Command::Exponents => exponents(&mut run)?,
    }
    run.finish(command)
}

fn potential(cfg: &ExperimentConfig) -> Result<Option<PotentialSpec>> {
    let spec = cfg.potential_spec()?;
    Ok((!spec.is_zero()).then_some(spec))
}

fn nonzero_potential(cfg: &ExperimentConfig) -> Result<PotentialSpec> {
    potential(cfg)?.ok_or_else(|| Error::precondition("this command needs a nonzero potential"))
}

fn sim_state(cfg: &ExperimentConfig, seed: u64, dt: f64, with_potential: bool) -> Result<SimState> {
    let pot = if with_potential { potential(cfg)? } else { None };
    let mut st = SimState::new(cfg.initial_field(seed)?, cfg.integrator.alpha, pot, dt)?;
    if !cfg.integrator.nonlinear {
        st = st.linear();
    }
    Ok(st)
}

/// Runs the configured evolution at step `dt` with snapshot stride
/// `stride`, collecting a virial record for every observed snapshot.
fn traced_run(
    cfg: &ExperimentConfig,
    seed: u64,
    dt: f64,
    stride: usize,
    keep: bool,
) -> Result<(EvolveOutcome, Vec<VirialRecord>)> {
    let mut st = sim_state(cfg, seed, dt, true)?;
    let weight = MorawetzWeight::new(cfg.grid.dim, cfg.morawetz.c_ladder[0])?;
    let ctx = VirialContext::new(st.grid(), weight, st.potential.as_ref(), st.alpha, st.coupling)?;
    let mut opts = EvolveOptions::new(cfg.integrator.t_final, stride);
    opts.tail_threshold = cfg.integrator.tail_threshold;
    opts.keep_snapshots = keep;
    let mut records = Vec::new();
    let mut err = None;
    let outcome = evolve(&mut st, &opts, |snap| match ctx.record(snap) {
        Ok(r) => records.push(r),
        Err(e) => {
            err.get_or_insert(e);
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok((outcome, records))
}

fn note_abort(run: &mut Run, outcome: &EvolveOutcome) {
    if let Some(a) = &outcome.abort {
        run.say(format!("ABORTED: {a}"));
        run.abort = Some(a.clone());
    }
}

fn simulate(run: &mut Run) -> Result<()> {
    let cfg = run.cfg.clone();
    let keep = cfg.output.snapshots || cfg.morawetz.rigidity;
    let (outcome, records) = traced_run(&cfg, run.seed, cfg.integrator.dt, cfg.integrator.snapshot_stride, keep)?;
    run.out
        .write("timeseries.csv", timeseries(&records, &outcome.log.boundary_tail).as_bytes())?;
    if cfg.output.snapshots {
        for (k, snap) in outcome.snapshots.iter().enumerate() {
            run.out.write(&format!("snapshots/snap_{k:05}.nlsf"), &encode(&snap.field))?;
        }
        let rows: Vec<Vec<f64>> = outcome
            .snapshots
            .iter()
            .enumerate()
            .map(|(k, s)| vec![k as f64, s.time])
            .collect();
        run.csv("snapshots/index.csv", &["index", "t"], &rows)?;
    }
    let log = &outcome.log;
    let mass_drift = log.mass_drift();
    run.say(format!(
        "steps to t = {:.6}: {} snapshots, relative mass drift {:.3e}",
        log.times.last().copied().unwrap_or(0.0),
        log.len(),
        mass_drift
    ));
    for v in [EnergyVariant::Hamiltonian, EnergyVariant::FullPotential] {
        run.say(format!("energy drift ({}): {:.3e}", v.label(), log.energy_drift(v)));
    }
    note_abort(run, &outcome);
    if outcome.abort.is_none() {
        run.check(
            mass_drift < MASS_DRIFT_TOLERANCE,
            format!("relative mass drift {mass_drift:.3e} >= {MASS_DRIFT_TOLERANCE:.0e}"),
        );
    }
    if cfg.morawetz.rigidity && !outcome.snapshots.is_empty() {
        rigidity_table(run, &outcome.snapshots)?;
    }
    Ok(())
}

fn rigidity_table(run: &mut Run, snapshots: &[Snapshot]) -> Result<()> {
    let cfg = run.cfg.clone();
    let spec = cfg.potential_spec()?;
    let mut rows = Vec::new();
    for &c in &cfg.morawetz.c_ladder {
        let r = cfg.near_radius(c);
        let a = cfg.morawetz.a.unwrap_or(c / 4.0);
        if !(r < c / 4.0 && a <= c / 4.0) {
            run.check(false, format!("rigidity at c = {c}: need R = c^nu = {r:.4} < c/4 and A = {a} <= c/4"));
            continue;
        }
        let weight = MorawetzWeight::new(cfg.grid.dim, c)?;
        let rep = rigidity_report(snapshots, &weight, &spec, cfg.integrator.alpha, a, r)?;
        for row in &rep.rows {
            rows.push(vec![
                c,
                row.time,
                row.bulk,
                row.epsilon,
                row.far_term,
                row.far_bound.unwrap_or(f64::NAN),
                row.near_bound,
                row.lower,
            ]);
        }
        let worst = rep.rows.iter().map(|r| r.lower).fold(f64::INFINITY, f64::min);
        run.say(format!(
            "rigidity c = {c}: R = {r:.4}, near margin {:.3e}, min lower bound {worst:.6e}",
            rep.near_margin
        ));
    }
    run.csv(
        "rigidity.csv",
        &["c", "t", "bulk", "epsilon", "far_term", "far_bound", "near_bound", "lower"],
        &rows,
    )
}

fn verify_virial_cmd(run: &mut Run) -> Result<()> {
    let cfg = run.cfg.clone();
    let base = cfg.integrator.dt;
    let mut checks = Vec::new();
    for k in 0..3 {
        let dt = base / f64::powi(2.0, k);
        let (outcome, records) = traced_run(&cfg, run.seed, dt, 1, false)?;
        if k == 0 || outcome.abort.is_some() {
            run.out
                .write("timeseries.csv", timeseries(&records, &outcome.log.boundary_tail).as_bytes())?;
        }
        if outcome.abort.is_some() {
            note_abort(run, &outcome);
            return Ok(());
        }
        checks.push(verify_virial(&records)?);
    }
    let conv = virial_convergence(checks);
    let rows: Vec<Vec<f64>> = conv
        .checks
        .iter()
        .map(|c| vec![c.spacing, c.abs_err1, c.abs_err2, c.err1, c.err2])
        .collect();
    run.csv("virial.csv", &["dt", "abs_err1", "abs_err2", "err1", "err2"], &rows)?;
    run.out.write_json("virial.json", &conv)?;
    let first = conv.checks[0].clone();
    run.say(format!(
        "dt = {base}: z' error {:.3e}, z'' error {:.3e} (relative)",
        first.err1, first.err2
    ));
    let o1 = conv.order1.unwrap_or(f64::NAN);
    let o2 = conv.order2.unwrap_or(f64::NAN);
    run.say(format!("convergence order: z' {o1:.3}, z'' {o2:.3}"));
    run.check(first.err1 < VIRIAL_TOLERANCE, format!("z' identity error {:.3e}", first.err1));
    run.check(first.err2 < VIRIAL_TOLERANCE, format!("z'' identity error {:.3e}", first.err2));
    run.check(o1 >= MIN_ORDER, format!("z' convergence order {o1:.3} < {MIN_ORDER}"));
    run.check(o2 >= MIN_ORDER, format!("z'' convergence order {o2:.3} < {MIN_ORDER}"));
    Ok(())
}

/// Box half width used per rung of `weight-check`, a little past the
/// support radius `c/2`.
pub fn weight_check_half_width(c: f64) -> f64 {
    0.65 * c
}

fn weight_check(run: &mut Run) -> Result<()> {
    let cfg = run.cfg.clone();
    let dim = cfg.grid.dim;
    let mut rows = Vec::new();
    for &c in &cfg.morawetz.c_ladder {
        let w = MorawetzWeight::new(dim, c)?;
        let grid = Grid::new(dim, cfg.grid.n, weight_check_half_width(c))?;
        let rep = weight_derivative_consistency(&w, &grid)?;
        rows.push(vec![
            c,
            rep.nodes_across_transition,
            rep.inner.lap,
            rep.inner.hess,
            rep.inner.bilap,
            rep.full.lap,
            rep.full.hess,
            rep.full.bilap,
            rep.inner_bilap_max,
        ]);
        run.say(format!(
            "c = {c}: {:.1} nodes across c/4, error on B(0,c/4) {:.3e}, on |x| <= 0.45c {:.3e}",
            rep.nodes_across_transition,
            rep.inner.max(),
            rep.full.max()
        ));
        run.check(rep.inner.max() < 1e-8, format!("c = {c}: in-ball error {:.3e} >= 1e-8", rep.inner.max()));
        run.check(rep.full.max() < 1e-4, format!("c = {c}: full-region error {:.3e} >= 1e-4", rep.full.max()));
        if dim == 3 {
            run.check(
                rep.inner_bilap_max == 0.0,
                format!("c = {c}: bilaplacian {:.3e} on B(0,c/4) in d = 3", rep.inner_bilap_max),
            );
        }
    }
    run.csv(
        "weight.csv",
        &[
            "c",
            "nodes_across_transition",
            "inner_lap",
            "inner_hess",
            "inner_bilap",
            "full_lap",
            "full_hess",
            "full_bilap",
            "inner_bilap_max",
        ],
        &rows,
    )?;
    if cfg.morawetz.c_ladder.len() >= 3 {
        let bound = derivative_bound_check(dim, &cfg.morawetz.c_ladder, cfg.grid.n)?;
        let rows: Vec<Vec<f64>> = bound
            .rungs
            .iter()
            .map(|r| vec![r.c, r.sup_scaled, r.second_order_scaled, r.bilap_scaled])
            .collect();
        run.csv("bound.csv", &["c", "sup_scaled", "second_order_scaled", "bilap_scaled"], &rows)?;
        run.say(format!(
            "c·sup(|Δχ|+|D²χ|+|Δ²χ|) spread over the ladder: {:.3} (second-order part alone: {:.3})",
            bound.spread,
            spread(bound.rungs.iter().map(|r| r.second_order_scaled))
        ));
    }
    Ok(())
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi / lo
}

fn box_samples(grid_cfg: &super::config::GridConfig, seed: u64, count: usize) -> Vec<Point> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let l = grid_cfg.half_width;
    (0..count)
        .map(|_| {
            let mut p = linalg::ZERO;
            for v in p.iter_mut().take(grid_cfg.dim) {
                *v = rng.gen_range(-l..l);
            }
            p
        })
        .collect()
}

/// Level surfaces `{Vᵢ = Aᵢ/e}`: spheres of radius `wᵢ` about each center.
fn unit_level_surfaces(spec: &PotentialSpec, count: usize) -> Result<Vec<CurvatureReport>> {
    (0..spec.terms().len())
        .map(|i| level_surface_sample(spec, i, spec.terms()[i].amplitude / std::f64::consts::E, count))
        .collect()
}

/// Radius of a ball around the origin holding every center plus one width.
fn enclosing_radius(spec: &PotentialSpec) -> f64 {
    spec.terms()
        .iter()
        .map(|t| linalg::norm(&t.center) + t.width)
        .fold(0.0, f64::max)
}

#[derive(Serialize)]
struct HypothesisSummary {
    g1: Vec<crate::potential::RepulsionReport>,
    g2: Vec<CurvatureSummary>,
    g3: Option<crate::geometry::TrappedRay>,
    g3_escape_times: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct CurvatureSummary {
    term_index: usize,
    radius: f64,
    min_eigenvalue: Option<f64>,
    min_eig_nonrepulsive: Option<f64>,
    max_sphere_deviation: f64,
}

fn check_hypotheses(run: &mut Run) -> Result<()> {
    let cfg = run.cfg.clone();
    let spec = nonzero_potential(&cfg)?;
    let samples = box_samples(&cfg.grid, run.seed, REPULSION_SAMPLES);
    let mut g1 = Vec::new();
    for i in 0..spec.terms().len() {
        let rep = check_repulsive(&spec, i, &samples)?;
        run.say(format!(
            "(G1) term {i}: max (x-a)·∇V over {} samples = {:.3e}",
            rep.samples, rep.max_inner_product
        ));
        run.check(rep.holds, format!("(G1) term {i}: {:.3e} > {SIGN_TOLERANCE:.0e}", rep.max_inner_product));
        g1.push(rep);
    }
    let mut g2 = Vec::new();
    if cfg.grid.dim >= 2 {
        for rep in unit_level_surfaces(&spec, CURVATURE_SAMPLES)? {
            let k = 1.0 / rep.radius;
            let dev = rep
                .samples
                .iter()
                .flat_map(|s| s.eigenvalues.iter())
                .map(|e| (e - k).abs())
                .fold(0.0, f64::max);
            let min = rep.min_eigenvalue();
            run.say(format!(
                "(G2) term {}: level surface radius {:.6}, min curvature {:.12}, max |κ - 1/ρ| {:.3e}",
                rep.term_index,
                rep.radius,
                min.unwrap_or(f64::NAN),
                dev
            ));
            run.check(min.is_some_and(|m| m > 0.0), format!("(G2) term {}: curvature not positive", rep.term_index));
            g2.push(CurvatureSummary {
                term_index: rep.term_index,
                radius: rep.radius,
                min_eigenvalue: min,
                min_eig_nonrepulsive: rep.min_eig_nonrepulsive,
                max_sphere_deviation: dev,
            });
        }
    }
    let (g3, escapes) = if cfg.grid.dim >= 2 && spec.terms().len() == 2 {
        let (ray, escapes) = trapped_ray_checks(run, &spec)?;
        (Some(ray), escapes)
    } else {
        run.say("(G3) not applicable: needs d >= 2 and exactly two terms");
        (None, Vec::new())
    };
    run.out.write_json(
        "hypotheses.json",
        &HypothesisSummary {
            g1,
            g2,
            g3,
            g3_escape_times: escapes,
        },
    )?;
    Ok(())
}

const RAY_DT: f64 = 0.01;
const RAY_T_TRAPPED: f64 = 20.0;
const RAY_T_ESCAPE: f64 = 1000.0;
const RAY_OFFSETS: [f64; 3] = [1e-3, 1e-2, 1e-1];

fn trapped_ray_checks(run: &mut Run, spec: &PotentialSpec) -> Result<(crate::geometry::TrappedRay, Vec<Option<f64>>)> {
    let ray = find_trapped_ray(spec, 1e-12, RAY_T_TRAPPED, RAY_DT)?;
    let r = enclosing_radius(spec);
    let escapes = off_axis_escapes(spec, &ray, &RAY_OFFSETS, 2.0 * r, RAY_T_ESCAPE, RAY_DT)?;
    run.say(format!(
        "(G3) saddle at {:?}, equilibrium drift {:.3e}, transverse deviation of on-axis rays {:.3e}",
        ray.saddle, ray.equilibrium_drift, ray.transverse_deviation
    ));
    for (h, t) in RAY_OFFSETS.iter().zip(&escapes) {
        match t {
            Some(t) => run.say(format!("(G3) off-axis launch {h:e}: leaves B(0, {:.3}) at t = {t:.2}", 2.0 * r)),
            None => run.say(format!("(G3) off-axis launch {h:e}: still inside B(0, {:.3}) at t = {RAY_T_ESCAPE}", 2.0 * r)),
        }
    }
    run.check(ray.equilibrium_drift <= 1e-10, format!("(G3) equilibrium drift {:.3e}", ray.equilibrium_drift));
    run.check(
        ray.transverse_deviation <= 1e-10,
        format!("(G3) on-axis rays leave the axis by {:.3e}", ray.transverse_deviation),
    );
    run.check(escapes.iter().all(Option::is_some), "(G3) an off-axis launch did not escape");
    Ok((ray, escapes))
}

fn lemma_margin_cmd(run: &mut Run) -> Result<()> {
    let cfg = run.cfg.clone();
    let spec = nonzero_potential(&cfg)?;
    if cfg.grid.dim < 2 {
        return Err(Error::precondition("lemma-margin needs d >= 2"));
    }
    let reports = unit_level_surfaces(&spec, CURVATURE_SAMPLES)?;
    let sc = margin_scaling(&spec, &reports, &cfg.morawetz.c_ladder)?;
    let r = reports
        .iter()
        .flat_map(|rep| rep.samples.iter())
        .map(|s| linalg::norm(&s.point))
        .fold(0.0, f64::max);
    let points: Vec<Point> = reports.iter().flat_map(|rep| rep.samples.iter().map(|s| s.point)).collect();
    let exp = expansion_check(&cfg.morawetz.c_ladder, r, &points)?;

    // Facing points on the axis: margin must vanish.
    let mut facing: f64 = 0.0;
    for rep in &reports {
        let a = spec.terms()[rep.term_index].center;
        let s = if a[0] >= 0.0 { -1.0 } else { 1.0 };
        let x = [a[0] + s * rep.radius, 0.0, 0.0];
        for &c in &cfg.morawetz.c_ladder {
            facing = facing.max(margin_at(&x, &[s, 0.0, 0.0], c)?.abs());
        }
    }

    let rows: Vec<Vec<f64>> = (0..sc.c_ladder.len())
        .map(|k| {
            vec![
                sc.c_ladder[k],
                sc.min_margins[k],
                sc.min_margins_nonstar[k].unwrap_or(f64::NAN),
                exp.remainders[k],
                exp.shifted_remainders[k],
            ]
        })
        .collect();
    run.csv(
        "margin.csv",
        &["c", "min_margin", "min_margin_nonstar", "expansion_remainder", "shifted_expansion_remainder"],
        &rows,
    )?;
    for row in &rows {
        run.say(format!(
            "c = {}: min margin {}, non-star-shaped min {}",
            row[0],
            fmt_f64(row[1]),
            fmt_f64(row[2])
        ));
    }
    match sc.verdict {
        ScalingVerdict::NonnegativeAtAllRungs => run.say("margin: nonnegative at all rungs"),
        ScalingVerdict::Slope(s) => run.say(format!("margin: negative part decays with slope {s:.3}")),
    }
    run.say(format!("on-axis facing points: max |margin| {facing:.3e}"));
    run.say(format!(
        "expansion remainder slope {:.3} (expansion in |x̃|²/(2(c+x₁)): {:.3})",
        exp.slope.unwrap_or(f64::NAN),
        exp.shifted_slope.unwrap_or(f64::NAN)
    ));
    run.check(sc.compliant(), format!("margin negative part does not decay fast enough: {:?}", sc.verdict));
    run.check(facing <= MARGIN_AXIS_TOLERANCE, format!("facing-point margin {facing:.3e}"));
    Ok(())
}

fn trapped_ray(run: &mut Run) -> Result<()> {
    let cfg = run.cfg.clone();
    let spec = nonzero_potential(&cfg)?;
    if cfg.grid.dim < 2 {
        return Err(Error::precondition("trapped-ray needs d >= 2"));
    }
    let (ray, escapes) = trapped_ray_checks(run, &spec)?;
    run.out.write_json("trapped_ray.json", &ray)?;
    // Trajectory of the slowest escaping launch.
    let normal = linalg::tangent_basis(&ray.direction, cfg.grid.dim)[0];
    let t_end = escapes[0].unwrap_or(RAY_T_ESCAPE);
    let traj = hamiltonian_flow(
        &spec,
        linalg::axpy(&ray.saddle, RAY_OFFSETS[0], &normal),
        linalg::ZERO,
        (t_end / RAY_DT).ceil() * RAY_DT,
        RAY_DT,
    )?;
    let rows: Vec<Vec<f64>> = traj
        .iter()
        .step_by(10)
        .map(|s| vec![s.t, s.x[0], s.x[1], s.x[2], s.p[0], s.p[1], s.p[2], hamiltonian(&spec, s)])
        .collect();
    run.csv("trajectory.csv", &["t", "x1", "x2", "x3", "p1", "p2", "p3", "h"], &rows)
}

fn scattering_report(run: &mut Run) -> Result<()> {
    let cfg = run.cfg.clone();
    let (outcome, _) = traced_run(&cfg, run.seed, cfg.integrator.dt, cfg.integrator.snapshot_stride, true)?;
    note_abort(run, &outcome);
    let snaps = &outcome.snapshots;
    let Some(last) = snaps.last() else {
        return Ok(());
    };
    // Probe at T, T/2, T/4, ... down to the first stored positive time.
    let first_positive = snaps.iter().map(|s| s.time).find(|&t| t > 0.0).unwrap_or(last.time);
    let mut times = Vec::new();
    let mut t = last.time;
    while t >= first_positive * (1.0 - 1e-12) && t > 0.0 {
        if snaps.iter().any(|s| (s.time - t).abs() <= 1e-9 * t.max(1.0)) {
            times.push(t);
        }
        t *= 0.5;
    }
    times.reverse();
    if times.len() < 2 {
        run.say("scattering: fewer than two probe times stored; nothing to compare");
        return Ok(());
    }
    let probe = pullback(snaps, &times)?;
    let inc = probe.increments();
    let mut rows = Vec::new();
    for (k, &t) in probe.times.iter().enumerate() {
        rows.push(vec![t, if k == 0 { f64::NAN } else { inc[k - 1] }, probe.mass_defect[k]]);
    }
    run.csv("pullback.csv", &["t", "h1_increment", "mass_defect"], &rows)?;
    run.out.write_json("cauchy.json", &probe)?;
    for (k, d) in inc.iter().enumerate() {
        run.say(format!(
            "‖ψ({}) - ψ({})‖_H¹ = {:.6e}",
            probe.times[k + 1],
            probe.times[k],
            d
        ));
    }
    run.say(format!(
        "increments strictly decreasing: {}",
        if probe.increments_strictly_decreasing() { "yes" } else { "no" }
    ));
    let defect = probe.mass_defect.iter().copied().fold(0.0, f64::max);
    run.check(defect <= 1e-10, format!("pull-back changed the L² norm by {defect:.3e}"));

    let sups = snaps
        .iter()
        .map(|s| lp_norm(&s.field, f64::INFINITY))
        .collect::<Result<Vec<_>>>()?;
    let all_times: Vec<f64> = snaps.iter().map(|s| s.time).collect();
    let decay = dispersive_decay(&all_times, &sups, cfg.grid.dim, first_positive)?;
    let rows: Vec<Vec<f64>> = decay.times.iter().zip(&decay.normalized).map(|(t, v)| vec![*t, *v]).collect();
    run.csv("decay.csv", &["t", "normalized_sup"], &rows)?;
    run.say(format!(
        "t^(d/2)‖u‖_∞ over t >= {first_positive}: max/median = {:.4}",
        decay.ratio
    ));
    Ok(())
}

/// `L^p_t L^r_x` exponents for the comparisons: the Strichartz pair for
/// `(d, α)` when it exists, otherwise `p = r = α + 2`.
pub fn comparison_norm(dim: usize, alpha: f64) -> NormPair {
    match compute_exponents(dim, alpha) {
        Ok(e) => NormPair { p: e.p, r: e.r },
        Err(_) => NormPair {
            p: alpha + 2.0,
            r: alpha + 2.0,
        },
    }
}

fn flow_compare(run: &mut Run) -> Result<()> {
    let cfg = run.cfg.clone();
    let spec = cfg.potential_spec()?;
    let psi = cfg.initial_field(run.seed)?;
    let axis = usize::from(cfg.grid.dim >= 2);
    let shifts: Vec<Point> = cfg
        .initial
        .shifts
        .iter()
        .map(|&s| {
            let mut p = linalg::ZERO;
            p[axis] = s;
            p
        })
        .collect();
    let norm = comparison_norm(cfg.grid.dim, cfg.integrator.alpha);
    let it = &cfg.integrator;
    let samples = (crate::propagator::step_count(it.t_final, it.dt)? / it.snapshot_stride).max(1);
    let flow = flow_comparison(&psi, &shifts, &spec, it.t_final, it.dt, samples, norm)?;

    // Duhamel source from the same data evolved without potential.
    let mut st = sim_state(&cfg, run.seed, it.dt, false)?;
    let mut opts = EvolveOptions::new(it.t_final, it.snapshot_stride);
    opts.tail_threshold = it.tail_threshold;
    let homogeneous = evolve(&mut st, &opts, |_| {})?;
    note_abort(run, &homogeneous);
    let duhamel = if homogeneous.abort.is_some() {
        None
    } else {
        match duhamel_comparison(&homogeneous.snapshots, it.alpha, &shifts, &spec, it.dt, norm, 1e-2) {
            Ok(d) => Some(d),
            Err(Error::Quadrature(msg)) => {
                run.check(false, format!("Duhamel quadrature: {msg}"));
                None
            }
            Err(e) => return Err(e),
        }
    };
    let rows: Vec<Vec<f64>> = (0..shifts.len())
        .map(|k| {
            vec![
                cfg.initial.shifts[k],
                flow.differences[k],
                duhamel.as_ref().map_or(f64::NAN, |d| d.differences[k]),
                duhamel.as_ref().map_or(f64::NAN, |d| d.quadrature_error[k]),
            ]
        })
        .collect();
    run.csv(
        "flow_compare.csv",
        &["shift", "flow_difference", "duhamel_difference", "quadrature_error"],
        &rows,
    )?;
    run.say(format!("norm L^{:.4}_t L^{:.4}_x over [0, {}]", norm.p, norm.r, it.t_final));
    for row in &rows {
        run.say(format!(
            "shift {}: flow difference {:.6e}, Duhamel difference {:.6e}",
            row[0], row[1], row[2]
        ));
    }
    if spec.is_zero() {
        run.check(
            flow.differences.iter().all(|&d| d == 0.0),
            "flow differences must vanish without a potential",
        );
    } else {
        run.check(
            flow.strictly_decreasing(),
            format!("flow differences not strictly decreasing: {:?}", flow.differences),
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct ExponentReport {
    values: crate::spectral::ExponentSet,
    exact: Option<ExactStrings>,
}

#[derive(Serialize)]
struct ExactStrings {
    r: String,
    q: String,
    p: String,
    eta: String,
    gamma: String,
    two_star: String,
}

fn exponents(run: &mut Run) -> Result<()> {
    let cfg = run.cfg.clone();
    let (dim, alpha) = (cfg.grid.dim, cfg.integrator.alpha);
    let values = compute_exponents(dim, alpha)?;
    let exact = Rational64::approximate_float(alpha)
        .filter(|a| *a.numer() as f64 / *a.denom() as f64 == alpha)
        .and_then(|a| compute_exponents_exact(dim, a).ok())
        .map(|e| ExactStrings {
            r: e.r.to_string(),
            q: e.q.to_string(),
            p: e.p.to_string(),
            eta: e.eta.to_string(),
            gamma: e.gamma.to_string(),
            two_star: e.two_star.to_string(),
        });
    match &exact {
        Some(e) => {
            run.say(format!("r = {}", e.r));
            run.say(format!("q = {}", e.q));
            run.say(format!("p = {}", e.p));
            run.say(format!("eta = {}", e.eta));
            run.say(format!("gamma = {} ({})", e.gamma, values.gamma_rule));
            run.say(format!("2* = {}", e.two_star));
        }
        None => {
            run.say(format!("r = {}", values.r));
            run.say(format!("q = {}", values.q));
            run.say(format!("p = {}", values.p));
            run.say(format!("eta = {}", values.eta));
            run.say(format!("gamma = {} ({})", values.gamma, values.gamma_rule));
            run.say(format!("2* = {}", values.two_star));
        }
    }
    run.out.write_json("exponents.json", &ExponentReport { values, exact })?;
    Ok(())
}
