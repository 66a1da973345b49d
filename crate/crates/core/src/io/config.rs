//! INI-style experiment configuration.
//!
//! ```text
//! [grid]        dim, n, half_width
//! [potential]   type = none | pair | custom, offset, amplitude, width,
//!               centers, amplitudes, widths, beta
//! [initial]     amplitude, width, center, momentum, noise, shifts
//! [integrator]  alpha, dt, t_final, snapshot_stride, nonlinear, tail_threshold
//! [morawetz]    c_ladder, a, nu, rigidity
//! [output]      dir, seed, snapshots
//! ```
//!
//! Parsing is strict: unknown sections or keys, duplicate keys and
//! malformed values are all errors, and every violated invariant is
//! reported at once.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::linalg::{self, Point};
use crate::potential::{GaussianTerm, PotentialSpec};
use crate::spectral::{ComplexField, Grid};
use crate::{Error, Result};

/// Plane waves in the seeded perturbation.
pub const NOISE_MODES: usize = 8;

const SECTIONS: &[(&str, &[&str])] = &[
    ("grid", &["dim", "n", "half_width"]),
    (
        "potential",
        &["type", "offset", "amplitude", "width", "centers", "amplitudes", "widths", "beta"],
    ),
    ("initial", &["amplitude", "width", "center", "momentum", "noise", "shifts"]),
    (
        "integrator",
        &["alpha", "dt", "t_final", "snapshot_stride", "nonlinear", "tail_threshold"],
    ),
    ("morawetz", &["c_ladder", "a", "nu", "rigidity"]),
    ("output", &["dir", "seed", "snapshots"]),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    None,
    Pair,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialConfig {
    pub kind: PotentialKind,
    pub centers: Vec<Point>,
    pub amplitudes: Vec<f64>,
    pub widths: Vec<f64>,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConfig {
    pub amplitude: f64,
    pub width: f64,
    pub center: Point,
    pub momentum: Point,
    /// Amplitude of the seeded random perturbation.
    pub noise: f64,
    /// Shift ladder along the second axis (first axis in d = 1) for
    /// `flow-compare`.
    pub shifts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub alpha: f64,
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_stride: usize,
    pub nonlinear: bool,
    pub tail_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorawetzConfig {
    pub c_ladder: Vec<f64>,
    /// Bulk radius; `None` means `c/4` at each rung.
    pub a: Option<f64>,
    /// `R(c) = c^ν`
    pub nu: f64,
    pub rigidity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub seed: u64,
    /// Write binary snapshots alongside the CSV tables.
    pub snapshots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub potential: PotentialConfig,
    pub initial: InitialConfig,
    pub integrator: IntegratorConfig,
    pub morawetz: MorawetzConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            grid: GridConfig {
                dim: 1,
                n: 256,
                half_width: 16.0,
            },
            potential: PotentialConfig {
                kind: PotentialKind::None,
                centers: Vec::new(),
                amplitudes: Vec::new(),
                widths: Vec::new(),
                beta: 2.0,
            },
            initial: InitialConfig {
                amplitude: 1.0,
                width: 1.0,
                center: linalg::ZERO,
                momentum: linalg::ZERO,
                noise: 0.0,
                shifts: vec![0.0, 2.0, 4.0, 8.0],
            },
            integrator: IntegratorConfig {
                alpha: 2.0,
                dt: 1e-3,
                t_final: 1.0,
                snapshot_stride: 10,
                nonlinear: true,
                tail_threshold: crate::propagator::DEFAULT_TAIL_THRESHOLD,
            },
            morawetz: MorawetzConfig {
                c_ladder: vec![8.0, 16.0, 32.0, 64.0],
                a: None,
                nu: 0.5,
                rigidity: false,
            },
            output: OutputConfig {
                dir: PathBuf::from("out"),
                seed: 0,
                snapshots: false,
            },
        }
    }
}

/// Raw `section -> key -> (value, line)` table.
type Table = BTreeMap<String, BTreeMap<String, (String, usize)>>;

fn tokenize(text: &str) -> std::result::Result<Table, Vec<String>> {
    let mut table = Table::new();
    let mut errors = Vec::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                errors.push(format!("line {line_no}: malformed section header `{line}`"));
                continue;
            };
            let name = name.trim().to_string();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                errors.push(format!("line {line_no}: unknown section [{name}]"));
            }
            table.entry(name.clone()).or_default();
            section = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {line_no}: expected `key = value`, got `{line}`"));
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let Some(sec) = &section else {
            errors.push(format!("line {line_no}: key `{key}` appears before any section"));
            continue;
        };
        if let Some((_, allowed)) = SECTIONS.iter().find(|(s, _)| s == sec) {
            if !allowed.contains(&key.as_str()) {
                errors.push(format!("line {line_no}: unknown key `{key}` in [{sec}]"));
                continue;
            }
        }
        let entries = table.entry(sec.clone()).or_default();
        if let Some((_, first)) = entries.get(&key) {
            errors.push(format!(
                "line {line_no}: duplicate key `{key}` in [{sec}] (first set on line {first})"
            ));
            continue;
        }
        entries.insert(key, (value, line_no));
    }
    if errors.is_empty() {
        Ok(table)
    } else {
        Err(errors)
    }
}

struct Reader<'a> {
    table: &'a Table,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn raw(&self, section: &str, key: &str) -> Option<&(String, usize)> {
        self.table.get(section).and_then(|s| s.get(key))
    }

    fn get<T: std::str::FromStr>(&mut self, section: &str, key: &str, default: T) -> T {
        match self.raw(section, key) {
            None => default,
            Some((v, line)) => match v.parse() {
                Ok(x) => x,
                Err(_) => {
                    self.errors.push(format!("line {line}: cannot parse `{v}` for {section}.{key}"));
                    default
                }
            },
        }
    }

    fn list(&mut self, section: &str, key: &str, default: Vec<f64>) -> Vec<f64> {
        match self.raw(section, key) {
            None => default,
            Some((v, line)) => {
                let parsed: std::result::Result<Vec<f64>, _> = v
                    .split([',', ' '])
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect();
                match parsed {
                    Ok(x) => x,
                    Err(_) => {
                        self.errors.push(format!("line {line}: cannot parse list `{v}` for {section}.{key}"));
                        default
                    }
                }
            }
        }
    }

    fn point(&mut self, section: &str, key: &str, default: Point) -> Point {
        let line = self.raw(section, key).map(|r| r.1);
        let v = self.list(section, key, default.to_vec());
        if v.len() > 3 {
            self.errors.push(format!(
                "line {}: {section}.{key} has {} components, at most 3 allowed",
                line.unwrap_or(0),
                v.len()
            ));
            return default;
        }
        linalg::point_from(&v)
    }

    fn points(&mut self, section: &str, key: &str) -> Vec<Point> {
        let Some((v, line)) = self.raw(section, key).cloned() else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for part in v.split('|') {
            let nums: std::result::Result<Vec<f64>, _> =
                part.split([',', ' ']).filter(|s| !s.is_empty()).map(str::parse).collect();
            match nums {
                Ok(x) if !x.is_empty() && x.len() <= 3 => out.push(linalg::point_from(&x)),
                _ => self.errors.push(format!("line {line}: cannot parse point `{}` in {section}.{key}", part.trim())),
            }
        }
        out
    }
}

impl ExperimentConfig {
    /// Parses and validates; the error lists every problem found.
    pub fn parse(text: &str) -> Result<Self> {
        let table = tokenize(text).map_err(Error::Config)?;
        let d = ExperimentConfig::default();
        let mut r = Reader {
            table: &table,
            errors: Vec::new(),
        };

        let grid = GridConfig {
            dim: r.get("grid", "dim", d.grid.dim),
            n: r.get("grid", "n", d.grid.n),
            half_width: r.get("grid", "half_width", d.grid.half_width),
        };

        let kind = match r.raw("potential", "type").cloned() {
            None => PotentialKind::None,
            Some((v, line)) => match v.as_str() {
                "none" => PotentialKind::None,
                "pair" => PotentialKind::Pair,
                "custom" => PotentialKind::Custom,
                other => {
                    r.errors.push(format!("line {line}: potential.type `{other}` is not none, pair or custom"));
                    PotentialKind::None
                }
            },
        };
        let beta = r.get("potential", "beta", d.potential.beta);
        let potential = match kind {
            PotentialKind::None => PotentialConfig { kind, beta, ..d.potential.clone() },
            PotentialKind::Pair => {
                let offset: f64 = r.get("potential", "offset", 3.0);
                let amplitude: f64 = r.get("potential", "amplitude", 1.0);
                let width: f64 = r.get("potential", "width", 1.0);
                PotentialConfig {
                    kind,
                    centers: vec![[-offset, 0.0, 0.0], [offset, 0.0, 0.0]],
                    amplitudes: vec![amplitude; 2],
                    widths: vec![width; 2],
                    beta,
                }
            }
            PotentialKind::Custom => PotentialConfig {
                kind,
                centers: r.points("potential", "centers"),
                amplitudes: r.list("potential", "amplitudes", Vec::new()),
                widths: r.list("potential", "widths", Vec::new()),
                beta,
            },
        };
        for key in ["offset", "amplitude", "width"] {
            if kind != PotentialKind::Pair {
                if let Some((_, line)) = r.raw("potential", key) {
                    let line = *line;
                    r.errors.push(format!("line {line}: potential.{key} only applies to type = pair"));
                }
            }
        }
        for key in ["centers", "amplitudes", "widths"] {
            if kind != PotentialKind::Custom {
                if let Some((_, line)) = r.raw("potential", key) {
                    let line = *line;
                    r.errors.push(format!("line {line}: potential.{key} only applies to type = custom"));
                }
            }
        }

        let initial = InitialConfig {
            amplitude: r.get("initial", "amplitude", d.initial.amplitude),
            width: r.get("initial", "width", d.initial.width),
            center: r.point("initial", "center", d.initial.center),
            momentum: r.point("initial", "momentum", d.initial.momentum),
            noise: r.get("initial", "noise", d.initial.noise),
            shifts: r.list("initial", "shifts", d.initial.shifts.clone()),
        };
        let integrator = IntegratorConfig {
            alpha: r.get("integrator", "alpha", d.integrator.alpha),
            dt: r.get("integrator", "dt", d.integrator.dt),
            t_final: r.get("integrator", "t_final", d.integrator.t_final),
            snapshot_stride: r.get("integrator", "snapshot_stride", d.integrator.snapshot_stride),
            nonlinear: r.get("integrator", "nonlinear", d.integrator.nonlinear),
            tail_threshold: r.get("integrator", "tail_threshold", d.integrator.tail_threshold),
        };
        let a = if r.raw("morawetz", "a").is_some() {
            Some(r.get("morawetz", "a", 0.0))
        } else {
            None
        };
        let morawetz = MorawetzConfig {
            c_ladder: r.list("morawetz", "c_ladder", d.morawetz.c_ladder.clone()),
            a,
            nu: r.get("morawetz", "nu", d.morawetz.nu),
            rigidity: r.get("morawetz", "rigidity", d.morawetz.rigidity),
        };
        let output = OutputConfig {
            dir: PathBuf::from(r.get::<String>("output", "dir", d.output.dir.to_string_lossy().into_owned())),
            seed: r.get("output", "seed", d.output.seed),
            snapshots: r.get("output", "snapshots", d.output.snapshots),
        };

        let mut errors = r.errors;
        let cfg = ExperimentConfig {
            grid,
            potential,
            initial,
            integrator,
            morawetz,
            output,
        };
        if errors.is_empty() {
            errors.extend(cfg.violations());
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Every invariant the configuration breaks.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let Err(e) = Grid::new(self.grid.dim, self.grid.n, self.grid.half_width) {
            v.push(format!("grid: {e}"));
        }
        let it = &self.integrator;
        if !(it.alpha > 0.0 && it.alpha.is_finite()) {
            v.push(format!("integrator.alpha = {} must be positive", it.alpha));
        }
        if !(it.dt > 0.0 && it.dt.is_finite()) {
            v.push(format!("integrator.dt = {} must be positive", it.dt));
        }
        if !(it.t_final > 0.0 && it.t_final.is_finite()) {
            v.push(format!("integrator.t_final = {} must be positive", it.t_final));
        } else if it.dt > 0.0 && crate::propagator::step_count(it.t_final, it.dt).is_err() {
            v.push(format!("integrator.t_final = {} is not a multiple of dt = {}", it.t_final, it.dt));
        }
        if it.snapshot_stride == 0 {
            v.push("integrator.snapshot_stride must be at least 1".into());
        }
        if !(it.tail_threshold > 0.0) {
            v.push(format!("integrator.tail_threshold = {} must be positive", it.tail_threshold));
        }
        let m = &self.morawetz;
        if m.c_ladder.is_empty() {
            v.push("morawetz.c_ladder must not be empty".into());
        }
        if m.c_ladder.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            v.push("morawetz.c_ladder entries must be positive".into());
        }
        if m.c_ladder.windows(2).any(|w| !(w[1] > w[0])) {
            v.push("morawetz.c_ladder must be strictly increasing".into());
        }
        if let Some(a) = m.a {
            if !(a > 0.0) {
                v.push(format!("morawetz.a = {a} must be positive"));
            }
        }
        if !(m.nu > 0.0) {
            v.push(format!("morawetz.nu = {} must be positive", m.nu));
        }
        if m.rigidity && !(m.nu < 0.75) {
            v.push(format!(
                "morawetz.nu = {} violates nu < 3/4, required when rigidity is enabled",
                m.nu
            ));
        }
        let ini = &self.initial;
        if !(ini.width > 0.0) {
            v.push(format!("initial.width = {} must be positive", ini.width));
        }
        if !(ini.amplitude >= 0.0 && ini.amplitude.is_finite()) {
            v.push(format!("initial.amplitude = {} must be nonnegative", ini.amplitude));
        }
        if !(ini.noise >= 0.0) {
            v.push(format!("initial.noise = {} must be nonnegative", ini.noise));
        }
        let p = &self.potential;
        if p.kind == PotentialKind::Custom {
            if p.centers.is_empty() {
                v.push("potential.centers must list at least one center for type = custom".into());
            }
            if p.amplitudes.len() != p.centers.len() || p.widths.len() != p.centers.len() {
                v.push(format!(
                    "potential: {} centers, {} amplitudes and {} widths do not match",
                    p.centers.len(),
                    p.amplitudes.len(),
                    p.widths.len()
                ));
            }
        }
        if v.is_empty() {
            if let Err(e) = self.potential_spec() {
                v.push(format!("potential: {e}"));
            }
        }
        v
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.dim, self.grid.n, self.grid.half_width)
    }

    /// The configured potential; `type = none` gives the zero potential.
    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        let p = &self.potential;
        if p.kind == PotentialKind::None {
            return Ok(PotentialSpec::zero(self.grid.dim));
        }
        let terms = p
            .centers
            .iter()
            .zip(&p.amplitudes)
            .zip(&p.widths)
            .map(|((c, a), w)| GaussianTerm::new(*c, *a, *w))
            .collect();
        PotentialSpec::new(self.grid.dim, terms, p.beta)
    }

    /// `R(c) = c^ν`
    pub fn near_radius(&self, c: f64) -> f64 {
        c.powf(self.morawetz.nu)
    }

    /// Gaussian initial data plus a seeded perturbation under the same
    /// envelope. The perturbation is a sum of [`NOISE_MODES`] plane waves
    /// with wave numbers up to `1/width` per axis, so it stays as smooth as
    /// the data itself.
    pub fn initial_field(&self, seed: u64) -> Result<ComplexField> {
        use rand::{Rng, SeedableRng};
        let grid = self.grid()?;
        let ini = &self.initial;
        let mut u = ComplexField::gaussian(grid, ini.amplitude, ini.width, ini.center, ini.momentum);
        if ini.noise > 0.0 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let kmax = 1.0 / ini.width;
            let modes: Vec<(crate::Complex64, Point)> = (0..NOISE_MODES)
                .map(|_| {
                    let a = crate::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    let mut k = linalg::ZERO;
                    for v in k.iter_mut().take(grid.dim()) {
                        *v = rng.gen_range(-kmax..kmax);
                    }
                    (a / NOISE_MODES as f64, k)
                })
                .collect();
            let bump = ComplexField::from_fn(grid, |x| {
                let s: crate::Complex64 = modes
                    .iter()
                    .map(|(a, k)| a * crate::Complex64::from_polar(1.0, linalg::dot(k, x)))
                    .sum();
                s * ini.noise
            });
            let envelope = ComplexField::gaussian(grid, 1.0, ini.width, ini.center, linalg::ZERO);
            for ((v, e), b) in u.values_mut().iter_mut().zip(envelope.values()).zip(bump.values()) {
                *v += b * e.re;
            }
        }
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::parse("[grid]\ndim = 1\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert!(ExperimentConfig::parse("").is_ok());
    }

    #[test]
    fn full_config_round_trip() {
        let text = "\
# pair run
[grid]
dim = 3
n = 32
half_width = 8.0
[potential]
type = pair
offset = 2.5
amplitude = 2
width = 0.75
beta = 3
[initial]
center = 0.5, 0, 0
momentum = 1 0 0
noise = 0.01
[integrator]
alpha = 1.5
dt = 0.01
t_final = 0.5
snapshot_stride = 5
[morawetz]
c_ladder = 16, 32, 64, 128
a = 2
nu = 0.5
rigidity = true
[output]
dir = runs/a
seed = 7
snapshots = true
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.grid.dim, 3);
        assert_eq!(cfg.potential.centers, vec![[-2.5, 0.0, 0.0], [2.5, 0.0, 0.0]]);
        assert_eq!(cfg.potential.amplitudes, vec![2.0, 2.0]);
        assert_eq!(cfg.initial.center, [0.5, 0.0, 0.0]);
        assert_eq!(cfg.initial.momentum, [1.0, 0.0, 0.0]);
        assert_eq!(cfg.morawetz.a, Some(2.0));
        assert_eq!(cfg.output.dir, PathBuf::from("runs/a"));
        assert_eq!(cfg.output.seed, 7);
        assert!(cfg.potential_spec().unwrap().terms().len() == 2);
        assert_eq!(cfg.near_radius(64.0), 8.0);
    }

    #[test]
    fn custom_potential() {
        let cfg = ExperimentConfig::parse(
            "[grid]\ndim=2\n[potential]\ntype=custom\ncenters = 0 1 | 0 -1\namplitudes = 1, 2\nwidths = 1 1\n",
        )
        .unwrap();
        let spec = cfg.potential_spec().unwrap();
        assert_eq!(spec.terms()[1].center, [0.0, -1.0, 0.0]);
        assert_eq!(spec.terms()[1].amplitude, 2.0);
        let bad = ExperimentConfig::parse("[potential]\ntype=custom\ncenters = 1 | 2\namplitudes = 1\nwidths = 1 1\n");
        assert!(bad.is_err());
    }

    fn messages(text: &str) -> Vec<String> {
        match ExperimentConfig::parse(text) {
            Err(Error::Config(v)) => v,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn nu_guard_with_rigidity() {
        let m = messages("[morawetz]\nnu = 0.8\nrigidity = true\n");
        assert!(m.iter().any(|s| s.contains("nu < 3/4")), "{m:?}");
        assert!(ExperimentConfig::parse("[morawetz]\nnu = 0.8\n").is_ok());
    }

    #[test]
    fn duplicate_key_names_key_and_line() {
        let m = messages("[grid]\nn = 64\n\nn = 128\n");
        assert_eq!(m.len(), 1);
        assert!(m[0].contains("line 4") && m[0].contains("`n`"), "{m:?}");
    }

    #[test]
    fn unknown_keys_and_sections_are_fatal() {
        let m = messages("[grid]\nsize = 4\n[extra]\nfoo = 1\n");
        assert!(m.iter().any(|s| s.contains("unknown key `size`")));
        assert!(m.iter().any(|s| s.contains("unknown section [extra]")));
        assert!(!messages("n = 4\n").is_empty());
        assert!(!messages("[grid]\nn 4\n").is_empty());
    }

    #[test]
    fn every_violation_is_listed() {
        let m = messages("[grid]\nn = 100\n[integrator]\ndt = -1\nsnapshot_stride = 0\n[morawetz]\nc_ladder = 8, 4\n");
        assert!(m.len() >= 4, "{m:?}");
        assert!(!messages("[integrator]\ndt = 0.3\nt_final = 1\n").is_empty());
        assert!(!messages("[grid]\ndim = abc\n").is_empty());
        assert!(!messages("[potential]\ntype = pair\nbeta = 1.0\n").is_empty());
        assert!(!messages("[potential]\ntype = pair\namplitude = -1\n").is_empty());
        assert!(!messages("[potential]\noffset = 2\n").is_empty());
    }

    #[test]
    fn noise_is_seeded() {
        let cfg = ExperimentConfig::parse("[initial]\nnoise = 0.1\n").unwrap();
        let a = cfg.initial_field(3).unwrap();
        let b = cfg.initial_field(3).unwrap();
        let c = cfg.initial_field(4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
