//! Gaussian-sum potentials `V = Σ Aᵢ exp(-|x-aᵢ|²/wᵢ²)` with closed-form
//! derivatives, and numerical checks of repulsivity, level-surface convexity
//! and the weighted decay integrals.

use serde::{Deserialize, Serialize};

use crate::linalg::{self, Mat, Point, ZERO, ZERO_MAT};
use crate::spectral::Grid;
use crate::{par, Error, Result};

/// Tolerance separating roundoff from a genuine sign violation.
pub const SIGN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianTerm {
    pub center: Point,
    pub amplitude: f64,
    pub width: f64,
}

impl GaussianTerm {
    pub fn new(center: Point, amplitude: f64, width: f64) -> Self {
        GaussianTerm {
            center,
            amplitude,
            width,
        }
    }

    #[inline]
    pub fn value(&self, x: &Point) -> f64 {
        let d = linalg::sub(x, &self.center);
        self.amplitude * (-linalg::dot(&d, &d) / (self.width * self.width)).exp()
    }

    #[inline]
    pub fn gradient(&self, x: &Point) -> Point {
        let d = linalg::sub(x, &self.center);
        let w2 = self.width * self.width;
        let v = self.amplitude * (-linalg::dot(&d, &d) / w2).exp();
        linalg::scale(&d, -2.0 * v / w2)
    }

    pub fn hessian(&self, x: &Point, dim: usize) -> Mat {
        let d = linalg::sub(x, &self.center);
        let w2 = self.width * self.width;
        let v = self.amplitude * (-linalg::dot(&d, &d) / w2).exp();
        let mut h = ZERO_MAT;
        for i in 0..dim {
            for j in 0..dim {
                h[i][j] = v * (4.0 * d[i] * d[j] / (w2 * w2) - if i == j { 2.0 / w2 } else { 0.0 });
            }
        }
        h
    }
}

/// A finite sum of Gaussian bumps in `dim` dimensions, plus the decay
/// exponent `beta` used by the weighted integrability checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    dim: usize,
    terms: Vec<GaussianTerm>,
    beta: f64,
}

impl PotentialSpec {
    /// Repulsive family: at least one term, positive amplitudes and widths,
    /// `beta > 4/3`.
    pub fn new(dim: usize, terms: Vec<GaussianTerm>, beta: f64) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidPotential("at least one term is required".into()));
        }
        for (i, t) in terms.iter().enumerate() {
            if !(t.amplitude > 0.0 && t.amplitude.is_finite()) {
                return Err(Error::InvalidPotential(format!(
                    "term {i}: amplitude {} must be positive",
                    t.amplitude
                )));
            }
        }
        Self::validated(dim, terms, beta)
    }

    /// Like [`PotentialSpec::new`] but accepts negative (attractive)
    /// amplitudes; used to exercise the hypothesis checkers on
    /// counter-examples.
    pub fn with_signed_terms(dim: usize, terms: Vec<GaussianTerm>, beta: f64) -> Result<Self> {
        if terms.iter().any(|t| t.amplitude == 0.0 || !t.amplitude.is_finite()) {
            return Err(Error::InvalidPotential("amplitudes must be finite and non-zero".into()));
        }
        Self::validated(dim, terms, beta)
    }

    fn validated(dim: usize, terms: Vec<GaussianTerm>, beta: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidPotential(format!("dimension {dim} not in 1..=3")));
        }
        if !(beta > 4.0 / 3.0 && beta.is_finite()) {
            return Err(Error::InvalidPotential(format!("beta = {beta} must exceed 4/3")));
        }
        for (i, t) in terms.iter().enumerate() {
            if !(t.width > 0.0 && t.width.is_finite()) {
                return Err(Error::InvalidPotential(format!(
                    "term {i}: width {} must be positive",
                    t.width
                )));
            }
            if t.center.iter().any(|c| !c.is_finite()) || t.center[dim..].iter().any(|&c| c != 0.0) {
                return Err(Error::InvalidPotential(format!(
                    "term {i}: center must be finite with {dim} components"
                )));
            }
        }
        for i in 0..terms.len() {
            for j in i + 1..terms.len() {
                if terms[i].center == terms[j].center {
                    return Err(Error::InvalidPotential(format!(
                        "terms {i} and {j} share a center"
                    )));
                }
            }
        }
        Ok(PotentialSpec { dim, terms, beta })
    }

    /// The identically zero potential.
    pub fn zero(dim: usize) -> Self {
        PotentialSpec {
            dim,
            terms: Vec::new(),
            beta: 2.0,
        }
    }

    /// Two equal bumps centered at `±offset·e₁`.
    pub fn symmetric_pair(dim: usize, offset: f64, amplitude: f64, width: f64, beta: f64) -> Result<Self> {
        let mut a = ZERO;
        a[0] = offset;
        let b = linalg::scale(&a, -1.0);
        Self::new(
            dim,
            vec![
                GaussianTerm::new(a, amplitude, width),
                GaussianTerm::new(b, amplitude, width),
            ],
            beta,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[GaussianTerm] {
        &self.terms
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, index: usize) -> Result<&GaussianTerm> {
        self.terms.get(index).ok_or_else(|| {
            Error::precondition(format!(
                "term index {index} out of range ({} terms)",
                self.terms.len()
            ))
        })
    }

    /// Same potential moved by `shift`.
    pub fn translated(&self, shift: &Point) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.center = linalg::add(&t.center, shift);
        }
        out
    }

    pub fn value(&self, x: &Point) -> f64 {
        self.terms.iter().map(|t| t.value(x)).sum()
    }

    pub fn gradient(&self, x: &Point) -> Point {
        self.terms
            .iter()
            .fold(ZERO, |acc, t| linalg::add(&acc, &t.gradient(x)))
    }

    pub fn hessian(&self, x: &Point) -> Mat {
        let mut h = ZERO_MAT;
        for t in &self.terms {
            let ht = t.hessian(x, self.dim);
            for i in 0..self.dim {
                for j in 0..self.dim {
                    h[i][j] += ht[i][j];
                }
            }
        }
        h
    }

    pub fn eval_potential(&self, points: &[Point]) -> Vec<f64> {
        par::map_slice(points, |x| self.value(x))
    }

    pub fn eval_gradient(&self, points: &[Point]) -> Vec<Point> {
        par::map_slice(points, |x| self.gradient(x))
    }

    pub fn eval_hessian(&self, points: &[Point]) -> Vec<Mat> {
        par::map_slice(points, |x| self.hessian(x))
    }

    /// `V` at every node of `grid`.
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        par::map_range(grid.len(), |i| self.value(&grid.point(i)))
    }

    pub fn sample_gradient(&self, grid: &Grid) -> Vec<Point> {
        par::map_range(grid.len(), |i| self.gradient(&grid.point(i)))
    }
}

/// Result of the repulsivity check `(x - aᵢ)·∇Vᵢ(x) ≤ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepulsionReport {
    pub term_index: usize,
    pub samples: usize,
    pub max_inner_product: f64,
    pub argmax: Point,
    pub holds: bool,
}

pub fn check_repulsive(spec: &PotentialSpec, term_index: usize, samples: &[Point]) -> Result<RepulsionReport> {
    let term = spec.term(term_index)?;
    if samples.is_empty() {
        return Err(Error::precondition("no sample points"));
    }
    let vals = par::map_slice(samples, |x| {
        linalg::dot(&linalg::sub(x, &term.center), &term.gradient(x))
    });
    let (imax, max) = vals
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    Ok(RepulsionReport {
        term_index,
        samples: samples.len(),
        max_inner_product: max,
        argmax: samples[imax],
        holds: max <= SIGN_TOLERANCE,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSample {
    pub point: Point,
    /// Outward normal `-∇Vᵢ/|∇Vᵢ|`.
    pub normal: Point,
    /// Second fundamental form eigenvalues (ascending, `d-1` of them);
    /// a sphere of radius ρ gives `1/ρ`.
    pub eigenvalues: Vec<f64>,
    /// `x·∇V` for the full potential; positive marks the non-repulsive region.
    pub radial_derivative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub term_index: usize,
    pub level: f64,
    pub radius: f64,
    pub samples: Vec<CurvatureSample>,
    /// Smallest eigenvalue over samples with `x·∇V > 0`; `None` when no sample
    /// lies in that region.
    pub min_eig_nonrepulsive: Option<f64>,
}

impl CurvatureReport {
    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.samples
            .iter()
            .flat_map(|s| s.eigenvalues.iter().copied())
            .min_by(f64::total_cmp)
    }
}

/// Quasi-uniform unit directions in ℝ^dim. The two poles `±e₁` are always
/// included.
pub fn sphere_directions(dim: usize, count: usize) -> Vec<Point> {
    let count = count.max(2);
    match dim {
        1 => vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        2 => {
            let m = count + count % 2;
            (0..m)
                .map(|j| {
                    let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                    [th.cos(), th.sin(), 0.0]
                })
                .collect()
        }
        _ => {
            let mut out = vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]];
            let m = count.saturating_sub(2).max(1);
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            for j in 0..m {
                let x1 = 1.0 - 2.0 * (j as f64 + 0.5) / m as f64;
                let rho = (1.0 - x1 * x1).max(0.0).sqrt();
                let th = golden * j as f64;
                out.push([x1, rho * th.cos(), rho * th.sin()]);
            }
            out
        }
    }
}

/// Samples the level set `{Vᵢ = level}` of one Gaussian term (a sphere of
/// radius `w·sqrt(ln(A/level))`) and evaluates normals and curvatures from
/// the term's gradient and Hessian.
pub fn level_surface_sample(
    spec: &PotentialSpec,
    term_index: usize,
    level: f64,
    count: usize,
) -> Result<CurvatureReport> {
    let term = spec.term(term_index)?;
    let dim = spec.dim();
    if !(level > 0.0 && level < term.amplitude) {
        return Err(Error::precondition(format!(
            "level set {{V = {level}}} is empty or degenerate for amplitude {}",
            term.amplitude
        )));
    }
    let radius = term.width * (term.amplitude / level).ln().sqrt();
    let dirs = sphere_directions(dim, count);
    let samples = par::map_slice(&dirs, |dir| {
        let x = linalg::axpy(&term.center, radius, dir);
        let g = term.gradient(&x);
        let gn = linalg::norm(&g);
        let normal = linalg::scale(&g, -1.0 / gn);
        let hess = term.hessian(&x, dim);
        let basis = linalg::tangent_basis(&normal, dim);
        // II(t, s) = -tᵀ∇²V s / |∇V|
        let form = |a: &Point, b: &Point| {
            let mut acc = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    acc += a[i] * hess[i][j] * b[j];
                }
            }
            -acc / gn
        };
        let eigenvalues = match basis.len() {
            0 => Vec::new(),
            1 => vec![form(&basis[0], &basis[0])],
            _ => {
                let [lo, hi] = linalg::sym2_eigenvalues(
                    form(&basis[0], &basis[0]),
                    form(&basis[0], &basis[1]),
                    form(&basis[1], &basis[1]),
                );
                vec![lo, hi]
            }
        };
        CurvatureSample {
            point: x,
            normal,
            eigenvalues,
            radial_derivative: linalg::dot(&x, &spec.gradient(&x)),
        }
    });
    let min_eig_nonrepulsive = samples
        .iter()
        .filter(|s| s.radial_derivative > 0.0)
        .flat_map(|s| s.eigenvalues.iter().copied())
        .min_by(f64::total_cmp);
    Ok(CurvatureReport {
        term_index,
        level,
        radius,
        samples,
        min_eig_nonrepulsive,
    })
}

/// Quadratures behind the integrability assumptions on `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayNorms {
    /// `∫|V|^{d/2}(1+|x|^β)`
    pub v_weighted: f64,
    /// `∫|∇Vᵢ|^{d/2}` for each term.
    pub grad_each: Vec<f64>,
    /// `∫|∇V|^{d/2}|x|^β`
    pub grad_weighted: f64,
}

/// Largest integrand value allowed on the outermost grid shell.
pub const DECAY_TAIL_TOLERANCE: f64 = 1e-10;

pub fn decay_norms(spec: &PotentialSpec, grid: &Grid) -> Result<DecayNorms> {
    if grid.dim() != spec.dim() {
        return Err(Error::precondition("grid and potential dimensions differ"));
    }
    let half_d = spec.dim() as f64 / 2.0;
    let beta = spec.beta();
    let vol = grid.cell_volume();
    let weighted = |x: &Point| {
        let r = linalg::norm(x);
        let v = spec.value(x).abs().powf(half_d) * (1.0 + r.powf(beta));
        let g = linalg::norm(&spec.gradient(x)).powf(half_d) * r.powf(beta);
        v.max(g)
    };
    let n = grid.n();
    let tail = par::max_range(grid.len(), |i| {
        let m = grid.multi_index(i);
        let on_edge = (0..grid.dim()).any(|a| m[a] == 0 || m[a] == n - 1);
        if on_edge {
            weighted(&grid.point(i))
        } else {
            0.0
        }
    });
    if tail > DECAY_TAIL_TOLERANCE {
        return Err(Error::precondition(format!(
            "decay integrand is {tail:.3e} on the box boundary; enlarge the grid"
        )));
    }
    let v_weighted = par::sum_range(grid.len(), |i| {
        let x = grid.point(i);
        spec.value(&x).abs().powf(half_d) * (1.0 + linalg::norm(&x).powf(beta))
    }) * vol;
    let grad_each = spec
        .terms()
        .iter()
        .map(|t| {
            par::sum_range(grid.len(), |i| linalg::norm(&t.gradient(&grid.point(i))).powf(half_d))
                * vol
        })
        .collect();
    let grad_weighted = par::sum_range(grid.len(), |i| {
        let x = grid.point(i);
        linalg::norm(&spec.gradient(&x)).powf(half_d) * linalg::norm(&x).powf(beta)
    }) * vol;
    Ok(DecayNorms {
        v_weighted,
        grad_each,
        grad_weighted,
    })
}
