//! The virial functional `z(t) = ∫χ|u|²` and its time derivatives
//!
//! ```text
//! z'  = 2 Im ∫ ∇χ·∇u ū
//! z'' = 4 Re ∫ χ_jk ∂_j u ∂_k ū + (2α/(α+2)) ∫ Δχ |u|^{α+2}
//!       - 2 ∫ ∇χ·∇V |u|² - ∫ Δ²χ |u|²
//! ```
//!
//! for solutions of `i∂t u = -Δu + Vu + λ|u|^α u` (the nonlinear term carries
//! the factor `λ`).

use serde::{Deserialize, Serialize};

use super::weight::{MorawetzWeight, WeightDerivs};
use crate::linalg;
use crate::potential::PotentialSpec;
use crate::propagator::{EnergyParts, EnergyVariant};
use crate::spectral::{gradient_l2_sq, mass, ComplexField, Grid, Snapshot};
use crate::{fit, par, Error, Result};

/// Coefficient of `∫Δχ|u|^{α+2}` in `z''`.
pub fn nonlinear_coefficient(alpha: f64) -> f64 {
    2.0 * alpha / (alpha + 2.0)
}

/// Weight and potential samples on a fixed grid, reused for every snapshot.
pub struct VirialContext {
    grid: Grid,
    weight: MorawetzWeight,
    derivs: Vec<WeightDerivs>,
    /// `∇χ·∇V` per node; empty without a potential.
    grad_chi_dot_grad_v: Vec<f64>,
    potential: Option<PotentialSpec>,
    alpha: f64,
    coupling: f64,
    nl_coefficient: f64,
    /// `‖∇χ‖_∞` over the grid.
    grad_chi_sup: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VirialTerms {
    pub hessian: f64,
    pub nonlinear: f64,
    pub potential: f64,
    pub bilaplacian: f64,
}

impl VirialTerms {
    pub fn sum(&self) -> f64 {
        self.hessian + self.nonlinear + self.potential + self.bilaplacian
    }

    pub fn abs_sum(&self) -> f64 {
        self.hessian.abs() + self.nonlinear.abs() + self.potential.abs() + self.bilaplacian.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirialRecord {
    pub time: f64,
    pub z: f64,
    pub z_prime: f64,
    pub z_second: f64,
    pub mass: f64,
    pub energy: f64,
    pub terms: VirialTerms,
    /// `‖u‖_∞`
    pub linf: f64,
    /// `‖u‖_{H¹}`
    pub h1: f64,
    /// `2‖∇χ‖_∞ ‖∇u‖₂ ‖u‖₂`, the Cauchy-Schwarz bound on `|z'|`.
    pub z_prime_bound: f64,
}

impl VirialContext {
    pub fn new(
        grid: &Grid,
        weight: MorawetzWeight,
        potential: Option<&PotentialSpec>,
        alpha: f64,
        coupling: f64,
    ) -> Result<Self> {
        Self::with_nonlinear_coefficient(grid, weight, potential, alpha, coupling, nonlinear_coefficient(alpha))
    }

    /// As [`VirialContext::new`] with an explicit coefficient for
    /// `∫Δχ|u|^{α+2}`; used to test alternative forms of the identity.
    pub fn with_nonlinear_coefficient(
        grid: &Grid,
        weight: MorawetzWeight,
        potential: Option<&PotentialSpec>,
        alpha: f64,
        coupling: f64,
        nl_coefficient: f64,
    ) -> Result<Self> {
        if grid.dim() != weight.dim() {
            return Err(Error::precondition("grid and weight dimensions differ"));
        }
        if let Some(spec) = potential {
            if spec.dim() != grid.dim() {
                return Err(Error::precondition("grid and potential dimensions differ"));
            }
        }
        let derivs = weight.sample(grid);
        let potential = potential.filter(|s| !s.is_zero()).cloned();
        let grad_chi_dot_grad_v = match &potential {
            Some(spec) => par::map_range(grid.len(), |i| {
                linalg::dot(&derivs[i].grad, &spec.gradient(&grid.point(i)))
            }),
            None => Vec::new(),
        };
        let grad_chi_sup = par::max_range(grid.len(), |i| linalg::norm(&derivs[i].grad));
        Ok(VirialContext {
            grid: *grid,
            weight,
            derivs,
            grad_chi_dot_grad_v,
            potential,
            alpha,
            coupling,
            nl_coefficient,
            grad_chi_sup,
        })
    }

    pub fn weight(&self) -> &MorawetzWeight {
        &self.weight
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn derivs(&self) -> &[WeightDerivs] {
        &self.derivs
    }

    pub fn potential(&self) -> Option<&PotentialSpec> {
        self.potential.as_ref()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grad_chi_sup(&self) -> f64 {
        self.grad_chi_sup
    }

    fn check(&self, field: &ComplexField) -> Result<()> {
        if field.grid() != &self.grid {
            return Err(Error::precondition("field grid differs from the virial context grid"));
        }
        Ok(())
    }

    pub fn z(&self, field: &ComplexField) -> Result<f64> {
        self.check(field)?;
        let v = field.values();
        Ok(par::sum_range(v.len(), |i| self.derivs[i].chi * v[i].norm_sqr()) * self.grid.cell_volume())
    }

    fn z_prime_from(&self, field: &ComplexField, grad: &[ComplexField]) -> f64 {
        let v = field.values();
        let d = self.grid.dim();
        par::sum_range(v.len(), |i| {
            let mut acc = 0.0;
            for (a, g) in grad.iter().enumerate().take(d) {
                acc += self.derivs[i].grad[a] * (g.values()[i] * v[i].conj()).im;
            }
            acc
        }) * 2.0
            * self.grid.cell_volume()
    }

    pub fn z_prime(&self, field: &ComplexField) -> Result<f64> {
        self.check(field)?;
        Ok(self.z_prime_from(field, &field.gradient()))
    }

    fn terms_from(&self, field: &ComplexField, grad: &[ComplexField]) -> VirialTerms {
        let v = field.values();
        let d = self.grid.dim();
        let vol = self.grid.cell_volume();
        let hessian = 4.0
            * vol
            * par::sum_range(v.len(), |i| {
                let h = &self.derivs[i].hess;
                let mut acc = 0.0;
                for a in 0..d {
                    let ga = grad[a].values()[i];
                    for b in 0..d {
                        acc += h[a][b] * (ga * grad[b].values()[i].conj()).re;
                    }
                }
                acc
            });
        let half_p = 0.5 * (self.alpha + 2.0);
        let nonlinear = if self.coupling != 0.0 {
            self.coupling
                * self.nl_coefficient
                * vol
                * par::sum_range(v.len(), |i| self.derivs[i].lap * v[i].norm_sqr().powf(half_p))
        } else {
            0.0
        };
        let potential = if self.grad_chi_dot_grad_v.is_empty() {
            0.0
        } else {
            -2.0 * vol * par::sum_range(v.len(), |i| self.grad_chi_dot_grad_v[i] * v[i].norm_sqr())
        };
        let bilaplacian = -vol * par::sum_range(v.len(), |i| self.derivs[i].bilap * v[i].norm_sqr());
        VirialTerms {
            hessian,
            nonlinear,
            potential,
            bilaplacian,
        }
    }

    pub fn z_second_terms(&self, field: &ComplexField) -> Result<VirialTerms> {
        self.check(field)?;
        Ok(self.terms_from(field, &field.gradient()))
    }

    /// Everything that goes into one CSV row.
    pub fn record(&self, snapshot: &Snapshot) -> Result<VirialRecord> {
        let field = &snapshot.field;
        self.check(field)?;
        let grad = field.gradient();
        let terms = self.terms_from(field, &grad);
        let m = mass(field);
        let g2 = gradient_l2_sq(field);
        let energy = EnergyParts::compute(field, self.potential.as_ref(), self.alpha, self.coupling)
            .energy(EnergyVariant::Hamiltonian, self.alpha);
        let v = field.values();
        let linf = par::max_range(v.len(), |i| v[i].norm()).max(0.0);
        Ok(VirialRecord {
            time: snapshot.time,
            z: self.z(field)?,
            z_prime: self.z_prime_from(field, &grad),
            z_second: terms.sum(),
            mass: m,
            energy,
            terms,
            linf,
            h1: (g2 + m).sqrt(),
            z_prime_bound: 2.0 * self.grad_chi_sup * g2.sqrt() * m.sqrt(),
        })
    }

    pub fn records(&self, snapshots: &[Snapshot]) -> Result<Vec<VirialRecord>> {
        snapshots.iter().map(|s| self.record(s)).collect()
    }
}

/// Finite-difference check of the virial identities on one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirialCheck {
    pub spacing: f64,
    /// `max |Δz/Δt - z'|`, centered differences at interior snapshots.
    pub abs_err1: f64,
    /// `max |Δ²z/Δt² - z''|`
    pub abs_err2: f64,
    /// `abs_err1` over `max_t 2‖∇χ‖_∞‖∇u‖₂‖u‖₂`.
    pub err1: f64,
    /// `abs_err2` over `max_t Σ|terms of z''|`.
    pub err2: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Compares centered differences of `z` with the identities. Snapshots must
/// be equally spaced in time.
pub fn verify_virial(records: &[VirialRecord]) -> Result<VirialCheck> {
    if records.len() < 3 {
        return Err(Error::precondition("virial check needs at least 3 snapshots"));
    }
    let h = records[1].time - records[0].time;
    if !(h > 0.0) {
        return Err(Error::precondition("snapshot times must increase"));
    }
    for w in records.windows(2) {
        if ((w[1].time - w[0].time) - h).abs() > 1e-9 * h {
            return Err(Error::precondition("snapshots are not equally spaced"));
        }
    }
    let mut e1: f64 = 0.0;
    let mut e2: f64 = 0.0;
    for i in 1..records.len() - 1 {
        let (zm, z0, zp) = (records[i - 1].z, records[i].z, records[i + 1].z);
        e1 = e1.max(((zp - zm) / (2.0 * h) - records[i].z_prime).abs());
        e2 = e2.max(((zp - 2.0 * z0 + zm) / (h * h) - records[i].z_second).abs());
    }
    let s1 = records.iter().map(|r| r.z_prime_bound).fold(0.0, f64::max);
    let s2 = records.iter().map(|r| r.terms.abs_sum()).fold(0.0, f64::max);
    Ok(VirialCheck {
        spacing: h,
        abs_err1: e1,
        abs_err2: e2,
        err1: ratio(e1, s1),
        err2: ratio(e2, s2),
    })
}

/// Convergence of the finite-difference errors over a step ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirialConvergence {
    pub checks: Vec<VirialCheck>,
    pub order1: Option<f64>,
    pub order2: Option<f64>,
}

pub fn virial_convergence(checks: Vec<VirialCheck>) -> VirialConvergence {
    let h: Vec<f64> = checks.iter().map(|c| c.spacing).collect();
    let e1: Vec<f64> = checks.iter().map(|c| c.abs_err1).collect();
    let e2: Vec<f64> = checks.iter().map(|c| c.abs_err2).collect();
    VirialConvergence {
        order1: fit::convergence_order(&h, &e1),
        order2: fit::convergence_order(&h, &e2),
        checks,
    }
}
