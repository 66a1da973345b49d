//! The truncated two-center weight
//!
//! ```text
//! χ_c(x) = (|x - 𝐜| + |x + 𝐜|) ψ(x / (c/4)),   𝐜 = (c, 0, …, 0),
//! ```
//!
//! with `ψ(y) = g(|y|)` from [`Cutoff`], and its derivatives up to `Δ²χ_c`.

use serde::{Deserialize, Serialize};

use super::cutoff::Cutoff;
use crate::linalg::{self, Mat, Point, ZERO, ZERO_MAT};
use crate::spectral::{ComplexField, Grid};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorawetzWeight {
    dim: usize,
    c: f64,
    cutoff: Cutoff,
}

/// `χ` and the derivatives entering the virial identities. Only the leading
/// `dim` components of vectors and matrices are meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeightDerivs {
    pub chi: f64,
    pub grad: Point,
    pub hess: Mat,
    pub lap: f64,
    pub bilap: f64,
}

/// A scalar with gradient, Hessian, Laplacian, gradient of the Laplacian and
/// bi-Laplacian.
#[derive(Debug, Clone, Copy, Default)]
struct Jet {
    f: f64,
    grad: Point,
    hess: Mat,
    lap: f64,
    grad_lap: Point,
    bilap: f64,
}

/// Derivatives of `r = |y|` for `y ≠ 0`.
fn distance_jet(y: &Point, dim: usize) -> Jet {
    let r = linalg::norm(y);
    let u = linalg::scale(y, 1.0 / r);
    let dm1 = (dim - 1) as f64;
    let mut hess = ZERO_MAT;
    for i in 0..dim {
        for j in 0..dim {
            hess[i][j] = (if i == j { 1.0 } else { 0.0 } - u[i] * u[j]) / r;
        }
    }
    Jet {
        f: r,
        grad: u,
        hess,
        lap: dm1 / r,
        grad_lap: linalg::scale(y, -dm1 / (r * r * r)),
        bilap: -dm1 * (dim as f64 - 3.0) / (r * r * r),
    }
}

fn add_jets(a: &Jet, b: &Jet, dim: usize) -> Jet {
    let mut hess = ZERO_MAT;
    for i in 0..dim {
        for j in 0..dim {
            hess[i][j] = a.hess[i][j] + b.hess[i][j];
        }
    }
    Jet {
        f: a.f + b.f,
        grad: linalg::add(&a.grad, &b.grad),
        hess,
        lap: a.lap + b.lap,
        grad_lap: linalg::add(&a.grad_lap, &b.grad_lap),
        bilap: a.bilap + b.bilap,
    }
}

impl MorawetzWeight {
    pub fn new(dim: usize, c: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::precondition(format!("dimension {dim} not in 1..=3")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::precondition(format!("weight scale c = {c} must be positive")));
        }
        Ok(MorawetzWeight {
            dim,
            c,
            cutoff: Cutoff,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `𝐜 = (c, 0, …, 0)`
    pub fn center(&self) -> Point {
        [self.c, 0.0, 0.0]
    }

    /// Radius outside which `χ_c` vanishes.
    pub fn support_radius(&self) -> f64 {
        0.5 * self.c
    }

    /// Radius of the ball on which the cutoff is identically 1.
    pub fn inner_radius(&self) -> f64 {
        0.25 * self.c
    }

    /// Radial cutoff `ψ(x/(c/4))` as a jet.
    fn cutoff_jet(&self, x: &Point) -> Jet {
        let d = self.dim;
        let rho = linalg::norm(x);
        let scale = 4.0 / self.c;
        let g = self.cutoff.derivs(scale * rho);
        let mut jet = Jet {
            f: g[0],
            ..Jet::default()
        };
        if g[1..].iter().all(|v| *v == 0.0) {
            return jet;
        }
        // G^{(k)}(ρ) = (4/c)^k g^{(k)}(4ρ/c), ρ > c/4 here.
        let g1 = scale * g[1];
        let g2 = scale * scale * g[2];
        let g3 = scale.powi(3) * g[3];
        let g4 = scale.powi(4) * g[4];
        let dm1 = (d - 1) as f64;
        let u = linalg::scale(x, 1.0 / rho);
        jet.grad = linalg::scale(&u, g1);
        for i in 0..d {
            for j in 0..d {
                let proj = if i == j { 1.0 } else { 0.0 } - u[i] * u[j];
                jet.hess[i][j] = g2 * u[i] * u[j] + g1 / rho * proj;
            }
        }
        jet.lap = g2 + dm1 * g1 / rho;
        let r2 = rho * rho;
        let lap_d1 = g3 + dm1 * (g2 / rho - g1 / r2);
        let lap_d2 = g4 + dm1 * (g3 / rho - 2.0 * g2 / r2 + 2.0 * g1 / (r2 * rho));
        jet.grad_lap = linalg::scale(&u, lap_d1);
        jet.bilap = lap_d2 + dm1 * lap_d1 / rho;
        jet
    }

    /// `χ_c` and its derivatives at `x`.
    pub fn eval(&self, x: &Point) -> WeightDerivs {
        let d = self.dim;
        if linalg::norm(x) >= self.support_radius() {
            return WeightDerivs::default();
        }
        let psi = self.cutoff_jet(x);
        let cv = self.center();
        let minus = linalg::sub(x, &cv);
        let plus = linalg::add(x, &cv);
        let cutoff_active = psi.grad.iter().chain([&psi.lap, &psi.bilap]).any(|v| *v != 0.0);
        if cutoff_active {
            let floor = 0.5 * self.c;
            let (a, b) = (linalg::norm(&minus), linalg::norm(&plus));
            assert!(
                a >= floor && b >= floor,
                "cutoff derivatives nonzero at distance {} < c/2 from a weight center",
                a.min(b)
            );
        }
        let phi = add_jets(&distance_jet(&minus, d), &distance_jet(&plus, d), d);

        let chi = phi.f * psi.f;
        let mut grad = ZERO;
        for i in 0..d {
            grad[i] = psi.f * phi.grad[i] + phi.f * psi.grad[i];
        }
        let mut hess = ZERO_MAT;
        let mut hess_contract = 0.0;
        for i in 0..d {
            for j in 0..d {
                hess[i][j] = psi.f * phi.hess[i][j]
                    + phi.f * psi.hess[i][j]
                    + phi.grad[i] * psi.grad[j]
                    + psi.grad[i] * phi.grad[j];
                hess_contract += phi.hess[i][j] * psi.hess[i][j];
            }
        }
        let lap = psi.f * phi.lap + phi.f * psi.lap + 2.0 * linalg::dot(&phi.grad, &psi.grad);
        let bilap = phi.f * psi.bilap
            + psi.f * phi.bilap
            + 2.0 * phi.lap * psi.lap
            + 4.0 * linalg::dot(&phi.grad, &psi.grad_lap)
            + 4.0 * linalg::dot(&psi.grad, &phi.grad_lap)
            + 4.0 * hess_contract;
        WeightDerivs {
            chi,
            grad,
            hess,
            lap,
            bilap,
        }
    }

    pub fn eval_points(&self, points: &[Point]) -> Vec<WeightDerivs> {
        par::map_slice(points, |x| self.eval(x))
    }

    pub fn sample(&self, grid: &Grid) -> Vec<WeightDerivs> {
        par::map_range(grid.len(), |i| self.eval(&grid.point(i)))
    }
}

/// Maximum errors of analytic versus spectral derivatives of `χ_c` over a
/// ball, normalized by the largest analytic value of the same quantity over
/// `|x| ≤ 0.45c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyErrors {
    pub region_radius: f64,
    pub lap: f64,
    pub hess: f64,
    pub bilap: f64,
}

impl ConsistencyErrors {
    pub fn max(&self) -> f64 {
        self.lap.max(self.hess).max(self.bilap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightConsistency {
    pub c: f64,
    pub nodes_across_transition: f64,
    /// Over `|x| ≤ c/4`.
    pub inner: ConsistencyErrors,
    /// Over `|x| ≤ 0.45 c`.
    pub full: ConsistencyErrors,
    /// `max |Δ²χ_c|` over `|x| ≤ c/4`, analytic.
    pub inner_bilap_max: f64,
}

/// Fewest grid nodes allowed across the transition annulus of width `c/4`.
pub const MIN_TRANSITION_NODES: f64 = 8.0;

/// Samples `χ_c` on `grid` and compares spectral derivatives with the
/// analytic ones.
pub fn weight_derivative_consistency(weight: &MorawetzWeight, grid: &Grid) -> Result<WeightConsistency> {
    if grid.dim() != weight.dim() {
        return Err(Error::precondition("grid and weight dimensions differ"));
    }
    let nodes = weight.inner_radius() / grid.spacing();
    if nodes < MIN_TRANSITION_NODES {
        return Err(Error::precondition(format!(
            "transition annulus resolved by {nodes:.1} nodes; need at least {MIN_TRANSITION_NODES}"
        )));
    }
    if grid.half_width() < weight.support_radius() {
        return Err(Error::precondition(format!(
            "box half-width {} does not contain the weight support radius {}",
            grid.half_width(),
            weight.support_radius()
        )));
    }
    let d = grid.dim();
    let analytic = weight.sample(grid);
    let chi: Vec<f64> = analytic.iter().map(|w| w.chi).collect();
    let field = ComplexField::from_real(*grid, &chi)?;
    let lap = field.laplacian();
    let bilap = field.bilaplacian();
    let hess = field.hessian();

    let full_radius = 0.45 * weight.c();
    let region = |radius: f64| -> ConsistencyErrors {
        let inside = |i: usize| linalg::norm(&grid.point(i)) <= radius;
        let scale = |f: &(dyn Fn(usize) -> f64 + Sync)| {
            par::max_range(grid.len(), |i| if inside(i) { f(i).abs() } else { 0.0 })
        };
        let relative = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };

        let full = |f: &(dyn Fn(usize) -> f64 + Sync)| {
            par::max_range(grid.len(), |i| {
                if linalg::norm(&grid.point(i)) <= full_radius {
                    f(i).abs()
                } else {
                    0.0
                }
            })
        };
        // Errors in both regions are measured against the largest analytic
        // value over |x| ≤ 0.45c: inside the ball some quantities vanish
        // identically (Δχ in d = 1, Δ²χ in d = 1 and 3).
        let lap_err = scale(&|i| analytic[i].lap - lap.values()[i].re);
        let lap_scale = full(&|i| analytic[i].lap);
        let bilap_err = scale(&|i| analytic[i].bilap - bilap.values()[i].re);
        let bilap_scale = full(&|i| analytic[i].bilap);
        let mut hess_err: f64 = 0.0;
        let mut hess_scale: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                hess_err = hess_err.max(scale(&|i| analytic[i].hess[a][b] - hess[a][b].values()[i].re));
                hess_scale = hess_scale.max(full(&|i| analytic[i].hess[a][b]));
            }
        }
        ConsistencyErrors {
            region_radius: radius,
            lap: relative(lap_err, lap_scale),
            hess: relative(hess_err, hess_scale),
            bilap: relative(bilap_err, bilap_scale),
        }
    };
    let inner_r = weight.inner_radius();
    let inner_bilap_max = par::max_range(grid.len(), |i| {
        if linalg::norm(&grid.point(i)) <= inner_r {
            analytic[i].bilap.abs()
        } else {
            0.0
        }
    });
    Ok(WeightConsistency {
        c: weight.c(),
        nodes_across_transition: nodes,
        inner: region(inner_r),
        full: region(full_radius),
        inner_bilap_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRung {
    pub c: f64,
    /// `sup c·(|Δχ_c| + |D²χ_c| + |Δ²χ_c|)` with `|D²χ_c|` the Frobenius norm.
    pub sup_scaled: f64,
    /// `sup c·(|Δχ_c| + |D²χ_c|)`; exactly scale-invariant.
    pub second_order_scaled: f64,
    /// `sup c·|Δ²χ_c|`; scales like `c⁻²`.
    pub bilap_scaled: f64,
    /// Same supremum restricted to `|x| ≤ c/4`, counting `Δχ_c` only.
    pub inner_lap_scaled: f64,
    /// `sup |Δ²χ_c|` over `|x| ≤ c/4`.
    pub inner_bilap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub rungs: Vec<BoundRung>,
    /// `max / min` of `sup_scaled` over the ladder.
    pub spread: f64,
}

/// Evaluates the scaled derivative supremum on a lattice of `nodes_per_axis`
/// nodes spanning `[-c/2, c/2)^d`, so resolution scales with `c`.
pub fn derivative_bound_check(dim: usize, c_ladder: &[f64], nodes_per_axis: usize) -> Result<BoundReport> {
    if c_ladder.len() < 3 {
        return Err(Error::precondition("derivative bound ladder needs at least 3 values of c"));
    }
    let rungs = c_ladder
        .iter()
        .map(|&c| {
            let w = MorawetzWeight::new(dim, c)?;
            let grid = Grid::new(dim, nodes_per_axis, w.support_radius())?;
            let inner = w.inner_radius();
            let vals = w.sample(&grid);
            let sup_scaled = par::max_range(grid.len(), |i| {
                let v = &vals[i];
                c * (v.lap.abs() + linalg::frobenius(&v.hess, dim) + v.bilap.abs())
            });
            let in_ball = |i: usize| linalg::norm(&grid.point(i)) <= inner;
            let second_order_scaled = par::max_range(grid.len(), |i| {
                c * (vals[i].lap.abs() + linalg::frobenius(&vals[i].hess, dim))
            });
            let bilap_scaled = par::max_range(grid.len(), |i| c * vals[i].bilap.abs());
            let inner_lap_scaled =
                par::max_range(grid.len(), |i| if in_ball(i) { c * vals[i].lap.abs() } else { 0.0 });
            let inner_bilap =
                par::max_range(grid.len(), |i| if in_ball(i) { vals[i].bilap.abs() } else { 0.0 });
            Ok(BoundRung {
                c,
                sup_scaled,
                second_order_scaled,
                bilap_scaled,
                inner_lap_scaled,
                inner_bilap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max = rungs.iter().map(|r| r.sup_scaled).fold(f64::NEG_INFINITY, f64::max);
    let min = rungs.iter().map(|r| r.sup_scaled).fold(f64::INFINITY, f64::min);
    Ok(BoundReport { rungs, spread: max / min })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_origin() {
        let w = MorawetzWeight::new(3, 8.0).unwrap();
        let v = w.eval(&ZERO);
        assert_eq!(v.chi, 16.0);
        assert_eq!(v.grad, ZERO);
        assert!((v.lap - 0.5).abs() < 1e-15);
        let expected = [[0.0, 0.0, 0.0], [0.0, 0.25, 0.0], [0.0, 0.0, 0.25]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((v.hess[i][j] - expected[i][j]).abs() < 1e-15);
            }
        }
        assert_eq!(v.bilap, 0.0);
    }

    #[test]
    fn vanishes_outside_support() {
        let w = MorawetzWeight::new(2, 10.0).unwrap();
        assert_eq!(w.eval(&[5.0, 0.0, 0.0]), WeightDerivs::default());
        assert_eq!(w.eval(&[4.0, 3.5, 0.0]).chi, 0.0);
        assert!(w.eval(&[4.9, 0.0, 0.0]).chi > 0.0);
    }

    #[test]
    fn in_ball_properties() {
        let c = 12.0;
        for dim in 1..=3 {
            let w = MorawetzWeight::new(dim, c).unwrap();
            let grid = Grid::new(dim, 16, c / 4.0).unwrap();
            for x in grid.points() {
                if linalg::norm(&x) > c / 4.0 {
                    continue;
                }
                let v = w.eval(&x);
                assert!(v.chi >= 2.0 * c - 1e-12);
                assert!(v.lap * c >= (dim as f64 - 1.0) * 0.8 - 1e-12);
                if dim == 3 {
                    assert_eq!(v.bilap, 0.0);
                }
                let mirrored = w.eval(&[x[0], -x[1], -x[2]]);
                assert!((mirrored.chi - v.chi).abs() < 1e-12);
                if dim == 2 {
                    let [lo, _] = linalg::sym2_eigenvalues(v.hess[0][0], v.hess[0][1], v.hess[1][1]);
                    assert!(lo >= -1e-14);
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences_in_transition() {
        let w = MorawetzWeight::new(3, 8.0).unwrap();
        let h = 1e-4;
        for x in [[2.5, 0.3, -0.4], [0.1, 2.9, 0.5], [-1.7, 1.7, 1.0], [1.0, 0.2, 0.1]] {
            let v = w.eval(&x);
            let mut lap_fd = 0.0;
            for a in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[a] += h;
                xm[a] -= h;
                let (p, m) = (w.eval(&xp), w.eval(&xm));
                assert!(((p.chi - m.chi) / (2.0 * h) - v.grad[a]).abs() < 1e-6);
                for b in 0..3 {
                    assert!(((p.grad[b] - m.grad[b]) / (2.0 * h) - v.hess[a][b]).abs() < 1e-6);
                }
                lap_fd += (p.chi - 2.0 * v.chi + m.chi) / (h * h);
            }
            assert!((lap_fd - v.lap).abs() < 1e-4);
            let trace: f64 = (0..3).map(|a| v.hess[a][a]).sum();
            assert!((trace - v.lap).abs() < 1e-12);
            let mut bilap_fd = 0.0;
            for a in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[a] += 1e-3;
                xm[a] -= 1e-3;
                bilap_fd += (w.eval(&xp).lap - 2.0 * v.lap + w.eval(&xm).lap) / 1e-6;
            }
            assert!((bilap_fd - v.bilap).abs() < 1e-4 * v.bilap.abs().max(1.0), "{bilap_fd} vs {}", v.bilap);
        }
    }

    #[test]
    fn under_resolved_grid_is_rejected() {
        let w = MorawetzWeight::new(1, 8.0).unwrap();
        let coarse = Grid::new(1, 16, 4.2).unwrap();
        assert!(weight_derivative_consistency(&w, &coarse).is_err());
    }

    #[test]
    fn derivative_bound_in_ball_closed_form() {
        let rep = derivative_bound_check(3, &[8.0, 16.0, 32.0, 64.0], 16).unwrap();
        for r in &rep.rungs {
            assert!(r.inner_lap_scaled <= 16.0 / 3.0 + 1e-12);
            assert_eq!(r.inner_bilap, 0.0);
        }
        for pair in rep.rungs.windows(2) {
            let ratio = pair[1].second_order_scaled / pair[0].second_order_scaled;
            assert!((ratio - 1.0).abs() < 1e-12, "{ratio}");
            let decay = pair[1].bilap_scaled / pair[0].bilap_scaled;
            assert!((decay - 0.25).abs() < 1e-12, "{decay}");
            assert!(pair[1].sup_scaled <= pair[0].sup_scaled);
        }
        assert!(derivative_bound_check(3, &[8.0, 16.0], 16).is_err());
    }
}
