//! Term-by-term lower bound for `z''` used in the rigidity argument.
//!
//! Per snapshot the report lists the bulk term `(1/c)∫_{B(0,A)}|u|^{α+2}`, the
//! exterior tail `ε(c)`, the far-field potential term and its Hölder bound,
//! and the near-field term bounded through the measured convexity margin.

use serde::{Deserialize, Serialize};

use super::weight::MorawetzWeight;
use crate::linalg;
use crate::potential::PotentialSpec;
use crate::spectral::{lp_norm_on, ComplexField, Snapshot};
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityRow {
    pub time: f64,
    /// `(1/c)∫_{B(0,A)}|u|^{α+2}`
    pub bulk: f64,
    /// `‖u‖_{L^{α+2}} + ‖u‖_{L²} + ‖∇u‖_{L²}` over `|x| ≥ c/4`.
    pub epsilon: f64,
    /// `2|∫_{|x|≥R} ∇χ·∇V |u|²|`
    pub far_term: f64,
    /// `2‖∇χ‖_∞ R^{-β} ‖|x|^β ∇V‖_{L^{d/2}} ‖u‖²_{L^{2*}(|x|≥R)}`; only for `d ≥ 3`.
    pub far_bound: Option<f64>,
    /// `2|min(m, 0)| ∫_{B(0,R)} (|∇V₁| + |∇V₂|)|u|²`
    pub near_bound: f64,
    /// `bulk - ε/c - far_term - near_bound`
    pub lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub c: f64,
    pub a: f64,
    pub r: f64,
    pub beta: f64,
    /// `ln R / ln c`
    pub nu: f64,
    /// `1/β`, the exponent the far-field bound balances at.
    pub nu_balanced: f64,
    /// `min ∇χ·(-∇Vᵢ/|∇Vᵢ|)` over nodes in `B(0,R)` where `∇Vᵢ ≠ 0`.
    pub near_margin: f64,
    /// `‖|x|^β ∇V‖_{L^{d/2}}`
    pub weighted_grad_norm: f64,
    pub rows: Vec<RigidityRow>,
}

pub fn rigidity_report(
    snapshots: &[Snapshot],
    weight: &MorawetzWeight,
    spec: &PotentialSpec,
    alpha: f64,
    a: f64,
    r: f64,
) -> Result<RigidityReport> {
    let c = weight.c();
    let quarter = weight.inner_radius();
    if !(a > 0.0 && a <= quarter) {
        return Err(Error::precondition(format!("bulk radius A = {a} must lie in (0, c/4 = {quarter}]")));
    }
    if !(r > 0.0 && r < quarter) {
        return Err(Error::precondition(format!("near-field radius R = {r} must lie in (0, c/4 = {quarter})")));
    }
    let Some(first) = snapshots.first() else {
        return Err(Error::precondition("rigidity report needs at least one snapshot"));
    };
    let grid = *first.field.grid();
    let dim = grid.dim();
    if spec.dim() != dim || weight.dim() != dim {
        return Err(Error::precondition("grid, weight and potential dimensions differ"));
    }
    let vol = grid.cell_volume();
    let n = grid.len();
    let points = grid.points();
    let derivs = weight.sample(&grid);
    let radius: Vec<f64> = points.iter().map(linalg::norm).collect();
    let grad_v = spec.sample_gradient(&grid);
    let chi_dot_v: Vec<f64> = (0..n).map(|i| linalg::dot(&derivs[i].grad, &grad_v[i])).collect();
    let grad_chi_sup = par::max_range(n, |i| linalg::norm(&derivs[i].grad));

    let term_grads: Vec<Vec<f64>> = spec
        .terms()
        .iter()
        .map(|t| par::map_range(n, |i| linalg::norm(&t.gradient(&points[i]))))
        .collect();
    let mut near_margin = f64::INFINITY;
    for (t, mags) in spec.terms().iter().zip(&term_grads) {
        let m = par::map_range(n, |i| {
            if radius[i] >= r || mags[i] == 0.0 {
                return f64::INFINITY;
            }
            let normal = linalg::scale(&t.gradient(&points[i]), -1.0 / mags[i]);
            linalg::dot(&derivs[i].grad, &normal)
        });
        near_margin = m.into_iter().fold(near_margin, f64::min);
    }
    if !near_margin.is_finite() {
        near_margin = 0.0;
    }
    let grad_sum: Vec<f64> = (0..n).map(|i| term_grads.iter().map(|g| g[i]).sum()).collect();

    let beta = spec.beta();
    let half_d = dim as f64 / 2.0;
    let weighted_grad_norm = (par::sum_range(n, |i| {
        (radius[i].powf(beta) * linalg::norm(&grad_v[i])).powf(half_d)
    }) * vol)
        .powf(1.0 / half_d);

    let p = alpha + 2.0;
    let rows = snapshots
        .iter()
        .map(|snap| {
            let u = &snap.field;
            if u.grid() != &grid {
                return Err(Error::precondition("snapshots use different grids"));
            }
            let v = u.values();
            let bulk = par::sum_range(n, |i| if radius[i] < a { v[i].norm().powf(p) } else { 0.0 }) * vol / c;
            let outside = |x: &crate::Point| linalg::norm(x) >= quarter;
            let grad_tail = tail_gradient_norm(u, quarter);
            let epsilon = lp_norm_on(u, p, outside)? + lp_norm_on(u, 2.0, outside)? + grad_tail;
            let far_term = 2.0
                * (par::sum_range(n, |i| if radius[i] >= r { chi_dot_v[i] * v[i].norm_sqr() } else { 0.0 }) * vol)
                    .abs();
            let far_bound = if dim >= 3 {
                let two_star = 2.0 * dim as f64 / (dim as f64 - 2.0);
                let tail = lp_norm_on(u, two_star, |x| linalg::norm(x) >= r)?;
                Some(2.0 * grad_chi_sup * r.powf(-beta) * weighted_grad_norm * tail * tail)
            } else {
                None
            };
            let near_integral = par::sum_range(n, |i| if radius[i] < r { grad_sum[i] * v[i].norm_sqr() } else { 0.0 }) * vol;
            let near_bound = 2.0 * (-near_margin).max(0.0) * near_integral;
            Ok(RigidityRow {
                time: snap.time,
                bulk,
                epsilon,
                far_term,
                far_bound,
                near_bound,
                lower: bulk - epsilon / c - far_term - near_bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RigidityReport {
        c,
        a,
        r,
        beta,
        nu: r.ln() / c.ln(),
        nu_balanced: 1.0 / beta,
        near_margin,
        weighted_grad_norm,
        rows,
    })
}

/// `‖∇u‖_{L²(|x| ≥ radius)}` with a spectral gradient.
fn tail_gradient_norm(u: &ComplexField, radius: f64) -> f64 {
    let grid = u.grid();
    let grads = u.gradient();
    let s = par::sum_range(grid.len(), |i| {
        if linalg::norm(&grid.point(i)) >= radius {
            grads.iter().map(|g| g.values()[i].norm_sqr()).sum()
        } else {
            0.0
        }
    });
    (s * grid.cell_volume()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    #[test]
    fn zero_field_gives_zero_terms() {
        let grid = Grid::new(3, 16, 20.0).unwrap();
        let spec = PotentialSpec::symmetric_pair(3, 3.0, 1.0, 1.0, 2.0).unwrap();
        let w = MorawetzWeight::new(3, 32.0).unwrap();
        let snaps = vec![Snapshot { time: 0.0, field: ComplexField::zeros(grid) }];
        let rep = rigidity_report(&snaps, &w, &spec, 2.0, 4.0, 6.0).unwrap();
        let row = &rep.rows[0];
        assert_eq!((row.bulk, row.epsilon, row.far_term, row.near_bound, row.lower), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(row.far_bound, Some(0.0));
    }

    #[test]
    fn preconditions() {
        let grid = Grid::new(3, 16, 20.0).unwrap();
        let spec = PotentialSpec::symmetric_pair(3, 3.0, 1.0, 1.0, 2.0).unwrap();
        let w = MorawetzWeight::new(3, 32.0).unwrap();
        let snaps = vec![Snapshot { time: 0.0, field: ComplexField::zeros(grid) }];
        assert!(rigidity_report(&snaps, &w, &spec, 2.0, 9.0, 6.0).is_err());
        assert!(rigidity_report(&snaps, &w, &spec, 2.0, 4.0, 8.0).is_err());
        assert!(rigidity_report(&[], &w, &spec, 2.0, 4.0, 6.0).is_err());
    }

    #[test]
    fn compact_data_without_potential_reduces_to_bulk() {
        // The whole box lies inside B(0, c/4) (corner distance 8√3 < 14), so
        // the data is supported in B(0, A) and every exterior term is empty.
        let grid = Grid::new(3, 32, 8.0).unwrap();
        let spec = PotentialSpec::zero(3);
        let w = MorawetzWeight::new(3, 56.0).unwrap();
        let u = ComplexField::gaussian(grid, 1.0, 1.0, [0.0; 3], [0.5, 0.0, 0.0]);
        let rep = rigidity_report(&[Snapshot { time: 0.0, field: u }], &w, &spec, 2.0, 14.0, 10.0).unwrap();
        let row = &rep.rows[0];
        assert!(row.bulk > 0.0);
        assert_eq!((row.epsilon, row.far_term, row.near_bound), (0.0, 0.0, 0.0));
        assert_eq!(row.lower, row.bulk);
    }

    #[test]
    fn pair_potential_terms_are_finite() {
        let grid = Grid::new(3, 32, 16.0).unwrap();
        let spec = PotentialSpec::symmetric_pair(3, 3.0, 1.0, 1.0, 2.0).unwrap();
        let c = 64.0;
        let w = MorawetzWeight::new(3, c).unwrap();
        let r = c.powf(1.0 / spec.beta());
        let u = ComplexField::gaussian(grid, 1.0, 1.5, [0.0; 3], [0.0; 3]);
        let rep = rigidity_report(&[Snapshot { time: 0.0, field: u }], &w, &spec, 2.0, 8.0, r).unwrap();
        assert_eq!(rep.r, 8.0);
        assert!((rep.nu - 0.5).abs() < 1e-12);
        let row = &rep.rows[0];
        for v in [row.bulk, row.epsilon, row.far_term, row.near_bound, row.lower, row.far_bound.unwrap()] {
            assert!(v.is_finite());
        }
        assert!(row.far_term <= row.far_bound.unwrap());
    }
}
