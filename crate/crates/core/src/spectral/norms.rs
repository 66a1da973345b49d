use super::{ComplexField, Grid, Snapshot};
use crate::linalg::Point;
use crate::potential::PotentialSpec;
use crate::{par, Error, Result};

fn ensure_finite(field: &ComplexField) -> Result<()> {
    if field.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("field"))
    }
}

/// `L^p` norm by grid-cell quadrature; `p = f64::INFINITY` gives the nodal max.
pub fn lp_norm(field: &ComplexField, p: f64) -> Result<f64> {
    lp_norm_on(field, p, |_| true)
}

/// `L^p` norm restricted to nodes where `region(x)` holds.
pub fn lp_norm_on<R>(field: &ComplexField, p: f64, region: R) -> Result<f64>
where
    R: Fn(&Point) -> bool + Sync + Send,
{
    if !(p >= 1.0) {
        return Err(Error::precondition(format!("L^p exponent {p} must be at least 1")));
    }
    ensure_finite(field)?;
    let grid = field.grid();
    let v = field.values();
    if p.is_infinite() {
        let m = par::max_range(v.len(), |i| {
            if region(&grid.point(i)) {
                v[i].norm()
            } else {
                0.0
            }
        });
        return Ok(m.max(0.0));
    }
    let s = par::sum_range(v.len(), |i| {
        if region(&grid.point(i)) {
            v[i].norm().powf(p)
        } else {
            0.0
        }
    });
    Ok((s * grid.cell_volume()).powf(1.0 / p))
}

/// `‖u‖₂²`
pub fn mass(field: &ComplexField) -> f64 {
    let v = field.values();
    par::sum_range(v.len(), |i| v[i].norm_sqr()) * field.grid().cell_volume()
}

fn fourier_weighted_sq(grid: &Grid, hat: &[rustfft::num_complex::Complex64], w: impl Fn(f64) -> f64 + Sync + Send) -> f64 {
    // Parseval: h^d Σ|u|² = (h^d / N) Σ|û|²
    let s = par::sum_range(hat.len(), |i| w(grid.k_squared(i)) * hat[i].norm_sqr());
    s * grid.cell_volume() / grid.len() as f64
}

/// `∫|∇u|²`, computed exactly on the grid in Fourier space.
pub fn gradient_l2_sq(field: &ComplexField) -> f64 {
    fourier_weighted_sq(field.grid(), &field.to_fourier(), |k2| k2)
}

/// `(∫|∇u|² + ∫|u|²)^{1/2}`.
pub fn h1_norm(field: &ComplexField) -> Result<f64> {
    ensure_finite(field)?;
    Ok(fourier_weighted_sq(field.grid(), &field.to_fourier(), |k2| 1.0 + k2).sqrt())
}

/// The quadratic energy form `∫|∇u|² + ∫V|u|² + ∫|u|²` (not square-rooted).
pub fn energy_h_norm(field: &ComplexField, potential: Option<&PotentialSpec>) -> Result<f64> {
    ensure_finite(field)?;
    let grid = field.grid();
    let v = field.values();
    let pot = match potential {
        Some(spec) => {
            par::sum_range(v.len(), |i| spec.value(&grid.point(i)) * v[i].norm_sqr())
                * grid.cell_volume()
        }
        None => 0.0,
    };
    Ok(gradient_l2_sq(field) + pot + mass(field))
}

/// Trapezoidal `L^q_t` norm of a sampled series of spatial norms.
///
/// `q = ∞` returns the max of the samples.
pub fn mixed_norm(times: &[f64], spatial: &[f64], q: f64) -> Result<f64> {
    if times.len() != spatial.len() {
        return Err(Error::SizeMismatch {
            expected: times.len(),
            actual: spatial.len(),
        });
    }
    if times.len() < 2 {
        return Err(Error::precondition("space-time norm needs at least 2 snapshots"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::precondition("snapshot times must be strictly increasing"));
    }
    if !(q >= 1.0) {
        return Err(Error::precondition(format!("time exponent {q} must be at least 1")));
    }
    if q.is_infinite() {
        return Ok(spatial.iter().copied().fold(0.0, f64::max));
    }
    let mut acc = 0.0;
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        acc += 0.5 * dt * (spatial[i - 1].powf(q) + spatial[i].powf(q));
    }
    Ok(acc.powf(1.0 / q))
}

/// `‖u‖_{L^q_t L^r_x}` over the snapshot window.
pub fn spacetime_norm(snapshots: &[Snapshot], q: f64, r: f64) -> Result<f64> {
    if snapshots.len() < 2 {
        return Err(Error::precondition("space-time norm needs at least 2 snapshots"));
    }
    let times: Vec<f64> = snapshots.iter().map(|s| s.time).collect();
    let norms = snapshots
        .iter()
        .map(|s| lp_norm(&s.field, r))
        .collect::<Result<Vec<_>>>()?;
    mixed_norm(&times, &norms, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::GaussianTerm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rustfft::num_complex::Complex64;

    #[test]
    fn zero_field_has_zero_norms() {
        let grid = Grid::new(2, 16, 2.0).unwrap();
        let z = ComplexField::zeros(grid);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_eq!(lp_norm(&z, p).unwrap(), 0.0);
        }
        assert_eq!(h1_norm(&z).unwrap(), 0.0);
        assert_eq!(energy_h_norm(&z, None).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_l2_in_3d() {
        let grid = Grid::new(3, 64, 8.0).unwrap();
        let u = ComplexField::gaussian(grid, 1.0, 1.0, [0.0; 3], [0.0; 3]);
        let l2sq = lp_norm(&u, 2.0).unwrap().powi(2);
        let exact = std::f64::consts::PI.powf(1.5);
        assert!((l2sq - exact).abs() < 1e-6, "{l2sq} vs {exact}");
        assert!((mass(&u) - exact).abs() < 1e-6);
    }

    #[test]
    fn parseval_holds() {
        let grid = Grid::new(2, 32, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let vals: Vec<Complex64> = (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let u = ComplexField::from_values(grid, vals).unwrap();
        let phys = mass(&u);
        let fourier = fourier_weighted_sq(&grid, &u.to_fourier(), |_| 1.0);
        assert!((phys - fourier).abs() <= 1e-12 * phys);
    }

    #[test]
    fn energy_form_dominates_h1_for_nonnegative_potential() {
        let grid = Grid::new(2, 32, 4.0).unwrap();
        let spec = PotentialSpec::new(
            2,
            vec![
                GaussianTerm::new([1.0, 0.0, 0.0], 2.0, 1.0),
                GaussianTerm::new([-1.0, 0.0, 0.0], 2.0, 1.0),
            ],
            2.0,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let vals: Vec<Complex64> = (0..grid.len())
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let u = ComplexField::from_values(grid, vals).unwrap();
            let h1 = h1_norm(&u).unwrap();
            assert!(h1 * h1 <= energy_h_norm(&u, Some(&spec)).unwrap());
        }
    }

    #[test]
    fn lp_rejects_small_exponent() {
        let grid = Grid::new(1, 8, 1.0).unwrap();
        assert!(lp_norm(&ComplexField::zeros(grid), 0.5).is_err());
    }

    #[test]
    fn spacetime_norm_of_constant_and_zero() {
        let grid = Grid::new(1, 32, 4.0).unwrap();
        let u = ComplexField::gaussian(grid, 1.0, 1.0, [0.0; 3], [0.0; 3]);
        let snaps: Vec<Snapshot> = [0.0, 0.25, 0.5, 1.0]
            .iter()
            .map(|&t| Snapshot { time: t, field: u.clone() })
            .collect();
        let st = spacetime_norm(&snaps, 2.0, 4.0).unwrap();
        assert!((st - lp_norm(&u, 4.0).unwrap()).abs() < 1e-14);

        let zeros: Vec<Snapshot> = snaps
            .iter()
            .map(|s| Snapshot { time: s.time, field: ComplexField::zeros(grid) })
            .collect();
        assert_eq!(spacetime_norm(&zeros, 8.0 / 3.0, 4.0).unwrap(), 0.0);
        assert!(spacetime_norm(&snaps[..1], 2.0, 2.0).is_err());
    }

    #[test]
    fn mixed_norm_rejects_unordered_times() {
        assert!(mixed_norm(&[0.0, 0.0], &[1.0, 1.0], 2.0).is_err());
        assert_eq!(mixed_norm(&[0.0, 1.0, 2.0], &[1.0, 3.0, 2.0], f64::INFINITY).unwrap(), 3.0);
    }
}
