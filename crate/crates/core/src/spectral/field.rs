use rustfft::num_complex::Complex64;

use super::{fft_forward, fft_inverse, Grid};
use crate::linalg::{Point, MAX_DIM};
use crate::{par, Error, Result};

/// Complex samples on every node of a [`Grid`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

/// A field paired with the time it was recorded at.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub field: ComplexField,
}

impl ComplexField {
    pub fn zeros(grid: Grid) -> Self {
        ComplexField {
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            grid,
        }
    }

    pub fn from_values(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(ComplexField { grid, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn<F>(grid: Grid, f: F) -> Self
    where
        F: Fn(&Point) -> Complex64 + Sync + Send,
    {
        let values = par::map_range(grid.len(), |i| f(&grid.point(i)));
        ComplexField { grid, values }
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self> {
        Self::from_values(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// `amplitude · exp(-|x - center|² / (2 width²) + i k·x)`
    pub fn gaussian(grid: Grid, amplitude: f64, width: f64, center: Point, momentum: Point) -> Self {
        Self::from_fn(grid, move |x| {
            let mut r2 = 0.0;
            let mut phase = 0.0;
            for axis in 0..grid.dim() {
                let d = x[axis] - center[axis];
                r2 += d * d;
                phase += momentum[axis] * x[axis];
            }
            Complex64::from_polar(amplitude * (-r2 / (2.0 * width * width)).exp(), phase)
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn ensure_same_grid(&self, other: &ComplexField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::SizeMismatch {
                expected: self.grid.len(),
                actual: other.grid.len(),
            });
        }
        Ok(())
    }

    pub fn sub(&self, other: &ComplexField) -> Result<ComplexField> {
        self.ensure_same_grid(other)?;
        let values = par::map_range(self.values.len(), |i| self.values[i] - other.values[i]);
        Ok(ComplexField {
            grid: self.grid,
            values,
        })
    }

    pub fn scaled(&self, s: Complex64) -> ComplexField {
        let mut out = self.clone();
        par::for_each_indexed(&mut out.values, |_, v| *v *= s);
        out
    }

    /// Forward DFT coefficients (unnormalized).
    pub fn to_fourier(&self) -> Vec<Complex64> {
        let mut hat = self.values.clone();
        fft_forward(&self.grid, &mut hat).expect("length checked at construction");
        hat
    }

    pub fn from_fourier(grid: Grid, mut hat: Vec<Complex64>) -> Result<ComplexField> {
        fft_inverse(&grid, &mut hat)?;
        Ok(ComplexField { grid, values: hat })
    }

    /// Applies the Fourier multiplier `m(k)`.
    pub fn apply_multiplier<F>(&self, m: F) -> ComplexField
    where
        F: Fn(&Point) -> Complex64 + Sync + Send,
    {
        let mut hat = self.to_fourier();
        let grid = self.grid;
        par::for_each_indexed(&mut hat, |i, v| *v *= m(&grid.k_vector(i)));
        ComplexField::from_fourier(grid, hat).expect("same grid")
    }

    fn multiplier_from_hat<F>(&self, hat: &[Complex64], m: F) -> ComplexField
    where
        F: Fn(usize) -> Complex64 + Sync + Send,
    {
        let mut out = hat.to_vec();
        par::for_each_indexed(&mut out, |i, v| *v *= m(i));
        ComplexField::from_fourier(self.grid, out).expect("same grid")
    }

    /// First derivative multiplier `i k_a`, with the Nyquist bin of axis `a`
    /// zeroed so real fields have real derivatives.
    fn ik(&self, idx: usize, axis: usize) -> Complex64 {
        let m = self.grid.multi_index(idx);
        if self.grid.is_nyquist(m[axis]) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, self.grid.wavenumber(m[axis]))
        }
    }

    /// Spectral gradient, one field per axis.
    pub fn gradient(&self) -> Vec<ComplexField> {
        let hat = self.to_fourier();
        (0..self.grid.dim())
            .map(|axis| self.multiplier_from_hat(&hat, |i| self.ik(i, axis)))
            .collect()
    }

    /// Pure second derivatives `∂²/∂x_a²` (multiplier `-k_a²`).
    pub fn second_derivatives(&self) -> Vec<ComplexField> {
        let hat = self.to_fourier();
        (0..self.grid.dim())
            .map(|axis| {
                self.multiplier_from_hat(&hat, |i| {
                    let k = self.grid.wavenumber(self.grid.multi_index(i)[axis]);
                    Complex64::new(-k * k, 0.0)
                })
            })
            .collect()
    }

    /// Spectral Laplacian (multiplier `-|k|²`).
    pub fn laplacian(&self) -> ComplexField {
        let grid = self.grid;
        self.apply_multiplier(move |k| {
            let k2: f64 = k[..grid.dim()].iter().map(|v| v * v).sum();
            Complex64::new(-k2, 0.0)
        })
    }

    /// Spectral bi-Laplacian (multiplier `|k|⁴`).
    pub fn bilaplacian(&self) -> ComplexField {
        let grid = self.grid;
        self.apply_multiplier(move |k| {
            let k2: f64 = k[..grid.dim()].iter().map(|v| v * v).sum();
            Complex64::new(k2 * k2, 0.0)
        })
    }

    /// Hessian entries `H[a][b]`, `a ≤ b`, others mirrored.
    pub fn hessian(&self) -> Vec<Vec<ComplexField>> {
        let hat = self.to_fourier();
        let d = self.grid.dim();
        let mut rows: Vec<Vec<Option<ComplexField>>> = vec![vec![None; d]; d];
        for a in 0..d {
            for b in a..d {
                let f = if a == b {
                    self.multiplier_from_hat(&hat, |i| {
                        let k = self.grid.wavenumber(self.grid.multi_index(i)[a]);
                        Complex64::new(-k * k, 0.0)
                    })
                } else {
                    self.multiplier_from_hat(&hat, |i| self.ik(i, a) * self.ik(i, b))
                };
                rows[b][a] = Some(f.clone());
                rows[a][b] = Some(f);
            }
        }
        rows.into_iter()
            .map(|r| r.into_iter().map(|f| f.expect("filled")).collect())
            .collect()
    }

    /// Periodic shift by whole nodes: `out(x) = self(x - shift·h)`.
    pub fn roll(&self, shift: [i64; MAX_DIM]) -> ComplexField {
        let grid = self.grid;
        let n = grid.n() as i64;
        let values = par::map_range(grid.len(), |i| {
            let mut m = grid.multi_index(i);
            for axis in 0..grid.dim() {
                m[axis] = (m[axis] as i64 - shift[axis]).rem_euclid(n) as usize;
            }
            self.values[grid.flat_index(&m)]
        });
        ComplexField { grid, values }
    }

    /// Converts a physical displacement to a node shift, requiring it to lie
    /// on the lattice.
    pub fn node_shift(grid: &Grid, displacement: &Point) -> Result<[i64; MAX_DIM]> {
        let h = grid.spacing();
        let mut out = [0i64; MAX_DIM];
        for axis in 0..MAX_DIM {
            let s = displacement[axis] / h;
            if axis >= grid.dim() {
                if displacement[axis] != 0.0 {
                    return Err(Error::precondition("shift has components beyond grid dimension"));
                }
                continue;
            }
            if (s - s.round()).abs() > 1e-9 {
                return Err(Error::precondition(format!(
                    "shift component {} is not a multiple of the spacing {h}",
                    displacement[axis]
                )));
            }
            out[axis] = s.round() as i64;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::fft_roundtrip;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane_wave(grid: Grid, modes: [i64; 3]) -> (ComplexField, Point) {
        let kf = std::f64::consts::PI / grid.half_width();
        let k = [modes[0] as f64 * kf, modes[1] as f64 * kf, modes[2] as f64 * kf];
        let f = ComplexField::from_fn(grid, move |x| {
            Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2])
        });
        (f, k)
    }

    fn max_diff(a: &ComplexField, b: &[Complex64]) -> f64 {
        a.values().iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn roundtrip_delta_and_plane_wave() {
        let grid = Grid::new(2, 16, 3.0).unwrap();
        let mut delta = ComplexField::zeros(grid);
        delta.values_mut()[grid.nearest_index(&[0.0; 3])] = Complex64::new(1.0, 0.0);
        let back = fft_roundtrip(&delta).unwrap();
        assert!(max_diff(&back, delta.values()) < 1e-12);

        let (pw, _) = plane_wave(grid, [3, -2, 0]);
        let back = fft_roundtrip(&pw).unwrap();
        assert!(max_diff(&back, pw.values()) < 1e-12);
    }

    #[test]
    fn roundtrip_random_field_relative() {
        let grid = Grid::new(3, 16, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let vals: Vec<Complex64> = (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let f = ComplexField::from_values(grid, vals).unwrap();
        let back = fft_roundtrip(&f).unwrap();
        let scale = f.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(max_diff(&back, f.values()) / scale < 1e-12);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let grid = Grid::new(2, 16, 1.0).unwrap();
        let f = ComplexField::from_fn(grid, |_| Complex64::new(2.5, -1.0));
        for g in f.gradient() {
            assert!(g.values().iter().all(|v| v.norm() < 1e-13));
        }
    }

    #[test]
    fn plane_wave_is_eigenfunction() {
        let grid = Grid::new(3, 16, 2.0).unwrap();
        let (f, k) = plane_wave(grid, [2, -3, 5]);
        let grad = f.gradient();
        for axis in 0..3 {
            let expected: Vec<_> =
                f.values().iter().map(|v| v * Complex64::new(0.0, k[axis])).collect();
            assert!(max_diff(&grad[axis], &expected) < 1e-11);
        }
        let k2 = k.iter().map(|v| v * v).sum::<f64>();
        let expected: Vec<_> = f.values().iter().map(|v| v * (-k2)).collect();
        assert!(max_diff(&f.laplacian(), &expected) < 1e-10);
    }

    #[test]
    fn gaussian_derivatives_match_analytic() {
        let grid = Grid::new(2, 64, 8.0).unwrap();
        let f = ComplexField::gaussian(grid, 1.0, 1.0, [0.0; 3], [0.0; 3]);
        let grad = f.gradient();
        let lap = f.laplacian();
        let mut err: f64 = 0.0;
        for i in 0..grid.len() {
            let x = grid.point(i);
            let g = (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp();
            err = err.max((grad[0].values()[i].re + x[0] * g).abs());
            err = err.max((grad[1].values()[i].re + x[1] * g).abs());
            let r2 = x[0] * x[0] + x[1] * x[1];
            err = err.max((lap.values()[i].re - (r2 - 2.0) * g).abs());
        }
        assert!(err < 1e-8, "max error {err}");
    }

    #[test]
    fn laplacian_is_sum_of_second_derivatives() {
        let grid = Grid::new(3, 16, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vals: Vec<Complex64> = (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let f = ComplexField::from_values(grid, vals).unwrap();
        let lap = f.laplacian();
        let parts = f.second_derivatives();
        let scale = lap.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        for i in 0..grid.len() {
            let s: Complex64 = parts.iter().map(|p| p.values()[i]).sum();
            assert!((s - lap.values()[i]).norm() <= 1e-13 * scale);
        }
        let hess = f.hessian();
        for i in 0..grid.len() {
            let tr: Complex64 = (0..3).map(|a| hess[a][a].values()[i]).sum();
            assert!((tr - lap.values()[i]).norm() <= 1e-13 * scale);
        }
    }

    #[test]
    fn roll_matches_translation() {
        let grid = Grid::new(1, 32, 4.0).unwrap();
        let f = ComplexField::gaussian(grid, 1.0, 0.3, [0.0; 3], [0.0; 3]);
        let shift = ComplexField::node_shift(&grid, &[1.25, 0.0, 0.0]).unwrap();
        assert_eq!(shift[0], 5);
        let g = f.roll(shift);
        let expected = ComplexField::gaussian(grid, 1.0, 0.3, [1.25, 0.0, 0.0], [0.0; 3]);
        assert!(max_diff(&g, expected.values()) < 1e-12);
        assert!(ComplexField::node_shift(&grid, &[0.1, 0.0, 0.0]).is_err());
    }

    #[test]
    fn rejects_non_finite_and_wrong_length() {
        let grid = Grid::new(1, 8, 1.0).unwrap();
        let mut v = vec![Complex64::new(0.0, 0.0); 8];
        v[3].re = f64::NAN;
        assert!(matches!(ComplexField::from_values(grid, v), Err(Error::NonFinite(_))));
        assert!(ComplexField::from_values(grid, vec![Complex64::new(0.0, 0.0); 9]).is_err());
    }
}
