use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::linalg::{Point, MAX_DIM, ZERO};
use crate::{Error, Result};

/// Uniform periodic grid on the box `[-L, L)^d`.
///
/// Nodes sit at `-L + j h`, `h = 2L/n`, so the origin is always a node and
/// the node set is symmetric about it up to the single node at `-L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n = {n} must be a power of two and at least 8"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half width {half_width} must be positive and finite"
            )));
        }
        Ok(Grid { dim, n, half_width })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Total node count `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    /// Angular wavenumber of FFT bin `j` (standard FFT ordering).
    pub fn wavenumber(&self, j: usize) -> f64 {
        let signed = if j < self.n / 2 {
            j as f64
        } else {
            j as f64 - self.n as f64
        };
        PI / self.half_width * signed
    }

    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.n / 2
    }

    pub fn axis_coordinates(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.coordinate(j)).collect()
    }

    pub fn axis_wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.wavenumber(j)).collect()
    }

    /// Row-major multi-index; axis 0 varies slowest.
    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for axis in (0..self.dim).rev() {
            out[axis] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize; MAX_DIM]) -> usize {
        (0..self.dim).fold(0, |acc, axis| acc * self.n + multi[axis])
    }

    pub fn point(&self, idx: usize) -> Point {
        let m = self.multi_index(idx);
        let mut p = ZERO;
        for axis in 0..self.dim {
            p[axis] = self.coordinate(m[axis]);
        }
        p
    }

    pub fn points(&self) -> Vec<Point> {
        crate::par::map_range(self.len(), |i| self.point(i))
    }

    pub fn k_vector(&self, idx: usize) -> Point {
        let m = self.multi_index(idx);
        let mut k = ZERO;
        for axis in 0..self.dim {
            k[axis] = self.wavenumber(m[axis]);
        }
        k
    }

    pub fn k_squared(&self, idx: usize) -> f64 {
        let k = self.k_vector(idx);
        k.iter().map(|v| v * v).sum()
    }

    /// Node index of the grid point nearest to `x` (periodically wrapped).
    pub fn nearest_index(&self, x: &Point) -> usize {
        let h = self.spacing();
        let mut m = [0; MAX_DIM];
        for axis in 0..self.dim {
            let j = ((x[axis] + self.half_width) / h).round() as i64;
            m[axis] = j.rem_euclid(self.n as i64) as usize;
        }
        self.flat_index(&m)
    }

    /// Same box, doubled half width and node count (identical spacing).
    pub fn doubled(&self) -> Grid {
        Grid {
            dim: self.dim,
            n: self.n * 2,
            half_width: self.half_width * 2.0,
        }
    }
}
