use serde::{Deserialize, Serialize};

use crate::spectral::{mass, ComplexField, Snapshot};
use crate::{par, Complex64, Error, Result};

/// Pull-backs `ψ(t) = exp(-itΔ) u(t)` and their pairwise `H¹` distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterProbe {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub pullbacks: Vec<ComplexField>,
    /// `cauchy[i][j] = ‖ψ(tᵢ) - ψ(tⱼ)‖_{H¹}`
    pub cauchy: Vec<Vec<f64>>,
    /// `|‖ψ(t)‖₂ - ‖u(t)‖₂|` per time.
    pub mass_defect: Vec<f64>,
}

impl ScatterProbe {
    /// `‖ψ(tᵢ₊₁) - ψ(tᵢ)‖_{H¹}`
    pub fn increments(&self) -> Vec<f64> {
        (1..self.times.len()).map(|i| self.cauchy[i - 1][i]).collect()
    }

    pub fn increments_strictly_decreasing(&self) -> bool {
        self.increments().windows(2).all(|w| w[1] < w[0])
    }
}

fn h1_weighted_distance(grid: &crate::Grid, a: &[Complex64], b: &[Complex64]) -> f64 {
    let s = par::sum_range(a.len(), |i| (1.0 + grid.k_squared(i)) * (a[i] - b[i]).norm_sqr());
    (s * grid.cell_volume() / grid.len() as f64).sqrt()
}

/// `‖a - b‖_{H¹}` with the weight `(1+|k|²)` applied in Fourier space.
pub fn h1_distance(a: &ComplexField, b: &ComplexField) -> Result<f64> {
    a.ensure_same_grid(b)?;
    Ok(h1_weighted_distance(a.grid(), &a.to_fourier(), &b.to_fourier()))
}

/// Pulls the run back to `t = 0` at each requested time. Every time must
/// coincide with a stored snapshot.
pub fn pullback(run: &[Snapshot], times: &[f64]) -> Result<ScatterProbe> {
    let Some(last) = run.last() else {
        return Err(Error::precondition("empty run"));
    };
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::precondition("probe times must be strictly increasing"));
    }
    let mut picked = Vec::with_capacity(times.len());
    for &t in times {
        if t > last.time * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::HorizonExceeded {
                requested: t,
                horizon: last.time,
            });
        }
        let snap = run
            .iter()
            .find(|s| (s.time - t).abs() <= 1e-9 * t.abs().max(1.0))
            .ok_or_else(|| Error::precondition(format!("no snapshot stored at t = {t}")))?;
        picked.push(snap);
    }
    let grid = *last.field.grid();
    let hats: Vec<Vec<Complex64>> = picked
        .iter()
        .map(|s| {
            s.field.ensure_same_grid(&last.field)?;
            let mut hat = s.field.to_fourier();
            let t = s.time;
            // undo exp(-i|k|²t)
            par::for_each_indexed(&mut hat, |i, v| *v *= Complex64::from_polar(1.0, grid.k_squared(i) * t));
            Ok(hat)
        })
        .collect::<Result<_>>()?;
    let m = hats.len();
    let mut cauchy = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let d = h1_weighted_distance(&grid, &hats[i], &hats[j]);
            cauchy[i][j] = d;
            cauchy[j][i] = d;
        }
    }
    let pullbacks = hats
        .into_iter()
        .map(|h| ComplexField::from_fourier(grid, h))
        .collect::<Result<Vec<_>>>()?;
    let mass_defect = pullbacks
        .iter()
        .zip(&picked)
        .map(|(p, s)| (mass(p).sqrt() - mass(&s.field).sqrt()).abs())
        .collect();
    Ok(ScatterProbe {
        times: picked.iter().map(|s| s.time).collect(),
        pullbacks,
        cauchy,
        mass_defect,
    })
}
