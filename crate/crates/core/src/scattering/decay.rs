use serde::{Deserialize, Serialize};

use crate::potential::PotentialSpec;
use crate::propagator::{free_flow, step_count, Stepper};
use crate::spectral::{lp_norm, ComplexField};
use crate::{Error, Result};

/// `t^{d/2} ‖u(t)‖_∞` over the samples with `t ≥ t_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    pub dim: usize,
    pub t_min: f64,
    pub times: Vec<f64>,
    pub normalized: Vec<f64>,
    pub max: f64,
    pub median: f64,
    /// `max / median`
    pub ratio: f64,
}

/// Samples before `t_min` are dropped; `t_min` itself must be positive.
pub fn dispersive_decay(times: &[f64], sups: &[f64], dim: usize, t_min: f64) -> Result<DecaySeries> {
    if times.len() != sups.len() {
        return Err(Error::SizeMismatch {
            expected: times.len(),
            actual: sups.len(),
        });
    }
    if !(t_min > 0.0) {
        return Err(Error::precondition(format!("t_min = {t_min} must be positive")));
    }
    let half_d = dim as f64 / 2.0;
    let (times, normalized): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(sups)
        .filter(|(&t, _)| t >= t_min)
        .map(|(&t, &s)| (t, t.powf(half_d) * s))
        .unzip();
    if normalized.is_empty() {
        return Err(Error::precondition(format!("no samples at or after t_min = {t_min}")));
    }
    let mut sorted = normalized.clone();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    let median = if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    };
    let max = sorted[k - 1];
    Ok(DecaySeries {
        dim,
        t_min,
        times,
        normalized,
        max,
        median,
        ratio: max / median,
    })
}

/// `‖exp(-it(-Δ+V)) u₀‖_∞` at each of the increasing `times`, without storing
/// the fields. The free flow is applied exactly; with a potential each time
/// must be a whole number of `dt` steps.
pub fn linear_sup_series(
    u0: &ComplexField,
    potential: Option<&PotentialSpec>,
    times: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::precondition("sample times must be nonnegative and increasing"));
    }
    let spec = potential.filter(|s| !s.is_zero());
    let Some(spec) = spec else {
        return times.iter().map(|&t| lp_norm(&free_flow(u0, t), f64::INFINITY)).collect();
    };
    let stepper = Stepper::new(*u0.grid(), Some(spec), 1.0, 0.0, dt);
    let mut u = u0.clone();
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t > now {
            stepper.advance(&mut u, step_count(t - now, dt)?)?;
            now = t;
        }
        out.push(lp_norm(&u, f64::INFINITY)?);
    }
    Ok(out)
}
