//! Least-squares slopes for convergence and scaling ladders.

/// Slope of the least-squares line through `(ln x, ln y)`.
///
/// Returns `None` with fewer than two points or any non-positive value.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Convergence order from errors measured on a step-size ladder.
///
/// Equivalent to the log-log slope of error against step size.
pub fn convergence_order(steps: &[f64], errors: &[f64]) -> Option<f64> {
    loglog_slope(steps, errors)
}
