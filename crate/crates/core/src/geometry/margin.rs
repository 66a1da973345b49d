use serde::{Deserialize, Serialize};

use crate::fit::loglog_slope;
use crate::linalg::{self, Point};
use crate::potential::{CurvatureReport, PotentialSpec};
use crate::{par, Error, Result};

/// `x·n ≥ -STAR_TOLERANCE` counts as star-shaped.
pub const STAR_TOLERANCE: f64 = 1e-10;

/// Centers further than this from the x₁-axis are rejected.
const AXIS_TOLERANCE: f64 = 1e-12;

/// `(unit(x-𝐜) + unit(x+𝐜))·n` with `𝐜 = c e₁`.
///
/// The first component of the bracket is a difference of two numbers close
/// to ±1; for `|x₁| < c` it is evaluated in a cancellation-free form so that
/// margins of size `c⁻⁴` keep their relative accuracy.
pub fn margin_at(x: &Point, n: &Point, c: f64) -> Result<f64> {
    let rho2 = x[1] * x[1] + x[2] * x[2];
    let dm = ((x[0] - c).powi(2) + rho2).sqrt();
    let dp = ((x[0] + c).powi(2) + rho2).sqrt();
    if dm == 0.0 || dp == 0.0 {
        return Err(Error::precondition(format!("sample {x:?} coincides with ±{c}e₁")));
    }
    let first = if x[0].abs() < c {
        // g(t) = 1/sqrt(1+t²); first = g(a) - g(b), a = ρ/(c+x₁), b = ρ/(c-x₁)
        let (cp, cm) = (c + x[0], c - x[0]);
        let a2 = rho2 / (cp * cp);
        let b2 = rho2 / (cm * cm);
        let diff = rho2 * 4.0 * c * x[0] / (cp * cp * cm * cm);
        let ga = 1.0 / (1.0 + a2).sqrt();
        let gb = 1.0 / (1.0 + b2).sqrt();
        diff / ((1.0 + a2) * (1.0 + b2) * (ga + gb))
    } else {
        (x[0] - c) / dm + (x[0] + c) / dp
    };
    let s = 1.0 / dm + 1.0 / dp;
    Ok(first * n[0] + s * (x[1] * n[1] + x[2] * n[2]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSample {
    pub point: Point,
    pub normal: Point,
    pub margin: f64,
    pub star_shaped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub c: f64,
    /// Radius of the smallest origin-centred ball holding every sample.
    pub r: f64,
    pub samples: Vec<MarginSample>,
    pub min_margin: f64,
    /// `None` when every sample is star-shaped.
    pub min_margin_nonstar: Option<f64>,
}

fn enclosing_radius(reports: &[CurvatureReport]) -> f64 {
    reports
        .iter()
        .flat_map(|r| r.samples.iter())
        .map(|s| linalg::norm(&s.point))
        .fold(0.0, f64::max)
}

fn check_axis(spec: &PotentialSpec) -> Result<()> {
    for (i, t) in spec.terms().iter().enumerate() {
        let off = t.center[1].hypot(t.center[2]);
        if off > AXIS_TOLERANCE {
            return Err(Error::precondition(format!(
                "center {i} is {off:e} away from the x₁-axis; the trapped ray must lie on it"
            )));
        }
    }
    Ok(())
}

/// Margins of the level surfaces in `reports` against the weight centred at
/// `±c e₁`.
pub fn lemma_margin(spec: &PotentialSpec, reports: &[CurvatureReport], c: f64) -> Result<MarginReport> {
    if reports.is_empty() {
        return Err(Error::precondition("no surfaces given"));
    }
    check_axis(spec)?;
    let r = enclosing_radius(reports);
    if !(c > 4.0 * r) {
        return Err(Error::precondition(format!("need R < c/4, got R = {r}, c = {c}")));
    }
    let all: Vec<_> = reports.iter().flat_map(|r| r.samples.iter()).collect();
    let samples = par::map_slice(&all, |s| -> Result<MarginSample> {
        Ok(MarginSample {
            point: s.point,
            normal: s.normal,
            margin: margin_at(&s.point, &s.normal, c)?,
            star_shaped: linalg::dot(&s.point, &s.normal) >= -STAR_TOLERANCE,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    if let Some(bad) = samples.iter().find(|s| !s.margin.is_finite()) {
        return Err(Error::NonFinite(if bad.star_shaped { "margin" } else { "non-star-shaped margin" }));
    }
    let min_margin = samples.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
    let min_margin_nonstar = samples
        .iter()
        .filter(|s| !s.star_shaped)
        .map(|s| s.margin)
        .min_by(f64::total_cmp);
    Ok(MarginReport {
        c,
        r,
        samples,
        min_margin,
        min_margin_nonstar,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "slope", rename_all = "snake_case")]
pub enum ScalingVerdict {
    /// Fewer than two rungs have a negative minimum.
    NonnegativeAtAllRungs,
    Slope(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginScaling {
    pub c_ladder: Vec<f64>,
    pub min_margins: Vec<f64>,
    pub min_margins_nonstar: Vec<Option<f64>>,
    pub verdict: ScalingVerdict,
}

impl MarginScaling {
    /// Negative parts decay at least like `c^{-3.5}`, or there are none.
    pub fn compliant(&self) -> bool {
        match self.verdict {
            ScalingVerdict::NonnegativeAtAllRungs => true,
            ScalingVerdict::Slope(s) => s <= -3.5,
        }
    }
}

fn check_doubling(c_ladder: &[f64]) -> Result<()> {
    if c_ladder.len() < 4 {
        return Err(Error::precondition(format!("need at least 4 rungs, got {}", c_ladder.len())));
    }
    for w in c_ladder.windows(2) {
        if ((w[1] / w[0]) - 2.0).abs() > 1e-12 {
            return Err(Error::precondition(format!("ladder must double: {} -> {}", w[0], w[1])));
        }
    }
    Ok(())
}

/// Minimum margins along a doubling ladder of `c`, with the log-log slope of
/// the negative parts.
pub fn margin_scaling(spec: &PotentialSpec, reports: &[CurvatureReport], c_ladder: &[f64]) -> Result<MarginScaling> {
    check_doubling(c_ladder)?;
    let rungs = c_ladder
        .iter()
        .map(|&c| lemma_margin(spec, reports, c))
        .collect::<Result<Vec<_>>>()?;
    let min_margins: Vec<f64> = rungs.iter().map(|r| r.min_margin).collect();
    let (cs, neg): (Vec<f64>, Vec<f64>) = c_ladder
        .iter()
        .zip(&min_margins)
        .filter(|(_, &m)| m < 0.0)
        .map(|(&c, &m)| (c, -m))
        .unzip();
    let verdict = if neg.len() < 2 {
        ScalingVerdict::NonnegativeAtAllRungs
    } else {
        ScalingVerdict::Slope(loglog_slope(&cs, &neg).ok_or(Error::NonFinite("margin slope"))?)
    };
    Ok(MarginScaling {
        c_ladder: c_ladder.to_vec(),
        min_margins,
        min_margins_nonstar: rungs.iter().map(|r| r.min_margin_nonstar).collect(),
        verdict,
    })
}

/// `|x+𝐜| - (c + x₁ + |x̃|²/(2c))`, evaluated without cancellation.
pub fn expansion_remainder(x: &Point, c: f64) -> f64 {
    let rho2 = x[1] * x[1] + x[2] * x[2];
    let cp = c + x[0];
    let b = (cp * cp + rho2).sqrt();
    // |x+𝐜| - (c+x₁) = ρ²/(|x+𝐜| + c + x₁)
    rho2 / (b + cp) - rho2 / (2.0 * c)
}

/// `|x+𝐜| - (c + x₁ + |x̃|²/(2(c+x₁)))`; the expansion centred on the
/// shifted abscissa, whose remainder is `O(|x̃|⁴/c³)`.
fn shifted_remainder(x: &Point, c: f64) -> f64 {
    let rho2 = x[1] * x[1] + x[2] * x[2];
    let cp = c + x[0];
    let b = (cp * cp + rho2).sqrt();
    -rho2 * rho2 / (2.0 * cp * (b + cp) * (b + cp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub r: f64,
    pub c_ladder: Vec<f64>,
    /// Max `|remainder|` over the samples at each rung.
    pub remainders: Vec<f64>,
    pub slope: Option<f64>,
    /// Same for the expansion in `|x̃|²/(2(c+x₁))`.
    pub shifted_remainders: Vec<f64>,
    pub shifted_slope: Option<f64>,
}

impl ExpansionReport {
    /// `log₂` of successive remainder ratios.
    pub fn doubling_exponents(&self) -> Vec<f64> {
        self.remainders.windows(2).map(|w| (w[1] / w[0]).log2()).collect()
    }
}

pub fn expansion_check(c_ladder: &[f64], r: f64, samples: &[Point]) -> Result<ExpansionReport> {
    if c_ladder.is_empty() || samples.is_empty() {
        return Err(Error::precondition("empty ladder or sample set"));
    }
    for &c in c_ladder {
        if !(r < c / 2.0) {
            return Err(Error::precondition(format!("need R < c/2, got R = {r}, c = {c}")));
        }
    }
    if let Some(x) = samples.iter().find(|x| linalg::norm(x) > r) {
        return Err(Error::precondition(format!("sample {x:?} lies outside B(0, {r})")));
    }
    let max_over = |f: fn(&Point, f64) -> f64, c: f64| samples.iter().map(|x| f(x, c).abs()).fold(0.0, f64::max);
    let remainders: Vec<f64> = c_ladder.iter().map(|&c| max_over(expansion_remainder, c)).collect();
    let shifted_remainders: Vec<f64> = c_ladder.iter().map(|&c| max_over(shifted_remainder, c)).collect();
    Ok(ExpansionReport {
        r,
        c_ladder: c_ladder.to_vec(),
        slope: loglog_slope(c_ladder, &remainders),
        shifted_slope: loglog_slope(c_ladder, &shifted_remainders),
        remainders,
        shifted_remainders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{level_surface_sample, GaussianTerm};

    fn direct(x: &Point, n: &Point, c: f64) -> f64 {
        let e = [c, 0.0, 0.0];
        let um = linalg::unit(&linalg::sub(x, &e)).unwrap();
        let up = linalg::unit(&linalg::add(x, &e)).unwrap();
        linalg::dot(&linalg::add(&um, &up), n)
    }

    fn unit_spheres() -> (PotentialSpec, Vec<CurvatureReport>) {
        let spec = PotentialSpec::symmetric_pair(3, 3.0, 1.0, 1.0, 2.0).unwrap();
        let level = (-1.0f64).exp();
        let reports = (0..2).map(|i| level_surface_sample(&spec, i, level, 2000).unwrap()).collect();
        (spec, reports)
    }

    #[test]
    fn facing_point_has_zero_margin() {
        for c in [32.0, 100.0, 256.0] {
            assert_eq!(margin_at(&[2.0, 0.0, 0.0], &[-1.0, 0.0, 0.0], c).unwrap(), 0.0);
            assert_eq!(margin_at(&[-2.0, 0.0, 0.0], &[1.0, 0.0, 0.0], c).unwrap(), 0.0);
        }
    }

    #[test]
    fn top_point_margin() {
        let c = 40.0;
        let x = [3.0, 1.0, 0.0];
        let m = margin_at(&x, &[0.0, 1.0, 0.0], c).unwrap();
        let expect = 1.0 / linalg::norm(&[3.0 - c, 1.0, 0.0]) + 1.0 / linalg::norm(&[3.0 + c, 1.0, 0.0]);
        assert!((m - expect).abs() < 1e-16 && m > 0.0);
    }

    #[test]
    fn cap_point_value() {
        let x = [2.4, 0.8, 0.0];
        let n = [-0.6, 0.8, 0.0];
        let m = margin_at(&x, &n, 100.0).unwrap();
        assert!((m - 0.012805120903633116).abs() < 1e-15, "{m}");
        assert!((m - direct(&x, &n, 100.0)).abs() < 1e-15);
    }

    #[test]
    fn stable_form_matches_direct() {
        for (x, n) in [
            ([1.3, -0.4, 0.9], [0.2, 0.5, -0.3]),
            ([-2.0, 0.1, 0.0], [0.0, 1.0, 0.0]),
            ([0.0, 1.0, 1.0], [1.0, 0.0, 0.0]),
        ] {
            for c in [5.0, 50.0] {
                assert!((margin_at(&x, &n, c).unwrap() - direct(&x, &n, c)).abs() < 1e-14);
            }
        }
        // beyond the weight centres the direct form is used
        let x = [12.0, 1.0, 0.0];
        assert_eq!(margin_at(&x, &[1.0, 0.0, 0.0], 10.0).unwrap(), direct(&x, &[1.0, 0.0, 0.0], 10.0));
        assert!(margin_at(&[10.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 10.0).is_err());
    }

    #[test]
    fn reflection_invariance() {
        let c = 64.0;
        for (x, n) in [([2.5, 0.7, -0.3], [-0.4, 0.8, 0.1]), ([-3.2, 0.2, 0.9], [0.3, -0.1, 0.9])] {
            let xr = [x[0], -x[1], -x[2]];
            let nr = [n[0], -n[1], -n[2]];
            assert_eq!(margin_at(&x, &n, c).unwrap(), margin_at(&xr, &nr, c).unwrap());
        }
    }

    #[test]
    fn unit_spheres_report() {
        let (spec, reports) = unit_spheres();
        let rep = lemma_margin(&spec, &reports, 64.0).unwrap();
        assert!((rep.r - 4.0).abs() < 1e-12);
        assert_eq!(rep.samples.len(), 4000);
        for s in &rep.samples {
            assert!(s.margin.is_finite());
            assert_eq!(s.star_shaped, linalg::dot(&s.point, &s.normal) >= -STAR_TOLERANCE);
        }
        assert!(rep.min_margin_nonstar.is_some());
        // product of distances stays of order c²
        for s in &rep.samples {
            let e = [64.0, 0.0, 0.0];
            let prod = linalg::norm(&linalg::sub(&s.point, &e)) * linalg::norm(&linalg::add(&s.point, &e));
            assert!(prod >= (64.0 - rep.r).powi(2));
        }
    }

    #[test]
    fn scaling_ladder() {
        let (spec, reports) = unit_spheres();
        let sc = margin_scaling(&spec, &reports, &[32.0, 64.0, 128.0, 256.0]).unwrap();
        assert!(sc.compliant(), "{sc:?}");
        assert!(sc.min_margins.iter().all(|m| *m >= -1e-12));
    }

    #[test]
    fn centred_sphere_is_nonnegative() {
        let spec = PotentialSpec::new(3, vec![GaussianTerm::new(linalg::ZERO, 1.0, 1.0)], 2.0).unwrap();
        let reports = vec![level_surface_sample(&spec, 0, 0.5, 500).unwrap()];
        let sc = margin_scaling(&spec, &reports, &[8.0, 16.0, 32.0, 64.0]).unwrap();
        assert_eq!(sc.verdict, ScalingVerdict::NonnegativeAtAllRungs);
        assert!(sc.min_margins.iter().all(|m| *m >= 0.0));
        assert!(sc.min_margins_nonstar.iter().all(Option::is_none));
    }

    #[test]
    fn preconditions() {
        let (spec, reports) = unit_spheres();
        assert!(lemma_margin(&spec, &reports, 16.0).is_err());
        assert!(margin_scaling(&spec, &reports, &[32.0, 64.0, 128.0]).is_err());
        assert!(margin_scaling(&spec, &reports, &[32.0, 64.0, 100.0, 200.0]).is_err());
        let tilted = PotentialSpec::new(
            3,
            vec![GaussianTerm::new([-3.0, 0.5, 0.0], 1.0, 1.0), GaussianTerm::new([3.0, -0.5, 0.0], 1.0, 1.0)],
            2.0,
        )
        .unwrap();
        assert!(lemma_margin(&tilted, &reports, 64.0).is_err());
    }

    #[test]
    fn expansion_on_axis_and_origin() {
        assert_eq!(expansion_remainder(&[0.0; 3], 10.0), 0.0);
        for x1 in [-3.0, -0.5, 2.0, 3.9] {
            assert_eq!(expansion_remainder(&[x1, 0.0, 0.0], 10.0), 0.0);
        }
        let x = [1.0, 0.5, -0.5];
        let direct = linalg::norm(&[x[0] + 10.0, x[1], x[2]]) - (10.0 + x[0] + 0.5 / 20.0);
        assert!((expansion_remainder(&x, 10.0) - direct).abs() < 1e-14);
    }

    #[test]
    fn expansion_ladder() {
        let r = 4.0;
        let samples: Vec<Point> = crate::potential::sphere_directions(3, 400)
            .iter()
            .flat_map(|d| [0.5, 0.99].map(|s| linalg::scale(d, s * r)))
            .collect();
        let rep = expansion_check(&[32.0, 64.0, 128.0, 256.0], r, &samples).unwrap();
        // the stated expansion misses the x₁|x̃|²/(2c²) term, so it decays like c⁻²
        assert!((rep.slope.unwrap() + 2.0).abs() < 0.05, "{rep:?}");
        assert!((rep.shifted_slope.unwrap() + 3.0).abs() < 0.05, "{rep:?}");
        assert!(expansion_check(&[8.0], 4.0, &samples).is_err());
    }
}
