use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Strichartz exponents attached to `(d, α)` in the intercritical window.
///
/// `gamma` has no closed form of its own; it is fixed by the scaling
/// relation `1/p + 1/γ = (d/2)(1 - 1/r - 1/2*)` and tagged as such in
/// `gamma_rule`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub dim: usize,
    pub alpha: f64,
    pub r: f64,
    pub q: f64,
    pub p: f64,
    pub eta: f64,
    pub gamma: f64,
    pub two_star: f64,
    pub gamma_rule: String,
}

/// Exact rational version of [`ExponentSet`], available when `α` is rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactExponents {
    pub dim: usize,
    pub alpha: Rational64,
    pub r: Rational64,
    pub q: Rational64,
    pub p: Rational64,
    pub eta: Rational64,
    pub gamma: Rational64,
    pub two_star: Rational64,
}

pub const GAMMA_RULE: &str = "derived-by-scaling";

fn window_check(dim: usize, alpha: f64) -> Result<()> {
    if dim < 3 {
        return Err(Error::OutsideIntercritical {
            dim,
            alpha,
            violated: "exponent set needs d >= 3 (finite Sobolev exponent 2*)".into(),
        });
    }
    let lower = 4.0 / dim as f64;
    let upper = 4.0 / (dim as f64 - 2.0);
    if !(alpha > lower && alpha < upper) {
        let which = if alpha <= lower {
            format!("4/d < alpha fails ({alpha} <= {lower})")
        } else {
            format!("alpha < 4/(d-2) fails ({alpha} >= {upper}, energy-critical or above)")
        };
        return Err(Error::OutsideIntercritical {
            dim,
            alpha,
            violated: format!("4/d < alpha < 4/(d-2) violated: {which}"),
        });
    }
    Ok(())
}

/// The `q` denominator `dα² - (d-2)α - 4` equals `(3α-4)(α+1)` in d = 3 and
/// is positive on the whole window there; for d ≥ 4 it changes sign inside
/// the window, and `γ` from the scaling relation can degenerate too.
fn positivity_check(dim: usize, alpha: f64, q_den: f64, inv_gamma: f64) -> Result<()> {
    if !(q_den > 0.0) {
        return Err(Error::precondition(format!(
            "q is undefined for d = {dim}, alpha = {alpha}: d*alpha^2 - (d-2)*alpha - 4 = {q_den} <= 0"
        )));
    }
    if !(inv_gamma > 0.0) {
        return Err(Error::precondition(format!(
            "gamma is undefined for d = {dim}, alpha = {alpha}: 1/gamma = {inv_gamma} <= 0"
        )));
    }
    Ok(())
}

fn to_f64(x: Rational64) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

pub fn compute_exponents_exact(dim: usize, alpha: Rational64) -> Result<ExactExponents> {
    window_check(dim, *alpha.numer() as f64 / *alpha.denom() as f64)?;
    let one = Rational64::from_integer(1);
    let two = Rational64::from_integer(2);
    let four = Rational64::from_integer(4);
    let d = Rational64::from_integer(dim as i64);

    let r = alpha + two;
    let q_den = d * alpha * alpha - (d - two) * alpha - four;
    let p = two * (alpha + two) / (four - (d - two) * alpha);
    let two_star = two * d / (d - two);
    let eta = one / (one - one / two_star);
    let inv_gamma = d / two * (one - one / r - one / two_star) - one / p;
    positivity_check(dim, to_f64(alpha), to_f64(q_den), to_f64(inv_gamma))?;
    let q = two * alpha * (alpha + two) / q_den;
    let gamma = one / inv_gamma;

    Ok(ExactExponents {
        dim,
        alpha,
        r,
        q,
        p,
        eta,
        gamma,
        two_star,
    })
}

pub fn compute_exponents(dim: usize, alpha: f64) -> Result<ExponentSet> {
    window_check(dim, alpha)?;
    let d = dim as f64;
    let r = alpha + 2.0;
    let q_den = d * alpha * alpha - (d - 2.0) * alpha - 4.0;
    let p = 2.0 * (alpha + 2.0) / (4.0 - (d - 2.0) * alpha);
    let two_star = 2.0 * d / (d - 2.0);
    let eta = 1.0 / (1.0 - 1.0 / two_star);
    let inv_gamma = d / 2.0 * (1.0 - 1.0 / r - 1.0 / two_star) - 1.0 / p;
    positivity_check(dim, alpha, q_den, inv_gamma)?;
    let q = 2.0 * alpha * (alpha + 2.0) / q_den;
    let gamma = 1.0 / inv_gamma;
    Ok(ExponentSet {
        dim,
        alpha,
        r,
        q,
        p,
        eta,
        gamma,
        two_star,
        gamma_rule: GAMMA_RULE.into(),
    })
}

impl ExactExponents {
    pub fn to_f64(&self) -> ExponentSet {
        let f = to_f64;
        ExponentSet {
            dim: self.dim,
            alpha: f(self.alpha),
            r: f(self.r),
            q: f(self.q),
            p: f(self.p),
            eta: f(self.eta),
            gamma: f(self.gamma),
            two_star: f(self.two_star),
            gamma_rule: GAMMA_RULE.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rat(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn cubic_in_three_dimensions() {
        let e = compute_exponents_exact(3, rat(2, 1)).unwrap();
        assert_eq!(e.r, rat(4, 1));
        assert_eq!(e.q, rat(8, 3));
        assert_eq!(e.p, rat(4, 1));
        assert_eq!(e.two_star, rat(6, 1));
        assert_eq!(e.eta, rat(6, 5));
        assert_eq!(e.gamma, rat(8, 5));
        let f = compute_exponents(3, 2.0).unwrap();
        assert!((f.q - 8.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.gamma_rule, GAMMA_RULE);
    }

    #[test]
    fn quartic_in_three_dimensions() {
        let e = compute_exponents_exact(3, rat(3, 1)).unwrap();
        assert_eq!((e.r, e.q, e.p), (rat(5, 1), rat(3, 2), rat(10, 1)));
    }

    #[test]
    fn degenerate_q_in_four_dimensions_is_rejected() {
        // 4*(1.1)^2 - 2*1.1 - 4 < 0 although 1 < 1.1 < 2.
        assert!(compute_exponents(4, 1.1).is_err());
        assert!(compute_exponents(4, 1.6).is_ok());
    }

    #[test]
    fn energy_critical_is_rejected() {
        let err = compute_exponents(3, 4.0).unwrap_err();
        assert!(err.to_string().contains("4/(d-2)"), "{err}");
        assert!(compute_exponents(3, 4.0 / 3.0).is_err());
        assert!(compute_exponents(2, 3.0).is_err());
    }

    proptest! {
        #[test]
        fn identities_hold_exactly(num in 1i64..200, dim in 3usize..7) {
            // alpha = 4/d + num/(200 d (d-2)) stays strictly inside (4/d, 4/(d-2)).
            let d = dim as i64;
            let alpha = rat(4, d) + rat(num, 201 * d * (d - 2)) * rat(8, 1);
            prop_assume!(alpha < rat(4, d - 2));
            let e = match compute_exponents_exact(dim, alpha) {
                Ok(e) => e,
                Err(err) => {
                    // Only possible where the q formula degenerates (d >= 4).
                    prop_assert!(dim >= 4, "{}", err);
                    prop_assert!(matches!(err, Error::Precondition(_)));
                    return Ok(());
                }
            };
            let one = rat(1, 1);
            prop_assert_eq!(one / e.two_star + one / e.eta, one);
            prop_assert_eq!(rat(2, d) + one / e.two_star, one / e.eta);
            prop_assert_eq!(rat(2, d) + rat(2, 1) / e.two_star, one);
            prop_assert_eq!(e.r, alpha + rat(2, 1));
            for v in [e.r, e.q, e.p, e.eta, e.gamma, e.two_star] {
                prop_assert!(v > one);
            }
        }
    }
}
