//! The C^∞ transition `g(s) = h(2-s) / (h(2-s) + h(s-1))`, `h(t) = e^{-1/t}`
//! for `t > 0`, with derivatives up to order 4.

use serde::{Deserialize, Serialize};

/// Highest derivative order the weight needs (for `Δ²χ`).
pub const ORDER: usize = 4;

/// `[f, f', f'', f''', f'''']` at a point.
pub type Derivs = [f64; ORDER + 1];

/// `h^{(k)}(t) = h(t) P_k(1/t)` with `P_{k+1}(u) = u²(P_k(u) - P_k'(u))`.
fn h_derivs(t: f64) -> Derivs {
    if t <= 0.0 {
        return [0.0; ORDER + 1];
    }
    let u = 1.0 / t;
    let h = (-u).exp();
    if h == 0.0 {
        return [0.0; ORDER + 1];
    }
    let u2 = u * u;
    let u3 = u2 * u;
    let u4 = u2 * u2;
    [
        h,
        h * u2,
        h * (u4 - 2.0 * u3),
        h * (u4 * u2 - 6.0 * u4 * u + 6.0 * u4),
        h * (u4 * u4 - 12.0 * u4 * u3 + 36.0 * u4 * u2 - 24.0 * u4 * u),
    ]
}

const FACTORIAL: [f64; ORDER + 1] = [1.0, 1.0, 2.0, 6.0, 24.0];

fn to_taylor(d: &Derivs) -> Derivs {
    let mut t = *d;
    for (v, f) in t.iter_mut().zip(FACTORIAL) {
        *v /= f;
    }
    t
}

fn from_taylor(t: &Derivs) -> Derivs {
    let mut d = *t;
    for (v, f) in d.iter_mut().zip(FACTORIAL) {
        *v *= f;
    }
    d
}

/// Smooth step from 1 (`s ≤ 1`) to 0 (`s ≥ 2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Cutoff;

impl Cutoff {
    pub fn value(&self, s: f64) -> f64 {
        self.derivs(s)[0]
    }

    /// `g` and its first four derivatives at `s`.
    pub fn derivs(&self, s: f64) -> Derivs {
        if s <= 1.0 {
            return [1.0, 0.0, 0.0, 0.0, 0.0];
        }
        if s >= 2.0 {
            return [0.0; ORDER + 1];
        }
        // a(s) = h(2-s): odd derivatives flip sign.
        let mut a = h_derivs(2.0 - s);
        a[1] = -a[1];
        a[3] = -a[3];
        let b = h_derivs(s - 1.0);
        let a = to_taylor(&a);
        let mut sum = [0.0; ORDER + 1];
        for k in 0..=ORDER {
            sum[k] = a[k] + to_taylor(&b)[k];
        }
        // Taylor division q = a / sum.
        let mut q = [0.0; ORDER + 1];
        for k in 0..=ORDER {
            let mut acc = a[k];
            for j in 1..=k {
                acc -= sum[j] * q[k - j];
            }
            q[k] = acc / sum[0];
        }
        from_taylor(&q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_values_and_symmetry() {
        let g = Cutoff;
        assert_eq!(g.derivs(0.3), [1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(g.derivs(2.5), [0.0; 5]);
        assert!((g.value(1.5) - 0.5).abs() < 1e-15);
        for s in [1.1, 1.3, 1.45] {
            assert!((g.value(s) + g.value(3.0 - s) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn monotone_between_zero_and_one() {
        let g = Cutoff;
        let mut prev = 1.0;
        for i in 0..=1000 {
            let s = 1.0 + i as f64 / 1000.0;
            let d = g.derivs(s);
            assert!((0.0..=1.0).contains(&d[0]));
            assert!(d[1] <= 0.0);
            assert!(d[0] <= prev);
            prev = d[0];
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let g = Cutoff;
        let h = 1e-5;
        for i in 1..40 {
            let s = 1.0 + i as f64 / 40.0;
            let d = g.derivs(s);
            let dp = g.derivs(s + h);
            let dm = g.derivs(s - h);
            for k in 0..ORDER {
                let fd = (dp[k] - dm[k]) / (2.0 * h);
                let scale = d[k + 1].abs().max(1.0);
                assert!((fd - d[k + 1]).abs() < 1e-5 * scale, "order {} at s = {s}: {fd} vs {}", k + 1, d[k + 1]);
            }
        }
    }

    #[test]
    fn derivatives_vanish_at_the_ends() {
        let g = Cutoff;
        for s in [1.0 + 1e-3, 2.0 - 1e-3] {
            for v in &g.derivs(s)[1..] {
                assert!(v.abs() < 1e-100, "{v}");
            }
        }
    }
}
