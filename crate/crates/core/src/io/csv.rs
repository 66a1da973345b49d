//! CSV tables. Every float is written as `{:.16e}` (17 significant digits),
//! which round-trips `f64` exactly.

use std::fmt::Write as _;

use crate::morawetz::VirialRecord;

pub const TIMESERIES_HEADER: &str =
    "t,mass,energy,z,z_prime,z_second,term_hessian,term_nl,term_potential,term_bilap,linf,h1,tail";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A table of floats under a fixed header.
pub fn table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Time series: one row per virial record, with the matching boundary tail.
pub fn timeseries(records: &[VirialRecord], tails: &[f64]) -> String {
    let mut out = String::with_capacity(TIMESERIES_HEADER.len() + 1 + records.len() * 13 * 24);
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for (r, tail) in records.iter().zip(tails) {
        let vals = [
            r.time,
            r.mass,
            r.energy,
            r.z,
            r.z_prime,
            r.z_second,
            r.terms.hessian,
            r.terms.nonlinear,
            r.terms.potential,
            r.terms.bilaplacian,
            r.linf,
            r.h1,
            *tail,
        ];
        for (i, v) in vals.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn table_layout() {
        let t = table(&["a", "b"], &[vec![1.0, 2.0]]);
        assert_eq!(t, "a,b\n1.0000000000000000e0,2.0000000000000000e0\n");
    }
}
