//! Exact binomial tails, summed term by term in log space.

use std::sync::OnceLock;

use crate::error::{check_probability, Error, Result};

const TABLE_LEN: usize = 4096;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(TABLE_LEN);
        let mut acc = 0.0;
        table.push(0.0);
        for i in 1..TABLE_LEN {
            acc += (i as f64).ln();
            table.push(acc);
        }
        table
    })
}

/// `ln(n!)`: exact cumulative sum below 4096, Stirling series above.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < TABLE_LEN {
        return ln_factorial_table()[n as usize];
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

pub fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `P[Binomial(n, p) = i]`.
pub fn binom_pmf(n: u64, p: f64, i: u64) -> f64 {
    if i > n {
        return 0.0;
    }
    if p == 0.0 {
        return if i == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if i == n { 1.0 } else { 0.0 };
    }
    let ln_term =
        ln_choose(n, i) + i as f64 * p.ln() + (n - i) as f64 * (-p).ln_1p();
    ln_term.exp()
}

fn check_args(n: u64, p: f64, bound: u64, name: &'static str) -> Result<()> {
    check_probability("p", p)?;
    if bound > n {
        return Err(Error::Domain {
            name,
            value: bound as f64,
            reason: "must not exceed the number of trials",
        });
    }
    Ok(())
}

/// `P[Binomial(n, p) <= l]`.
pub fn binom_cdf_le(n: u64, p: f64, l: u64) -> Result<f64> {
    check_args(n, p, l, "l")?;
    let sum: f64 = (0..=l).map(|i| binom_pmf(n, p, i)).sum();
    Ok(sum.min(1.0))
}

/// `P[Binomial(n, p) >= t]`.
pub fn binom_tail_ge(n: u64, p: f64, t: u64) -> Result<f64> {
    check_args(n, p, t, "t")?;
    let sum: f64 = (t..=n).map(|i| binom_pmf(n, p, i)).sum();
    Ok(sum.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_choose(n: u64, k: u64) -> u128 {
        (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
    }

    #[test]
    fn cdf_matches_integer_enumeration() {
        // sum_{i<=4} C(10, i) = 386
        let oracle: u128 = (0..=4).map(|i| exact_choose(10, i)).sum();
        assert_eq!(oracle, 386);
        let v = binom_cdf_le(10, 0.5, 4).unwrap();
        assert!((v - 386.0 / 1024.0).abs() < 1e-14);
    }

    #[test]
    fn full_ranges_are_one() {
        assert!((binom_cdf_le(800, 0.37, 800).unwrap() - 1.0).abs() < 1e-12);
        assert!((binom_tail_ge(800, 0.37, 0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn complement_identity() {
        let ge = binom_tail_ge(800, 0.567, 520).unwrap();
        let le = binom_cdf_le(800, 0.567, 519).unwrap();
        assert!((ge - (1.0 - le)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_probabilities() {
        assert_eq!(binom_cdf_le(5, 0.0, 0).unwrap(), 1.0);
        assert_eq!(binom_tail_ge(5, 1.0, 5).unwrap(), 1.0);
        assert_eq!(binom_tail_ge(5, 0.0, 1).unwrap(), 0.0);
    }

    #[test]
    fn domain_errors() {
        assert!(binom_cdf_le(10, 1.5, 3).is_err());
        assert!(binom_cdf_le(10, 0.5, 11).is_err());
        assert!(binom_tail_ge(10, -0.1, 3).is_err());
    }

    #[test]
    fn ln_factorial_stirling_branch_is_continuous() {
        let n = TABLE_LEN as u64;
        let exact = ln_factorial_table()[TABLE_LEN - 1] + (n as f64).ln();
        assert!((ln_factorial(n) - exact).abs() < 1e-9);
    }

    // Values frozen from an independent implementation (scipy.stats.binom).
    #[test]
    fn matches_reference_tails() {
        let p_con = 0.5 * (1.0 - (-5.0f64 / 4.0).exp());
        let p1 = binom_cdf_le(800, p_con, 260).unwrap();
        assert!((p1 - 0.032401099166279285).abs() < 1e-12);
        let boosted = 1.0 - (-6.25 * (1.0 - 3f64.sqrt() / 2.0)).exp();
        let p2 = binom_tail_ge(800, boosted, 520).unwrap();
        assert!((p2 / 1.070734651528803e-06 - 1.0).abs() < 1e-8);
    }
}
