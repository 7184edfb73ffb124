//! Interval estimates and goodness of fit.

use qot_core::analytics::binom_pmf;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const Z95: f64 = 1.959_963_984_540_054;

/// Point estimate with a 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub low: f64,
    pub high: f64,
}

impl Estimate {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

/// Wilson interval for `successes` out of `total`.
pub fn proportion(successes: u64, total: u64) -> Estimate {
    let (low, high) = qot_core::reconciliation::wilson_interval(successes, total);
    Estimate {
        value: successes as f64 / total.max(1) as f64,
        low,
        high,
    }
}

/// Normal-approximation interval for a sample mean.
pub fn mean(samples: &[f64]) -> Estimate {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return Estimate { value: f64::NAN, low: f64::NAN, high: f64::NAN };
    }
    let m = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let half = Z95 * (var / n).sqrt();
    Estimate { value: m, low: m - half, high: m + half }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of `observations` against Binomial(`n`, `p`),
/// with neighbouring outcomes pooled until every bin expects at least 5.
pub fn chi_square_binomial(observations: &[u64], n: u64, p: f64) -> GoodnessOfFit {
    let total = observations.len() as f64;
    let mut observed = vec![0u64; n as usize + 1];
    for &x in observations {
        observed[x.min(n) as usize] += 1;
    }
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut e, mut o) = (0.0, 0.0);
    for i in 0..=n {
        e += total * binom_pmf(n, p, i);
        o += observed[i as usize] as f64;
        if e >= 5.0 {
            bins.push((o, e));
            e = 0.0;
            o = 0.0;
        }
    }
    match bins.last_mut() {
        Some(last) => {
            last.0 += o;
            last.1 += e;
        }
        None => bins.push((o, e)),
    }
    let statistic = bins.iter().map(|&(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len().saturating_sub(1).max(1);
    let p_value = 1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(statistic);
    GoodnessOfFit { statistic, dof, p_value }
}
