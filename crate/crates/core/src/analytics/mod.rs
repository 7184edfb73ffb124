//! Closed-form probabilities of the weak-coherent-pulse OT scheme and the
//! parameter search built on them.
//!
//! Conventions: `mu` is the mean photon number at the honest detector,
//! `mu = mu_s * eta_c * eta_d`. The two encoding states sit `PHI = pi/6`
//! apart, so a single photon measured in the wrong basis lands on the
//! orthogonal outcome with probability `sin^2(pi/6) = 1/4`.

mod binomial;
mod params;
mod select;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

pub use binomial::{binom_cdf_le, binom_pmf, binom_tail_ge, ln_choose, ln_factorial};
pub use params::SystemParams;
pub use select::{
    k_from_lobt, k_from_lobt_with, select_params, Binding, Infeasible, KConvention,
    ParamTableRow, Selection, SelectionConfig, SelectionRule,
};

use crate::error::{check_non_negative, check_probability, Error, Result};

/// Angle between the two non-orthogonal encoding states.
pub const PHI: f64 = FRAC_PI_6;

/// Detector efficiency of the honest receiver in the reference setting.
pub const DEFAULT_ETA_D_HONEST: f64 = 0.8;

/// Residual per-bit error after Hamming reconciliation of a 0.3% channel,
/// the reference operating point.
pub const DEFAULT_EPS1_PRIME: f64 = 0.000757;

/// Probability per bit that a cheating sender who changes half of her pair
/// values goes unnoticed, as stated for a single 1-of-2 OT.
pub const ALICE_UNDETECTED_PER_BIT: f64 = 0.25;

/// Per-round probability of detecting a cheating committer at a 20% OT
/// failure budget.
pub const BINDING_DETECTION_PER_ROUND: f64 = 0.4;

const SQRT3_OVER_2: f64 = 0.866_025_403_784_438_6;

/// Per-photon unambiguous-discrimination failure exponent `1 - cos(pi/6)`.
pub const USD_RATE: f64 = 1.0 - SQRT3_OVER_2;

/// `P[Poisson(mu) = n]`.
pub fn poisson_pmf(n: u64, mu: f64) -> Result<f64> {
    check_non_negative("mu", mu)?;
    if mu == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    Ok((n as f64 * mu.ln() - mu - ln_factorial(n)).exp())
}

/// Conclusive probability for one photon: `(1/2) sin^2(pi/6) = 1/8`.
pub fn p_ideal() -> f64 {
    0.5 * PHI.sin().powi(2)
}

/// Honest conclusive probability for a pulse of `n` photons.
pub fn p_conclusive_n(n: u32) -> f64 {
    0.5 * (1.0 - 0.75f64.powi(n as i32))
}

/// Honest conclusive probability per pulse of Poisson mean `mu`.
pub fn p_con(mu: f64) -> Result<f64> {
    check_non_negative("mu", mu)?;
    Ok(-0.5 * (-mu / 4.0).exp_m1())
}

/// Unambiguous-discrimination success on `n` photons of states `phi` apart.
pub fn p_usd_n(n: u32, phi: f64) -> Result<f64> {
    if !(phi > 0.0 && phi <= FRAC_PI_2) {
        return Err(Error::Domain {
            name: "phi",
            value: phi,
            reason: "must lie in (0, pi/2]",
        });
    }
    Ok(1.0 - phi.cos().powi(n as i32))
}

/// Conclusive probability of a photon-number-splitting receiver with the
/// honest detector: `1 - exp(-mu (1 - sqrt(3)/2))`.
pub fn p_con_malicious(mu: f64) -> Result<f64> {
    check_non_negative("mu", mu)?;
    Ok(-(-mu * USD_RATE).exp_m1())
}

/// Conclusive probability of a splitting receiver with a perfect detector,
/// who therefore sees `mu / eta_d_honest` photons on average.
pub fn p_con_malicious_boosted(mu: f64, eta_d_honest: f64) -> Result<f64> {
    check_non_negative("mu", mu)?;
    if !(eta_d_honest > 0.0 && eta_d_honest <= 1.0) {
        return Err(Error::Domain {
            name: "eta_d_honest",
            value: eta_d_honest,
            reason: "must lie in (0, 1]",
        });
    }
    p_con_malicious(mu / eta_d_honest)
}

/// Honest advantage over half of the boosted malicious rate.
pub fn p_diff(mu: f64, eta_d_honest: f64) -> Result<f64> {
    Ok(p_con(mu)? - 0.5 * p_con_malicious_boosted(mu, eta_d_honest)?)
}

/// Maximizer and maximum of [`p_diff`] on `[mu_lo, mu_hi]`.
///
/// A 0.01 grid brackets the peak, then ternary search narrows the bracket
/// well below 1e-4.
pub fn find_pdiff_max(eta_d_honest: f64, mu_lo: f64, mu_hi: f64) -> Result<(f64, f64)> {
    check_non_negative("mu_lo", mu_lo)?;
    if !(mu_hi.is_finite() && mu_lo < mu_hi) {
        return Err(Error::Domain {
            name: "mu_hi",
            value: mu_hi,
            reason: "interval must be non-empty",
        });
    }
    p_diff(mu_lo, eta_d_honest)?;

    let f = |mu: f64| p_diff(mu, eta_d_honest).expect("validated above");
    const STEP: f64 = 0.01;
    let steps = ((mu_hi - mu_lo) / STEP).ceil() as usize;
    let grid = |i: usize| (mu_lo + i as f64 * STEP).min(mu_hi);
    let best = (0..=steps)
        .max_by(|&a, &b| f(grid(a)).total_cmp(&f(grid(b))))
        .unwrap_or(0);

    let mut lo = grid(best.saturating_sub(1));
    let mut hi = grid((best + 1).min(steps));
    while hi - lo > 1e-9 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let mu_star = 0.5 * (lo + hi);
    Ok((mu_star, f(mu_star)))
}

/// Error rate of a 1-of-2 OT whose key of `k` bits has per-bit error
/// `eps1_prime`.
pub fn eps2(eps1_prime: f64, k: u64) -> Result<f64> {
    check_probability("eps1_prime", eps1_prime)?;
    Ok(-(k as f64 * (-eps1_prime).ln_1p()).exp_m1())
}

/// Probability that an honest receiver cannot complete a 1-of-2 OT.
pub fn protocol2_failure(eps2: f64, p1: f64) -> Result<f64> {
    check_probability("eps2", eps2)?;
    check_probability("p1", p1)?;
    Ok(1.0 - (1.0 - eps2) * (1.0 - p1))
}

/// Largest `p1` that keeps [`protocol2_failure`] within `budget`.
pub fn p1_bound(eps2: f64, budget: f64) -> Result<f64> {
    check_probability("eps2", eps2)?;
    check_probability("budget", budget)?;
    if eps2 >= 1.0 {
        return Ok(0.0);
    }
    Ok((1.0 - (1.0 - budget) / (1.0 - eps2)).max(0.0))
}

/// Binary Shannon entropy in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_probability("x", x)?;
    let term = |p: f64| if p == 0.0 { 0.0 } else { -p * p.log2() };
    Ok(term(x) + term(1.0 - x))
}

/// Outcome of the photon-number-splitting resistance condition
/// `H(2 eps_set) < 1/2 - m2 / (2a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnsCheck {
    pub holds: bool,
    /// Right-hand side minus left-hand side.
    pub margin: f64,
    /// Probability that a source pulse carries two or more photons.
    pub multi_photon: f64,
    pub entropy: f64,
    pub bound: f64,
}

pub fn pns_check(mu_s: f64, a: f64, eps_set: f64) -> Result<PnsCheck> {
    check_non_negative("mu_s", mu_s)?;
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::Domain {
            name: "a",
            value: a,
            reason: "detection fraction must lie in (0, 1]",
        });
    }
    if !(0.0..=0.5).contains(&eps_set) {
        return Err(Error::Domain {
            name: "eps_set",
            value: eps_set,
            reason: "must lie in [0, 1/2]",
        });
    }
    let multi_photon = 1.0 - (-mu_s).exp() - mu_s * (-mu_s).exp();
    let entropy = binary_entropy(2.0 * eps_set)?;
    let bound = 0.5 - multi_photon / (2.0 * a);
    Ok(PnsCheck {
        holds: entropy < bound,
        margin: bound - entropy,
        multi_photon,
        entropy,
        bound,
    })
}

/// Probability that a receiver breaks concealing in at least one of `l`
/// rounds when each round leaks with probability `p2`.
pub fn p_concealing_break(l: u32, p2: f64) -> Result<f64> {
    check_probability("p2", p2)?;
    Ok(-(l as f64 * (-p2).ln_1p()).exp_m1())
}

/// Probability that a cheating committer escapes detection in all `l`
/// rounds.
pub fn p_binding_break(l: u32, per_round_detect: f64) -> Result<f64> {
    check_probability("per_round_detect", per_round_detect)?;
    Ok((1.0 - per_round_detect).powi(l as i32))
}
