//! Parameter selection for a protocol configuration.
//!
//! For a mean photon number `mu` and `N` pulses, each candidate threshold
//! `l_obt` fixes
//!
//! * `p1 = P[honest conclusive count <= l_obt]`,
//! * `p2 = P[splitting-attack conclusive count >= 2 l_obt]`,
//! * `k = l_obt - 6 floor(l_obt / 63)` and `eps2 = 1 - (1 - eps1')^k`,
//! * `p_fail = 1 - (1 - eps2)(1 - p1)`.
//!
//! Raising `l_obt` trades honest failure for concealing. A candidate is
//! feasible when `p_fail` and `p2` both stay within their budgets; the
//! [`SelectionRule`] picks one feasible candidate.

use serde::{Deserialize, Serialize};

use super::{
    binom_cdf_le, binom_tail_ge, eps2, p1_bound, p_con, p_con_malicious_boosted,
    protocol2_failure, DEFAULT_EPS1_PRIME, DEFAULT_ETA_D_HONEST,
};
use crate::error::{check_probability, Error, Result};

/// Hamming block length and check bits per block.
const BLOCK: u64 = 63;
const CHECKS: u64 = 6;

/// Rounding of the block count when computing the reconciled size `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum KConvention {
    /// `l_obt - 6 floor(l_obt / 63)`: one check group per complete block.
    #[default]
    Floor,
    /// `l_obt - 6 ceil(l_obt / 63)`: a partial block also pays six bits.
    Ceil,
}

pub fn k_from_lobt(l_obt: u64) -> Result<u64> {
    k_from_lobt_with(l_obt, KConvention::Floor)
}

pub fn k_from_lobt_with(l_obt: u64, convention: KConvention) -> Result<u64> {
    if l_obt == 0 {
        return Err(Error::Domain {
            name: "l_obt",
            value: 0.0,
            reason: "must be positive",
        });
    }
    let blocks = match convention {
        KConvention::Floor => l_obt / BLOCK,
        KConvention::Ceil => l_obt.div_ceil(BLOCK),
    };
    l_obt
        .checked_sub(CHECKS * blocks)
        .filter(|&k| k > 0)
        .ok_or(Error::Domain {
            name: "l_obt",
            value: l_obt as f64,
            reason: "too small to leave any bit after discarding check bits",
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SelectionRule {
    /// Largest feasible `l_obt`; ties cannot occur.
    LargestFeasible,
    /// Smallest feasible `l_obt`.
    SmallestFeasible,
    /// Feasible `l_obt` minimizing `p_fail + weight * p2`.
    MinWeightedRisk { weight: f64 },
}

impl SelectionRule {
    /// Exchange rate between concealing and honest failure that reproduces
    /// the reference parameter table; any weight in roughly [4400, 5200]
    /// selects the same five rows.
    pub const DEFAULT_RISK_WEIGHT: f64 = 4800.0;
}

impl Default for SelectionRule {
    fn default() -> Self {
        SelectionRule::MinWeightedRisk {
            weight: Self::DEFAULT_RISK_WEIGHT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub n_pulses: u64,
    pub p_fail_budget: f64,
    pub p2_budget: f64,
    pub eps1_prime: f64,
    pub eta_d_honest: f64,
    /// Agreed tolerable error rate carried into the row.
    pub eps_set: f64,
    /// Bit-commitment repetition count carried into the row.
    pub bc_rounds: u32,
    pub rule: SelectionRule,
    pub k_convention: KConvention,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            n_pulses: 800,
            p_fail_budget: 0.20,
            p2_budget: 1e-5,
            eps1_prime: DEFAULT_EPS1_PRIME,
            eta_d_honest: DEFAULT_ETA_D_HONEST,
            eps_set: 0.003,
            bc_rounds: 25,
            rule: SelectionRule::default(),
            k_convention: KConvention::Floor,
        }
    }
}

/// One protocol configuration with every derived probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamTableRow {
    pub mu: f64,
    pub n_pulses: u64,
    /// Expected detection fraction `1 - e^{-mu}`.
    pub a: f64,
    pub eps_set: f64,
    pub l_obt: u64,
    pub k: u64,
    pub bc_rounds: u32,
    pub p_con: f64,
    /// Boosted splitting-attack rate (perfect adversarial detector).
    pub p_con_mal: f64,
    pub eps2: f64,
    pub p1: f64,
    /// Upper bound on `p1` that keeps `p_fail` within budget.
    pub p1t: f64,
    pub p2: f64,
    pub p_fail: f64,
}

impl ParamTableRow {
    /// Evaluates every derived column for a fixed `l_obt`.
    pub fn evaluate(mu: f64, l_obt: u64, config: &SelectionConfig) -> Result<Self> {
        check_probability("p_fail_budget", config.p_fail_budget)?;
        let n = config.n_pulses;
        if n == 0 {
            return Err(Error::Domain {
                name: "n_pulses",
                value: 0.0,
                reason: "must be positive",
            });
        }
        if 2 * l_obt > n {
            return Err(Error::TooFewPulses {
                pulses: n as usize,
                set_size: l_obt as usize,
            });
        }
        let p_con = p_con(mu)?;
        let p_con_mal = p_con_malicious_boosted(mu, config.eta_d_honest)?;
        let k = k_from_lobt_with(l_obt, config.k_convention)?;
        let eps2 = eps2(config.eps1_prime, k)?;
        let p1 = binom_cdf_le(n, p_con, l_obt)?;
        let p2 = binom_tail_ge(n, p_con_mal, 2 * l_obt)?;
        Ok(Self {
            mu,
            n_pulses: n,
            a: -(-mu).exp_m1(),
            eps_set: config.eps_set,
            l_obt,
            k,
            bc_rounds: config.bc_rounds,
            p_con,
            p_con_mal,
            eps2,
            p1,
            p1t: p1_bound(eps2, config.p_fail_budget)?,
            p2,
            p_fail: protocol2_failure(eps2, p1)?,
        })
    }

    fn feasible(&self, config: &SelectionConfig) -> bool {
        self.p_fail <= config.p_fail_budget && self.p2 <= config.p2_budget
    }
}

/// Which constraint prevents any choice of `l_obt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Binding {
    /// No `l_obt` keeps the honest failure within budget.
    HonestFailure,
    /// No `l_obt` keeps the malicious receiver within budget.
    Concealing,
    /// Each budget can be met alone, never both at once.
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Infeasible {
    pub mu: f64,
    pub binding: Binding,
    /// Smallest `p_fail` over all candidates.
    pub best_p_fail: f64,
    /// Smallest `p2` over all candidates.
    pub best_p2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Selection {
    Feasible(ParamTableRow),
    Infeasible(Infeasible),
}

impl Selection {
    pub fn row(&self) -> Option<&ParamTableRow> {
        match self {
            Selection::Feasible(row) => Some(row),
            Selection::Infeasible(_) => None,
        }
    }
}

/// Scans every `l_obt` in `[1, N/2]` and applies the configured rule.
pub fn select_params(mu: f64, config: &SelectionConfig) -> Result<Selection> {
    check_probability("p2_budget", config.p2_budget)?;
    if let SelectionRule::MinWeightedRisk { weight } = config.rule {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::Domain {
                name: "weight",
                value: weight,
                reason: "must be finite and non-negative",
            });
        }
    }
    let rows = (1..=config.n_pulses / 2)
        .filter(|&l| k_from_lobt_with(l, config.k_convention).is_ok())
        .map(|l| ParamTableRow::evaluate(mu, l, config))
        .collect::<Result<Vec<_>>>()?;

    let mut feasible = rows.iter().filter(|r| r.feasible(config));
    let chosen = match config.rule {
        SelectionRule::LargestFeasible => feasible.next_back(),
        SelectionRule::SmallestFeasible => feasible.min_by_key(|r| r.l_obt),
        SelectionRule::MinWeightedRisk { weight } => feasible.min_by(|a, b| {
            let ra = a.p_fail + weight * a.p2;
            let rb = b.p_fail + weight * b.p2;
            ra.total_cmp(&rb)
        }),
    };
    if let Some(row) = chosen {
        return Ok(Selection::Feasible(*row));
    }

    let best_p_fail = rows.iter().map(|r| r.p_fail).fold(1.0, f64::min);
    let best_p2 = rows.iter().map(|r| r.p2).fold(1.0, f64::min);
    let binding = match (
        best_p_fail <= config.p_fail_budget,
        best_p2 <= config.p2_budget,
    ) {
        (false, _) => Binding::HonestFailure,
        (true, false) => Binding::Concealing,
        (true, true) => Binding::Joint,
    };
    Ok(Selection::Infeasible(Infeasible {
        mu,
        binding,
        best_p_fail,
        best_p2,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn k_column() {
        for (l_obt, k) in [(143, 131), (190, 172), (228, 210), (260, 236), (283, 259)] {
            assert_eq!(k_from_lobt(l_obt).unwrap(), k);
        }
        assert_eq!(k_from_lobt(62).unwrap(), 62);
        assert_eq!(k_from_lobt(63).unwrap(), 57);
        assert_eq!(k_from_lobt_with(143, KConvention::Ceil).unwrap(), 125);
        assert!(k_from_lobt(0).is_err());
        assert!(k_from_lobt_with(6, KConvention::Ceil).is_err());
    }

    #[test]
    fn reference_rows() {
        let config = SelectionConfig::default();
        for (mu, l_obt) in [(2.0, 143), (3.0, 190), (4.0, 228), (5.0, 260), (6.0, 283)] {
            let row = *select_params(mu, &config).unwrap().row().unwrap();
            assert_eq!(row.l_obt, l_obt, "mu = {mu}");
        }
    }

    #[test]
    fn mu5_row_columns() {
        let row = *select_params(5.0, &SelectionConfig::default())
            .unwrap()
            .row()
            .unwrap();
        assert_eq!(row.k, 236);
        assert!((row.eps2 - 0.164).abs() < 5e-4);
        assert!((row.p1 - 0.0324).abs() < 5e-4);
        assert!(row.p2 / 7.45e-7 < 2.0 && row.p2 / 7.45e-7 > 0.5);
        assert!((row.p1t - 0.0435).abs() < 5e-4);
    }

    #[test]
    fn tiny_mu_is_infeasible() {
        let sel = select_params(0.01, &SelectionConfig::default()).unwrap();
        let Selection::Infeasible(info) = sel else {
            panic!("expected infeasible, got {sel:?}");
        };
        assert_eq!(info.binding, Binding::HonestFailure);

        // exhaustive oracle: no l_obt satisfies both budgets
        let config = SelectionConfig::default();
        for l in 1..=400 {
            let row = ParamTableRow::evaluate(0.01, l, &config).unwrap();
            assert!(!(row.p_fail <= 0.2 && row.p2 <= config.p2_budget));
        }
    }

    #[test]
    fn concealing_binding_constraint() {
        let config = SelectionConfig {
            p2_budget: 0.0,
            ..SelectionConfig::default()
        };
        let Selection::Infeasible(info) = select_params(5.0, &config).unwrap() else {
            panic!("expected infeasible");
        };
        assert_eq!(info.binding, Binding::Concealing);

        // Small sets keep the honest failure low, large ones starve the
        // adversary; at this budget the two ranges do not meet.
        let config = SelectionConfig {
            p_fail_budget: 0.1,
            ..SelectionConfig::default()
        };
        let Selection::Infeasible(info) = select_params(5.0, &config).unwrap() else {
            panic!("expected infeasible");
        };
        assert_eq!(info.binding, Binding::Joint);
    }

    #[test]
    fn largest_feasible_rule() {
        let config = SelectionConfig {
            rule: SelectionRule::LargestFeasible,
            ..SelectionConfig::default()
        };
        let row = *select_params(2.0, &config).unwrap().row().unwrap();
        assert_eq!(row.l_obt, 143);
        let row = *select_params(5.0, &config).unwrap().row().unwrap();
        assert!(row.l_obt.abs_diff(260) <= 2);
    }

    #[test]
    fn weighted_rule_minimizes_over_exhaustive_scan() {
        let config = SelectionConfig::default();
        let SelectionRule::MinWeightedRisk { weight } = config.rule else {
            unreachable!()
        };
        let row = *select_params(4.0, &config).unwrap().row().unwrap();
        let risk = |r: &ParamTableRow| r.p_fail + weight * r.p2;
        for l in 1..=400 {
            let other = ParamTableRow::evaluate(4.0, l, &config).unwrap();
            if other.feasible(&config) {
                assert!(risk(&row) <= risk(&other));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn selected_rows_respect_budgets(
            mu in 1.5f64..7.0,
            p_fail_budget in 0.1f64..0.4,
            p2_budget in 1e-7f64..1e-4,
        ) {
            let config = SelectionConfig { p_fail_budget, p2_budget, ..SelectionConfig::default() };
            if let Selection::Feasible(row) = select_params(mu, &config).unwrap() {
                prop_assert!(row.p_fail <= p_fail_budget);
                prop_assert!(row.p2 <= p2_budget);
                prop_assert!((0.0..=1.0).contains(&row.p1));
                prop_assert!(2 * row.l_obt <= row.n_pulses);
            }
        }

        #[test]
        fn tighter_budgets_never_raise_largest_feasible(
            mu in 1.5f64..7.0,
            p_fail_budget in 0.1f64..0.4,
            shrink in 0.3f64..1.0,
            p2_budget in 1e-7f64..1e-4,
        ) {
            let base = SelectionConfig {
                p_fail_budget,
                p2_budget,
                rule: SelectionRule::LargestFeasible,
                ..SelectionConfig::default()
            };
            let Selection::Feasible(row) = select_params(mu, &base).unwrap() else {
                return Ok(());
            };
            for tighter in [
                SelectionConfig { p_fail_budget: p_fail_budget * shrink, ..base },
                SelectionConfig { p2_budget: p2_budget * shrink, ..base },
            ] {
                if let Selection::Feasible(t) = select_params(mu, &tighter).unwrap() {
                    prop_assert!(t.l_obt <= row.l_obt);
                }
            }
        }
    }
}
