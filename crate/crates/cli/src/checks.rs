//! Physical-parameter sanity checks.

use std::fmt::Write;

use anyhow::Result;
use qot_core::analytics::pns_check;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::format::num;
use crate::table::TABLE_MUS;

/// Transfer efficiency above which a lossless-channel adversary could hide
/// behind the honest loss budget.
pub const TRANSFER_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamsCheck {
    pub mu: f64,
    pub mu_s: f64,
    pub a: f64,
    pub holds: bool,
    pub margin: f64,
    pub entropy: f64,
    pub bound: f64,
}

/// Splitting-attack resistance at the configured `mu` and every table `mu`.
pub fn params_check(config: &ExperimentConfig) -> Result<Vec<ParamsCheck>> {
    let mut mus = vec![config.mu];
    mus.extend(TABLE_MUS.iter().filter(|&&m| m != config.mu));
    mus.into_iter()
        .map(|mu| {
            let mu_s = mu / (config.eta_c * config.eta_d);
            let a = -(-mu).exp_m1();
            let c = pns_check(mu_s, a, config.eps_set)?;
            Ok(ParamsCheck {
                mu,
                mu_s,
                a,
                holds: c.holds,
                margin: c.margin,
                entropy: c.entropy,
                bound: c.bound,
            })
        })
        .collect()
}

pub fn render(config: &ExperimentConfig, checks: &[ParamsCheck]) -> String {
    let mut out = String::new();
    writeln!(out, "# {}", config.provenance()).unwrap();
    writeln!(
        out,
        "{:>6} {:>8} {:>10} {:>12} {:>12} {:>12}  resists splitting",
        "mu", "mu_s", "a", "H(2 eps_set)", "bound", "margin"
    )
    .unwrap();
    for c in checks {
        writeln!(
            out,
            "{:>6} {:>8} {:>10} {:>12} {:>12} {:>12}  {}",
            num(c.mu),
            num(c.mu_s),
            format!("{:.6}", c.a),
            format!("{:.6}", c.entropy),
            format!("{:.6}", c.bound),
            format!("{:+.6}", c.margin),
            if c.holds { "yes" } else { "NO" }
        )
        .unwrap();
    }
    for c in checks.iter().filter(|c| !c.holds) {
        writeln!(
            out,
            "warning: at mu = {} the entropy condition fails (H(2 eps_set) = {:.4} >= {:.4}); \
             the run proceeds, security rests on the set-size threshold alone",
            num(c.mu),
            c.entropy,
            c.bound
        )
        .unwrap();
    }
    let transfer = config.eta_c * config.eta_d;
    if transfer >= TRANSFER_THRESHOLD {
        writeln!(
            out,
            "warning: eta_c * eta_d = {} reaches {TRANSFER_THRESHOLD}; an adversary with a lossless channel gains nothing from the loss budget",
            num(transfer)
        )
        .unwrap();
    }
    out
}
