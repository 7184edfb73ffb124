//! Experiment configuration: a flat TOML file of `key = value` pairs, then
//! command-line overrides, then validation.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qot_core::analytics::{select_params, KConvention, SelectionConfig, SelectionRule};
use qot_core::protocols::bc::VerifyPolicy;
use qot_core::protocols::rot::RotConfig;
use qot_core::{ParamTableRow, Selection, SystemParams};
use serde::{Deserialize, Serialize};

/// Marks an error caused by bad input rather than a failed computation.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; trial `i` of experiment `tag` uses substream
    /// `SHA-256(seed || tag || i)`.
    pub seed: u64,
    pub trials: u64,
    pub out: PathBuf,

    /// Mean photon number at the honest detector.
    pub mu: f64,
    pub n_pulses: u64,
    pub eta_c: f64,
    pub eta_d: f64,
    /// Physical bit-error rate of conclusive results.
    pub eps1: f64,
    /// Bit-error rate left after reconciliation.
    pub eps1_prime: f64,
    /// Agreed tolerable error rate checked by calibration.
    pub eps_set: f64,
    pub dark_rate: f64,
    /// Calibration threshold `a` as a fraction of `1 - e^{-mu}`.
    pub a_margin: f64,

    pub p_fail_budget: f64,
    pub p2_budget: f64,
    /// Bit-commitment repetitions `l`.
    pub bc_rounds: u32,
    /// When set, the error rate `eps1` is replaced by the one at which the
    /// honest transfer fails with this probability (binding experiments).
    pub operating_failure: Option<f64>,

    /// String length for the reconciliation benchmark.
    pub reconcile_len: usize,
    pub reconcile_rounds: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 1000,
            out: PathBuf::from("out"),
            mu: 5.0,
            n_pulses: 800,
            eta_c: 1.0,
            eta_d: 0.8,
            eps1: 0.003,
            eps1_prime: 0.000757,
            eps_set: 0.005,
            dark_rate: 0.0,
            a_margin: 0.95,
            p_fail_budget: 0.2,
            p2_budget: 1e-5,
            bc_rounds: 25,
            operating_failure: None,
            reconcile_len: 260,
            reconcile_rounds: 4,
        }
    }
}

/// Parses `key=value`; the value is read as a TOML value, falling back to a
/// bare string.
fn parse_override(item: &str) -> Result<(String, toml::Value)> {
    let Some((key, raw)) = item.split_once('=') else {
        return Err(usage(format!("override `{item}` is not key=value")));
    };
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.trim().to_string(), value))
}

impl ExperimentConfig {
    /// Defaults, overlaid by `file` if given, overlaid by `overrides`.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match file {
            Some(path) => std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?
                .parse::<toml::Table>()
                .map_err(|e| usage(format!("{}: {e}", path.display())))?,
            None => toml::Table::new(),
        };
        for item in overrides {
            let (key, value) = parse_override(item)?;
            table.insert(key, value);
        }
        let config: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e| usage(format!("configuration: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let probabilities = [
            ("eta_c", self.eta_c),
            ("eta_d", self.eta_d),
            ("eps1", self.eps1),
            ("eps1_prime", self.eps1_prime),
            ("eps_set", self.eps_set),
            ("dark_rate", self.dark_rate),
            ("a_margin", self.a_margin),
            ("p_fail_budget", self.p_fail_budget),
            ("p2_budget", self.p2_budget),
            ("operating_failure", self.operating_failure.unwrap_or(0.0)),
        ];
        for (name, value) in probabilities {
            if !(0.0..=1.0).contains(&value) {
                return Err(usage(format!("{name} = {value} is not in [0, 1]")));
            }
        }
        if self.trials == 0 {
            return Err(usage("trials must be at least 1"));
        }
        if self.n_pulses == 0 {
            return Err(usage("n_pulses must be at least 1"));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(usage(format!("mu = {} must be finite and non-negative", self.mu)));
        }
        if self.eta_d == 0.0 || self.eta_c == 0.0 {
            return Err(usage("eta_c and eta_d must be positive"));
        }
        if self.reconcile_len == 0 {
            return Err(usage("reconcile_len must be at least 1"));
        }
        Ok(())
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            n_pulses: self.n_pulses,
            p_fail_budget: self.p_fail_budget,
            p2_budget: self.p2_budget,
            eps1_prime: self.eps1_prime,
            eta_d_honest: self.eta_d,
            eps_set: self.eps_set,
            bc_rounds: self.bc_rounds,
            rule: SelectionRule::default(),
            k_convention: KConvention::Floor,
        }
    }

    /// The selected row at `self.mu`.
    pub fn row(&self) -> Result<ParamTableRow> {
        match select_params(self.mu, &self.selection())? {
            Selection::Feasible(row) => Ok(row),
            Selection::Infeasible(info) => bail!(
                "no feasible l_obt at mu = {}: binding constraint {:?}",
                self.mu,
                info.binding
            ),
        }
    }

    /// Hardware delivering `mu` at the honest detector with error `eps`.
    pub fn system(&self, eps: f64) -> Result<SystemParams> {
        let mu_s = self.mu / (self.eta_c * self.eta_d);
        Ok(SystemParams::new(mu_s, self.eta_c, self.eta_d, 0.0, 0.0, eps, self.dark_rate)?)
    }

    pub fn rot_config(&self, row: &ParamTableRow, eps: f64) -> Result<RotConfig> {
        let a = self.a_margin * -(-self.mu).exp_m1();
        Ok(RotConfig::new(self.system(eps)?, self.n_pulses, a, self.eps_set, row.l_obt)?)
    }

    /// Strict when the physics is error-free, tolerant otherwise.
    pub fn verify_policy(&self, eps: f64) -> VerifyPolicy {
        if eps == 0.0 {
            VerifyPolicy::strict()
        } else {
            VerifyPolicy::for_error_rate(self.eps_set)
        }
    }

    /// Header lines recording everything that determines an output.
    pub fn provenance(&self) -> String {
        format!(
            "seed={} substreams=sha256(seed,tag,index) trials={} mu={} n_pulses={} eta_c={} eta_d={} \
             eps1={} eps1_prime={} eps_set={} dark_rate={} p_fail_budget={} p2_budget={} bc_rounds={}",
            self.seed,
            self.trials,
            self.mu,
            self.n_pulses,
            self.eta_c,
            self.eta_d,
            self.eps1,
            self.eps1_prime,
            self.eps_set,
            self.dark_rate,
            self.p_fail_budget,
            self.p2_budget,
            self.bc_rounds
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_win() {
        let c = ExperimentConfig::load(None, &["mu=3".into(), "seed = 9".into(), "out=dir".into()]).unwrap();
        assert_eq!(c.mu, 3.0);
        assert_eq!(c.seed, 9);
        assert_eq!(c.out, PathBuf::from("dir"));
    }

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "mu = 2.0\ntrials = 5\n").unwrap();
        let c = ExperimentConfig::load(Some(&path), &["trials=7".into()]).unwrap();
        assert_eq!((c.mu, c.trials), (2.0, 7));
    }

    #[test]
    fn rejects_bad_values() {
        for bad in ["n_pulses=0", "trials=0", "eps1=1.5", "p2_budget=-1", "nonsense=1", "mu"] {
            let err = ExperimentConfig::load(None, &[bad.into()]).unwrap_err();
            assert!(err.is::<UsageError>(), "{bad}: {err}");
        }
    }

    #[test]
    fn default_row() {
        let row = ExperimentConfig::default().row().unwrap();
        assert_eq!((row.l_obt, row.k), (260, 236));
    }
}
