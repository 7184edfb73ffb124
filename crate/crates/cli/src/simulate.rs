//! Monte Carlo experiments over the three protocols.
//!
//! Trial `i` of every experiment draws from its own substream, trials run
//! on the rayon pool, and results are gathered in trial order.

use std::fmt::Write;

use anyhow::Result;
use clap::ValueEnum;
use qot_core::analytics::{binom_tail_ge, p_binding_break, BINDING_DETECTION_PER_ROUND};
use qot_core::protocols::bc::{cheating_alice_strategy, run_honest_bc, CommitmentTranscript};
use qot_core::protocols::ot12::{error_rate_for_failure, estimate_ot_failure};
use qot_core::protocols::rot::{calibrate, pns_bob_strategy, run_rot, RotConfig};
use qot_core::reconciliation::estimate_residual;
use qot_core::rng::{substream, SimRng};
use qot_core::{Error, ParamTableRow};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{usage, ExperimentConfig};
use crate::format::num;
use crate::stats::{chi_square_binomial, mean, proportion, Estimate, GoodnessOfFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Which {
    Rot,
    Ot,
    Bc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
pub enum Adversary {
    None,
    PnsBob,
    CheatingAlice,
}

/// One measured quantity with its analytic prediction, if any.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Line {
    pub name: String,
    pub estimate: Estimate,
    pub analytic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub title: String,
    pub provenance: String,
    pub lines: Vec<Line>,
    pub notes: Vec<String>,
}

impl Report {
    fn new(title: impl Into<String>, config: &ExperimentConfig) -> Self {
        Self {
            title: title.into(),
            provenance: config.provenance(),
            lines: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn line(&mut self, name: &str, estimate: Estimate, analytic: Option<f64>) {
        self.lines.push(Line {
            name: name.into(),
            estimate,
            analytic,
        });
    }

    pub fn get(&self, name: &str) -> Option<&Line> {
        self.lines.iter().find(|l| l.name == name)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# {}", self.title).unwrap();
        writeln!(out, "# {}", self.provenance).unwrap();
        writeln!(out, "{:<28} {:>14} {:>14} {:>14} {:>14}", "quantity", "estimate", "ci95_low", "ci95_high", "analytic").unwrap();
        for l in &self.lines {
            writeln!(
                out,
                "{:<28} {:>14} {:>14} {:>14} {:>14}",
                l.name,
                num(l.estimate.value),
                num(l.estimate.low),
                num(l.estimate.high),
                l.analytic.map(num).unwrap_or_else(|| "-".into())
            )
            .unwrap();
        }
        for note in &self.notes {
            writeln!(out, "note: {note}").unwrap();
        }
        out
    }
}

fn par_trials<T: Send>(config: &ExperimentConfig, tag: &str, f: impl Fn(u64, &mut SimRng) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..config.trials)
        .into_par_iter()
        .map(|i| f(i, &mut substream(config.seed, tag, i)))
        .collect()
}

/// Conclusive counts of honest random-OT sessions; `None` marks an abort.
pub fn rot_counts(config: &ExperimentConfig, rot: &RotConfig) -> Result<Vec<Option<(u64, u64)>>> {
    par_trials(config, "rot", |_, rng| match run_rot(rot, rng) {
        Ok(s) => Ok(Some((s.conclusive.len() as u64, s.error_count() as u64))),
        Err(Error::InsufficientConclusive { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    })
}

fn simulate_rot(config: &ExperimentConfig, row: &ParamTableRow) -> Result<Report> {
    let rot = config.rot_config(row, config.eps1)?;
    let mut report = Report::new("simulate rot, honest parties", config);
    let calibration = calibrate(&rot, &mut substream(config.seed, "calibration", 0))?;
    report.notes.push(format!(
        "calibration {}: detection rate {} (a = {}), error rate {} (eps_set = {})",
        if calibration.accepted { "accepted" } else { "REJECTED" },
        num(calibration.detection_rate),
        num(rot.a),
        num(calibration.error_rate),
        num(rot.eps_set)
    ));
    let results = rot_counts(config, &rot)?;
    let completed: Vec<(u64, u64)> = results.iter().flatten().copied().collect();
    let counts: Vec<u64> = completed.iter().map(|c| c.0).collect();
    let n = config.n_pulses as f64;
    let as_f64: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    report.line("conclusive_count", mean(&as_f64), Some(n * row.p_con));
    let total: u64 = counts.iter().sum();
    report.line("conclusive_rate", proportion(total, completed.len() as u64 * config.n_pulses), Some(row.p_con));
    report.line("bit_error_rate", proportion(completed.iter().map(|c| c.1).sum(), total), Some(config.eps1));
    let aborted = results.iter().filter(|r| r.is_none()).count() as u64;
    report.line("aborted", proportion(aborted, config.trials), None);
    let short = counts.iter().filter(|&&c| c <= row.l_obt).count() as u64;
    report.line("count_at_most_l_obt", proportion(short, counts.len() as u64), Some(row.p1));
    if !counts.is_empty() {
        let fit = chi_square_binomial(&counts, config.n_pulses, row.p_con);
        report.notes.push(gof_note(&fit));
    }
    Ok(report)
}

fn gof_note(fit: &GoodnessOfFit) -> String {
    format!(
        "chi-square vs Binomial(N, p_con): statistic {} on {} dof, p-value {}",
        num(fit.statistic),
        fit.dof,
        num(fit.p_value)
    )
}

/// Conclusive counts of a splitting-attack Bob with a perfect detector.
pub fn pns_counts(config: &ExperimentConfig, rot: &RotConfig) -> Result<Vec<u64>> {
    par_trials(config, "pns", |_, rng| {
        Ok(pns_bob_strategy(rot, 1.0, rng)?.conclusive.len() as u64)
    })
}

fn simulate_rot_pns(config: &ExperimentConfig, row: &ParamTableRow) -> Result<Report> {
    let rot = config.rot_config(row, config.eps1)?;
    let counts = pns_counts(config, &rot)?;
    let mut report = Report::new("simulate rot, photon-number-splitting Bob", config);
    let total: u64 = counts.iter().sum();
    report.line("conclusive_rate", proportion(total, config.trials * config.n_pulses), Some(row.p_con_mal));
    let above_half = counts.iter().filter(|&&c| 2 * c >= config.n_pulses).count() as u64;
    report.line("rate_at_least_half", proportion(above_half, config.trials), None);
    report.notes.push("a rate above 1/2 violates the channel bound; the 2 l_obt set threshold absorbs it".into());
    Ok(report)
}

fn simulate_ot(config: &ExperimentConfig, row: &ParamTableRow) -> Result<Report> {
    let rot = config.rot_config(row, config.eps1)?;
    let est = estimate_ot_failure(&rot, row, config.trials, config.seed)?;
    let mut report = Report::new("simulate ot, honest parties", config);
    report.line("failure_rate", proportion(est.failures, est.trials), Some(row.p_fail));
    report.line("padded_rate", proportion(est.padded, est.trials), Some(row.p1));
    report.line("aborted", proportion(est.aborted, est.trials), None);
    report.notes.push(format!(
        "analytic failure uses eps1_prime = {}; padded sets are often repaired by reconciliation",
        num(config.eps1_prime)
    ));
    Ok(report)
}

fn simulate_ot_pns(config: &ExperimentConfig, row: &ParamTableRow) -> Result<Report> {
    let rot = config.rot_config(row, config.eps1)?;
    let counts = pns_counts(config, &rot)?;
    let mut report = Report::new("simulate ot, photon-number-splitting Bob", config);
    let both = counts.iter().filter(|&&c| c >= 2 * row.l_obt).count() as u64;
    let p2 = binom_tail_ge(config.n_pulses, row.p_con_mal, 2 * row.l_obt)?;
    report.line("holds_both_sets", proportion(both, config.trials), Some(p2));
    let total: u64 = counts.iter().sum();
    report.line("conclusive_rate", proportion(total, config.trials * config.n_pulses), Some(row.p_con_mal));
    Ok(report)
}

/// Error rate used by the commitment experiments.
pub fn bc_error_rate(config: &ExperimentConfig, row: &ParamTableRow) -> Result<f64> {
    match config.operating_failure {
        None => Ok(config.eps1),
        Some(target) => {
            let rot = config.rot_config(row, 0.0)?;
            Ok(error_rate_for_failure(target, &rot, row, 2000, config.seed, 0.05)?)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HonestBcStats {
    pub commits: u64,
    pub accepted: u64,
    /// Accepted with the committed bit.
    pub correct: u64,
    pub ot_rounds: u64,
    pub ot_successes: u64,
    pub undecoded_rounds: u64,
}

/// Honest commitments to alternating bits; also returns trial 0's
/// transcript.
pub fn honest_bc(config: &ExperimentConfig, row: &ParamTableRow, eps: f64) -> Result<(HonestBcStats, CommitmentTranscript)> {
    let rot = config.rot_config(row, eps)?;
    let policy = config.verify_policy(eps);
    let l = config.bc_rounds as usize;
    let runs = par_trials(config, "bc", |i, rng| {
        let b = i % 2 == 1;
        let (mut t, report) = run_honest_bc(b, l, |r: &mut SimRng| run_rot(&rot, r), row, policy, rng)?;
        t.seed = Some(config.seed);
        let successes = t.rounds.iter().filter(|r| r.ot.outcome().success).count() as u64;
        let undecoded = report.decoded.iter().filter(|&&d| !d).count() as u64;
        let accepted = report.verdict.accepted();
        let transcript = (i == 0).then_some(t);
        Ok((accepted, b, successes, undecoded, transcript))
    })?;
    let mut stats = HonestBcStats {
        commits: config.trials,
        accepted: 0,
        correct: 0,
        ot_rounds: config.trials * l as u64,
        ot_successes: 0,
        undecoded_rounds: 0,
    };
    let mut first = None;
    for (accepted, b, successes, undecoded, transcript) in runs {
        stats.accepted += accepted.is_some() as u64;
        stats.correct += (accepted == Some(b)) as u64;
        stats.ot_successes += successes;
        stats.undecoded_rounds += undecoded;
        if transcript.is_some() {
            first = transcript;
        }
    }
    Ok((stats, first.expect("at least one trial")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheatStats {
    pub commits: u64,
    pub rounds: u64,
    pub detected_rounds: u64,
    pub successes: u64,
}

impl CheatStats {
    pub fn detection(&self) -> Estimate {
        proportion(self.detected_rounds, self.rounds)
    }
}

pub fn cheating_bc(config: &ExperimentConfig, row: &ParamTableRow, eps: f64) -> Result<CheatStats> {
    let rot = config.rot_config(row, eps)?;
    let policy = config.verify_policy(eps);
    let l = config.bc_rounds as usize;
    let runs = par_trials(config, "cheat", |_, rng| {
        let (b, report) = cheating_alice_strategy(l, |r: &mut SimRng| run_rot(&rot, r), row, policy, rng)?;
        Ok((report.detected_rounds as u64, report.succeeded(b)))
    })?;
    Ok(CheatStats {
        commits: config.trials,
        rounds: config.trials * l as u64,
        detected_rounds: runs.iter().map(|r| r.0).sum(),
        successes: runs.iter().filter(|r| r.1).count() as u64,
    })
}

fn simulate_bc(config: &ExperimentConfig, row: &ParamTableRow) -> Result<(Report, String)> {
    let eps = bc_error_rate(config, row)?;
    let (stats, transcript) = honest_bc(config, row, eps)?;
    let mut report = Report::new("simulate bc, honest parties", config);
    report.line("accept_rate", proportion(stats.accepted, stats.commits), None);
    report.line("accepted_correct_bit", proportion(stats.correct, stats.commits), None);
    report.line("ot_success_rate", proportion(stats.ot_successes, stats.ot_rounds), Some(1.0 - row.p_fail));
    report.line("undecoded_round_rate", proportion(stats.undecoded_rounds, stats.ot_rounds), None);
    report.notes.push(format!("physical error rate {}", num(eps)));
    Ok((report, transcript.to_json()))
}

fn simulate_bc_cheat(config: &ExperimentConfig, row: &ParamTableRow) -> Result<Report> {
    let eps = bc_error_rate(config, row)?;
    let stats = cheating_bc(config, row, eps)?;
    let mut report = Report::new("simulate bc, cheating Alice", config);
    let d = stats.detection();
    report.line("per_round_detection", d, Some(BINDING_DETECTION_PER_ROUND));
    let l = config.bc_rounds;
    report.line(
        "attack_success",
        proportion(stats.successes, stats.commits),
        Some(p_binding_break(l, d.value)?),
    );
    report.notes.push(format!(
        "physical error rate {}; reference power (1 - 0.4)^{l} = {}",
        num(eps),
        num(p_binding_break(l, BINDING_DETECTION_PER_ROUND)?)
    ));
    Ok(report)
}

/// Result of `simulate`: the report and, for commitments, trial 0's
/// transcript as JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub report: Report,
    pub transcript: Option<String>,
}

pub fn simulate(config: &ExperimentConfig, which: Which, adversary: Adversary) -> Result<SimOutput> {
    let row = config.row()?;
    let plain = |report| SimOutput { report, transcript: None };
    match (which, adversary) {
        (Which::Rot, Adversary::None) => Ok(plain(simulate_rot(config, &row)?)),
        (Which::Rot, Adversary::PnsBob) => Ok(plain(simulate_rot_pns(config, &row)?)),
        (Which::Ot, Adversary::None) => Ok(plain(simulate_ot(config, &row)?)),
        (Which::Ot, Adversary::PnsBob) => Ok(plain(simulate_ot_pns(config, &row)?)),
        (Which::Bc, Adversary::None) => {
            let (report, json) = simulate_bc(config, &row)?;
            Ok(SimOutput { report, transcript: Some(json) })
        }
        (Which::Bc, Adversary::CheatingAlice) => Ok(plain(simulate_bc_cheat(config, &row)?)),
        (which, adversary) => Err(usage(format!(
            "adversary {adversary:?} does not apply to {which:?}; use pns_bob with rot or ot, cheating_alice with bc"
        ))),
    }
}

pub const MIN_RECONCILE_TRIALS: u64 = 10_000;

pub fn reconcile_bench(config: &ExperimentConfig) -> Result<Report> {
    if config.trials < MIN_RECONCILE_TRIALS {
        return Err(usage(format!("reconcile-bench needs at least {MIN_RECONCILE_TRIALS} trials")));
    }
    let est = estimate_residual(
        config.reconcile_len,
        config.eps1,
        config.trials,
        config.reconcile_rounds,
        config.seed,
    )?;
    let mut report = Report::new(
        format!(
            "reconciliation residual, len {} eps1 {} rounds {}",
            config.reconcile_len,
            num(config.eps1),
            config.reconcile_rounds
        ),
        config,
    );
    report.line(
        "residual_bit_error_rate",
        Estimate {
            value: est.rate,
            low: est.ci_low,
            high: est.ci_high,
        },
        Some(config.eps1_prime),
    );
    report.notes.push(format!(
        "{} output bits over {} trials; reference line eps1_prime = 0.000757",
        est.output_bits, est.trials
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(trials: u64) -> ExperimentConfig {
        ExperimentConfig {
            trials,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn invalid_combinations_are_usage_errors() {
        let config = small(1);
        for (w, a) in [
            (Which::Rot, Adversary::CheatingAlice),
            (Which::Ot, Adversary::CheatingAlice),
            (Which::Bc, Adversary::PnsBob),
        ] {
            let err = simulate(&config, w, a).unwrap_err();
            assert!(err.is::<crate::config::UsageError>());
        }
    }

    #[test]
    fn rot_report_tracks_analytics() {
        let out = simulate(&small(300), Which::Rot, Adversary::None).unwrap();
        let line = out.report.get("conclusive_count").unwrap();
        assert!(line.estimate.contains(line.analytic.unwrap()) || (line.estimate.value - line.analytic.unwrap()).abs() < 2.0);
        assert!(out.report.notes[0].starts_with("calibration accepted"));
    }

    #[test]
    fn honest_bc_error_free() {
        let config = ExperimentConfig {
            eps1: 0.0,
            bc_rounds: 5,
            ..small(20)
        };
        let out = simulate(&config, Which::Bc, Adversary::None).unwrap();
        assert_eq!(out.report.get("accept_rate").unwrap().estimate.value, 1.0);
        let json = out.transcript.unwrap();
        let t = CommitmentTranscript::from_json(&json).unwrap();
        assert_eq!(t.seed, Some(1));
        assert_eq!(t.rounds.len(), 5);
    }

    #[test]
    fn reconcile_bench_needs_trials() {
        assert!(reconcile_bench(&small(10)).unwrap_err().is::<crate::config::UsageError>());
    }

    #[test]
    fn reports_are_reproducible() {
        let config = small(50);
        let a = simulate(&config, Which::Ot, Adversary::PnsBob).unwrap().report.render();
        let b = simulate(&config, Which::Ot, Adversary::PnsBob).unwrap().report.render();
        assert_eq!(a, b);
    }
}
