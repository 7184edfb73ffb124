//! Bit commitment from repeated 1-of-2 transfers.
//!
//! Commit: for each of `l` rounds Alice splits `b = b0 xor b1` at random and
//! transfers `(b0, b1)`; Bob keeps the one he chose. Open: Alice reveals every
//! split, both `R` strings and her `r` bits over both index sets, and Bob
//! checks them against what he decrypted and what he measured.
//!
//! Transcripts serialize to JSON with a fixed field order and a version tag.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::ParamTableRow;
use crate::error::{Error, Result};
use crate::protocols::ot12::{run_ot12, OtSession};
use crate::protocols::rot::RotSession;
use crate::protocols::TRANSCRIPT_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitRound {
    pub b0: bool,
    pub b1: bool,
    pub ot: OtSession,
}

/// What Alice reveals for one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenedRound {
    pub b0: bool,
    pub b1: bool,
    pub r0: Vec<bool>,
    pub r1: Vec<bool>,
    /// Alice's `r` over `X`, aligned with its indices.
    pub x_values: Vec<bool>,
    pub y_values: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opening {
    pub rounds: Vec<OpenedRound>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    NoRounds,
    /// Revealed values do not fit the committed sets.
    Malformed,
    /// A split does not XOR to the common bit.
    SplitMismatch,
    /// Bob decoded the round and Alice's message differs from his.
    DecryptedMismatch,
    /// Revealed `r` bits contradict too many of Bob's conclusive records.
    RecordMismatch { mismatches: usize, records: usize },
    TooManyUndecoded { undecoded: usize, allowed: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accept(bool),
    Reject {
        round: Option<usize>,
        reason: RejectReason,
    },
}

impl Verdict {
    pub fn accepted(&self) -> Option<bool> {
        match *self {
            Verdict::Accept(b) => Some(b),
            Verdict::Reject { .. } => None,
        }
    }
}

/// How much disagreement Bob tolerates at opening.
///
/// A round is decoded when Bob's reconciled key equals the key rebuilt from
/// the revealed `r` bits; only decoded rounds can be checked against his
/// decryption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyPolicy {
    /// Allowed fraction of Bob's conclusive records contradicted by the
    /// revealed `r` bits.
    pub max_record_mismatch_rate: f64,
    /// Allowed fraction of rounds Bob failed to decode.
    pub max_undecoded_fraction: f64,
}

impl VerifyPolicy {
    /// No record may disagree.
    pub fn strict() -> Self {
        Self {
            max_record_mismatch_rate: 0.0,
            max_undecoded_fraction: 0.5,
        }
    }

    /// Tolerates record disagreement up to twice the agreed error rate.
    pub fn for_error_rate(eps_set: f64) -> Self {
        Self {
            max_record_mismatch_rate: 2.0 * eps_set,
            ..Self::strict()
        }
    }
}

impl Default for VerifyPolicy {
    fn default() -> Self {
        Self::strict()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub verdict: Verdict,
    pub decoded: Vec<bool>,
    pub record_mismatches: usize,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitmentTranscript {
    pub version: u32,
    /// Master seed the session was driven by, when known.
    pub seed: Option<u64>,
    pub b: bool,
    pub rounds: Vec<CommitRound>,
    pub opening: Option<Opening>,
    pub verdict: Option<Verdict>,
}

impl CommitmentTranscript {
    pub fn bob_selectors(&self) -> Vec<bool> {
        self.rounds.iter().map(|r| r.ot.m).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        if t.version != TRANSCRIPT_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported transcript version {}",
                t.version
            )));
        }
        Ok(t)
    }

    /// Alice's honest opening.
    pub fn honest_opening(&self) -> Opening {
        Opening {
            rounds: self
                .rounds
                .iter()
                .map(|round| {
                    let ot = &round.ot;
                    let r = &ot.rot.alice_bits;
                    OpenedRound {
                        b0: round.b0,
                        b1: round.b1,
                        r0: ot.r0.clone(),
                        r1: ot.r1.clone(),
                        x_values: ot.x.indices.iter().map(|&i| r[i]).collect(),
                        y_values: ot.y.indices.iter().map(|&i| r[i]).collect(),
                    }
                })
                .collect(),
        }
    }
}

/// Commit phase: `l` transfers of fresh random splits of `b`, each over a
/// session from `rot_factory`.
pub fn bc_commit<R, F>(
    b: bool,
    l: usize,
    mut rot_factory: F,
    row: &ParamTableRow,
    rng: &mut R,
) -> Result<CommitmentTranscript>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<RotSession>,
{
    if l == 0 {
        return Err(Error::Domain {
            name: "l",
            value: 0.0,
            reason: "at least one round is required",
        });
    }
    let mut rounds = Vec::with_capacity(l);
    for round in 0..l {
        let abort = |source| Error::RoundAborted {
            round,
            source: Box::new(source),
        };
        let b0 = rng.random_bool(0.5);
        let b1 = b ^ b0;
        let rot = rot_factory(rng).map_err(abort)?;
        let ot = run_ot12(rot, b0, b1, row, rng).map_err(abort)?;
        rounds.push(CommitRound { b0, b1, ot });
    }
    Ok(CommitmentTranscript {
        version: TRANSCRIPT_VERSION,
        seed: None,
        b,
        rounds,
        opening: None,
        verdict: None,
    })
}

fn reject(round: Option<usize>, reason: RejectReason) -> Verdict {
    Verdict::Reject { round, reason }
}

/// Bob's checks at opening. Uses only what Bob holds: his choices, his
/// decryptions, his reconciled keys and his conclusive records.
pub fn bc_open_verify(t: &CommitmentTranscript, opening: &Opening, policy: VerifyPolicy) -> VerifyReport {
    let mut report = VerifyReport {
        verdict: reject(None, RejectReason::NoRounds),
        decoded: Vec::new(),
        record_mismatches: 0,
        records: 0,
    };
    if t.rounds.is_empty() {
        return report;
    }
    if opening.rounds.len() != t.rounds.len() {
        report.verdict = reject(None, RejectReason::Malformed);
        return report;
    }
    for (i, (round, open)) in t.rounds.iter().zip(&opening.rounds).enumerate() {
        let ot = &round.ot;
        if open.x_values.len() != ot.x.indices.len()
            || open.y_values.len() != ot.y.indices.len()
            || open.r0.len() != ot.k
            || open.r1.len() != ot.k
        {
            report.verdict = reject(Some(i), RejectReason::Malformed);
            return report;
        }
    }

    let b = opening.rounds[0].b0 ^ opening.rounds[0].b1;
    if let Some(i) = opening.rounds.iter().position(|o| o.b0 ^ o.b1 != b) {
        report.verdict = reject(Some(i), RejectReason::SplitMismatch);
        return report;
    }

    let mut first_record_mismatch = None;
    for (i, (round, open)) in t.rounds.iter().zip(&opening.rounds).enumerate() {
        let ot = &round.ot;
        let (set, values) = if ot.m {
            (&ot.y, &open.y_values)
        } else {
            (&ot.x, &open.x_values)
        };
        let revealed_key: Vec<bool> = set.kept.iter().map(|&p| values[p]).collect();
        let decoded = revealed_key == ot.bob_key;
        report.decoded.push(decoded);
        let (r_m, b_m) = if ot.m {
            (&open.r1, open.b1)
        } else {
            (&open.r0, open.b0)
        };
        if decoded && (*r_m != ot.bob_r || b_m != ot.bob_b) {
            report.verdict = reject(Some(i), RejectReason::DecryptedMismatch);
            return report;
        }

        for (indices, values) in [(&ot.x.indices, &open.x_values), (&ot.y.indices, &open.y_values)] {
            for (&index, &value) in indices.iter().zip(values) {
                if let Some(measured) = ot.rot.conclusive_value(index) {
                    report.records += 1;
                    if measured != value {
                        report.record_mismatches += 1;
                        first_record_mismatch.get_or_insert(i);
                    }
                }
            }
        }
    }

    let allowed = (policy.max_record_mismatch_rate * report.records as f64).floor() as usize;
    if report.record_mismatches > allowed {
        report.verdict = reject(
            first_record_mismatch,
            RejectReason::RecordMismatch {
                mismatches: report.record_mismatches,
                records: report.records,
            },
        );
        return report;
    }

    let undecoded = report.decoded.iter().filter(|&&d| !d).count();
    let allowed = (policy.max_undecoded_fraction * t.rounds.len() as f64).floor() as usize;
    if undecoded > allowed {
        report.verdict = reject(None, RejectReason::TooManyUndecoded { undecoded, allowed });
        return report;
    }
    report.verdict = Verdict::Accept(b);
    report
}

/// Commits, opens honestly and verifies, storing the opening and verdict in
/// the returned transcript.
pub fn run_honest_bc<R, F>(
    b: bool,
    l: usize,
    rot_factory: F,
    row: &ParamTableRow,
    policy: VerifyPolicy,
    rng: &mut R,
) -> Result<(CommitmentTranscript, VerifyReport)>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<RotSession>,
{
    let mut t = bc_commit(b, l, rot_factory, row, rng)?;
    let opening = t.honest_opening();
    let report = bc_open_verify(&t, &opening, policy);
    t.opening = Some(opening);
    t.verdict = Some(report.verdict);
    Ok((t, report))
}

/// Outcome of one binding attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheatReport {
    pub rounds: usize,
    /// Rounds where Alice flipped the bit Bob chose.
    pub flipped_chosen: usize,
    /// Rounds where the flip is caught: it hit Bob's choice and Bob decoded.
    pub detected_rounds: usize,
    pub verdict: Verdict,
}

impl CheatReport {
    /// Alice convinced Bob of the bit she did not commit to.
    pub fn succeeded(&self, committed: bool) -> bool {
        self.verdict.accepted() == Some(!committed)
    }
}

/// Alice commits to a random bit honestly, then tries to open the other
/// one by flipping a uniformly chosen half of every split.
pub fn cheating_alice_strategy<R, F>(
    l: usize,
    rot_factory: F,
    row: &ParamTableRow,
    policy: VerifyPolicy,
    rng: &mut R,
) -> Result<(bool, CheatReport)>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<RotSession>,
{
    let b = rng.random_bool(0.5);
    if l == 0 {
        return Ok((
            b,
            CheatReport {
                rounds: 0,
                flipped_chosen: 0,
                detected_rounds: 0,
                verdict: Verdict::Accept(!b),
            },
        ));
    }
    let t = bc_commit(b, l, rot_factory, row, rng)?;
    let mut opening = t.honest_opening();
    let mut flipped_chosen = 0;
    let mut flipped = Vec::with_capacity(l);
    for (round, open) in t.rounds.iter().zip(&mut opening.rounds) {
        let which = rng.random_bool(0.5);
        if which {
            open.b1 ^= true;
        } else {
            open.b0 ^= true;
        }
        let hit = which == round.ot.m;
        flipped_chosen += hit as usize;
        flipped.push(hit);
    }
    let report = bc_open_verify(&t, &opening, policy);
    // Bob's decoding does not depend on the opening, so score every round
    // against the honest one.
    let honest = bc_open_verify(&t, &t.honest_opening(), VerifyPolicy {
        max_record_mismatch_rate: 1.0,
        max_undecoded_fraction: 1.0,
    });
    let detected_rounds = flipped
        .iter()
        .zip(&honest.decoded)
        .filter(|&(&hit, &decoded)| hit && decoded)
        .count();
    Ok((
        b,
        CheatReport {
            rounds: l,
            flipped_chosen,
            detected_rounds,
            verdict: report.verdict,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{select_params, SelectionConfig, SystemParams};
    use crate::protocols::rot::{run_rot, RotConfig};
    use crate::rng::{from_seed, substream, SimRng};

    fn setup(eps: f64) -> (RotConfig, ParamTableRow) {
        let row = *select_params(5.0, &SelectionConfig::default()).unwrap().row().unwrap();
        let system = SystemParams::ideal_for_mu(5.0, 0.8).unwrap().with_error(eps).unwrap();
        let cfg = RotConfig::new(system, row.n_pulses, 0.95 * row.a, 0.005, row.l_obt).unwrap();
        (cfg, row)
    }

    fn commit(b: bool, l: usize, eps: f64, seed: u64) -> CommitmentTranscript {
        let (cfg, row) = setup(eps);
        bc_commit(b, l, |rng: &mut SimRng| run_rot(&cfg, rng), &row, &mut from_seed(seed)).unwrap()
    }

    #[test]
    fn honest_error_free_accepts() {
        for b in [false, true] {
            let t = commit(b, 25, 0.0, b as u64);
            assert_eq!(t.rounds.len(), 25);
            assert!(t.rounds.iter().all(|r| r.b0 ^ r.b1 == b));
            let report = bc_open_verify(&t, &t.honest_opening(), VerifyPolicy::strict());
            assert_eq!(report.verdict, Verdict::Accept(b));
            assert_eq!(report.record_mismatches, 0);
            for (round, decoded) in t.rounds.iter().zip(&report.decoded) {
                let outcome = round.ot.outcome();
                assert_eq!(*decoded, outcome.key_matches);
                if outcome.padded == 0 {
                    assert!(outcome.success);
                }
            }
        }
    }

    #[test]
    fn noisy_physics_needs_tolerance() {
        let t = commit(true, 25, 0.003, 3);
        let report = bc_open_verify(&t, &t.honest_opening(), VerifyPolicy::for_error_rate(0.005));
        assert_eq!(report.verdict, Verdict::Accept(true));
        assert!(report.record_mismatches > 0);
        let strict = bc_open_verify(&t, &t.honest_opening(), VerifyPolicy::strict());
        assert!(matches!(
            strict.verdict,
            Verdict::Reject {
                reason: RejectReason::RecordMismatch { .. },
                ..
            }
        ));
    }

    #[test]
    fn flipped_delivered_bit_is_rejected() {
        let t = commit(false, 25, 0.0, 4);
        let honest = bc_open_verify(&t, &t.honest_opening(), VerifyPolicy::strict());
        let round = honest.decoded.iter().position(|&d| d).unwrap();
        let mut opening = t.honest_opening();
        let open = &mut opening.rounds[round];
        if t.rounds[round].ot.m {
            open.b1 ^= true;
        } else {
            open.b0 ^= true;
        }
        // Keep the splits consistent so only the decryption check can fire.
        for other in opening.rounds.iter_mut().enumerate().filter(|(i, _)| *i != round) {
            other.1.b0 ^= true;
        }
        let report = bc_open_verify(&t, &opening, VerifyPolicy::strict());
        assert_eq!(
            report.verdict,
            Verdict::Reject {
                round: Some(round),
                reason: RejectReason::DecryptedMismatch
            }
        );
    }

    #[test]
    fn flipped_conclusive_record_in_decoy_set_is_rejected() {
        let mut t = commit(true, 3, 0.0, 5);
        let ot = &mut t.rounds[1].ot;
        let planted = ot.set_j[0];
        let truth = ot.rot.alice_bits[planted];
        if ot.rot.conclusive_value(planted).is_none() {
            let at = ot.rot.conclusive.partition_point(|&(i, _)| i < planted);
            ot.rot.conclusive.insert(at, (planted, truth));
        }
        let mut opening = t.honest_opening();
        let ot = &t.rounds[1].ot;
        let (decoy, values) = if ot.m {
            (&ot.x, &mut opening.rounds[1].x_values)
        } else {
            (&ot.y, &mut opening.rounds[1].y_values)
        };
        let position = decoy.indices.binary_search(&planted).unwrap();
        values[position] ^= true;
        let report = bc_open_verify(&t, &opening, VerifyPolicy::strict());
        assert_eq!(
            report.verdict,
            Verdict::Reject {
                round: Some(1),
                reason: RejectReason::RecordMismatch {
                    mismatches: 1,
                    records: report.records
                }
            }
        );
    }

    #[test]
    fn malformed_openings() {
        let t = commit(true, 2, 0.0, 6);
        let mut opening = t.honest_opening();
        opening.rounds.pop();
        assert_eq!(
            bc_open_verify(&t, &opening, VerifyPolicy::strict()).verdict,
            reject(None, RejectReason::Malformed)
        );
        let mut opening = t.honest_opening();
        opening.rounds[1].b0 ^= true;
        assert_eq!(
            bc_open_verify(&t, &opening, VerifyPolicy::strict()).verdict,
            reject(Some(1), RejectReason::SplitMismatch)
        );
        let mut opening = t.honest_opening();
        opening.rounds[0].r0.pop();
        assert_eq!(
            bc_open_verify(&t, &opening, VerifyPolicy::strict()).verdict,
            reject(Some(0), RejectReason::Malformed)
        );
    }

    #[test]
    fn zero_rounds() {
        let (cfg, row) = setup(0.0);
        let mut rng = from_seed(7);
        assert!(bc_commit(true, 0, |r: &mut SimRng| run_rot(&cfg, r), &row, &mut rng).is_err());
        let (b, report) =
            cheating_alice_strategy(0, |r: &mut SimRng| run_rot(&cfg, r), &row, VerifyPolicy::strict(), &mut rng)
                .unwrap();
        assert!(report.succeeded(b));
    }

    #[test]
    fn rot_abort_aborts_commit() {
        let (mut cfg, row) = setup(0.0);
        cfg.system.mu_s = 0.0;
        let err = bc_commit(true, 3, |r: &mut SimRng| run_rot(&cfg, r), &row, &mut from_seed(8)).unwrap_err();
        assert!(matches!(err, Error::RoundAborted { round: 0, .. }));
    }

    #[test]
    fn splits_are_uniform() {
        let config = SelectionConfig { n_pulses: 60, ..SelectionConfig::default() };
        let row = ParamTableRow::evaluate(5.0, 10, &config).unwrap();
        let system = SystemParams::ideal_for_mu(5.0, 0.8).unwrap();
        let cfg = RotConfig::new(system, 60, 0.9, 0.005, 10).unwrap();
        let trials = 10_000;
        let zeros = (0..trials)
            .filter(|&i| {
                let mut rng = substream(9, "split", i);
                let t = bc_commit(true, 1, |r: &mut SimRng| run_rot(&cfg, r), &row, &mut rng).unwrap();
                !t.rounds[0].b0
            })
            .count();
        assert!((zeros as f64 / trials as f64 - 0.5).abs() < 0.02, "{zeros}");
    }

    #[test]
    fn cheating_detection_without_noise() {
        let (cfg, row) = setup(0.0);
        let (mut detected, mut rounds, mut successes) = (0, 0, 0);
        for i in 0..40 {
            let mut rng = substream(10, "cheat", i);
            let (b, report) = cheating_alice_strategy(
                25,
                |r: &mut SimRng| run_rot(&cfg, r),
                &row,
                VerifyPolicy::strict(),
                &mut rng,
            )
            .unwrap();
            detected += report.detected_rounds;
            rounds += report.rounds;
            successes += report.succeeded(b) as usize;
            assert_eq!(report.succeeded(b), report.detected_rounds == 0);
        }
        let rate = detected as f64 / rounds as f64;
        let expected = 0.5 * (1.0 - row.p1);
        assert!((rate - expected).abs() < 0.05, "{rate} vs {expected}");
        assert!(successes <= 1);
    }

    #[test]
    fn transcripts_round_trip_and_replay() {
        let (cfg, row) = setup(0.003);
        let run = || {
            let mut rng = from_seed(11);
            let (mut t, _) = run_honest_bc(
                true,
                3,
                |r: &mut SimRng| run_rot(&cfg, r),
                &row,
                VerifyPolicy::for_error_rate(0.005),
                &mut rng,
            )
            .unwrap();
            t.seed = Some(11);
            t
        };
        let a = run();
        let json = a.to_json();
        assert_eq!(json, run().to_json());
        assert_eq!(CommitmentTranscript::from_json(&json).unwrap(), a);
        assert!(json.starts_with("{\"version\":1,"));
        let bumped = json.replacen("\"version\":1", "\"version\":9", 1);
        assert!(CommitmentTranscript::from_json(&bumped).is_err());
    }
}
