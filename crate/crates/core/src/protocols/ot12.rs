//! 1-of-2 oblivious transfer on top of a random-OT session.
//!
//! Bob splits the pulse indices into a set `I` of conclusive positions and
//! a random disjoint set `J`, and sends them as `(X, Y)` with `X = I` iff he
//! wants message 0. Both sets are reconciled; the surviving bits of Alice's
//! `r` over `X` and `Y` are the keys `x` and `y`.
//!
//! Encryption is a one-time pad on `R` plus key-parity masking of `b`:
//! `E_key(R, b) = (R xor key) || (b xor parity(key))`.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::ParamTableRow;
use crate::error::{check_probability, Error, Result};
use crate::protocols::rot::{run_rot, RotConfig, RotSession};
use crate::reconciliation::wilson_interval;
use crate::rng;
use crate::reconciliation::{reconcile, PermutationSpec, SyndromeTranscript, DEFAULT_ROUNDS};

fn parity(bits: &[bool]) -> bool {
    bits.iter().fold(false, |acc, &b| acc ^ b)
}

pub fn encrypt(key: &[bool], r: &[bool], b: bool) -> Result<Vec<bool>> {
    if key.len() != r.len() {
        return Err(Error::Length {
            what: "message",
            expected: key.len(),
            found: r.len(),
        });
    }
    let mut c: Vec<bool> = key.iter().zip(r).map(|(k, r)| k ^ r).collect();
    c.push(b ^ parity(key));
    Ok(c)
}

pub fn decrypt(key: &[bool], c: &[bool]) -> Result<(Vec<bool>, bool)> {
    if c.len() != key.len() + 1 {
        return Err(Error::Length {
            what: "ciphertext",
            expected: key.len() + 1,
            found: c.len(),
        });
    }
    let r = key.iter().zip(c).map(|(k, c)| k ^ c).collect();
    Ok((r, c[key.len()] ^ parity(key)))
}

/// One index set as sent, with its reconciliation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconciledSet {
    /// Pulse indices, ascending.
    pub indices: Vec<usize>,
    /// Seeds Alice chose for this set.
    pub spec: PermutationSpec,
    pub syndromes: SyndromeTranscript,
    /// Positions within `indices` that survive reconciliation, ascending.
    pub kept: Vec<usize>,
}

impl ReconciledSet {
    /// Pulse indices whose bits form the key.
    pub fn key_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.kept.iter().map(|&p| self.indices[p])
    }

    /// Key over `bits`, indexed by pulse.
    pub fn key_from(&self, bits: &[bool]) -> Vec<bool> {
        self.key_indices().map(|i| bits[i]).collect()
    }
}

/// Full record of one transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtSession {
    pub rot: RotSession,
    /// Bob's conclusive set, ascending.
    pub set_i: Vec<usize>,
    /// Bob's decoy set, ascending.
    pub set_j: Vec<usize>,
    /// Non-conclusive indices Bob had to put into `I`.
    pub padded: usize,
    /// Which message Bob wants.
    pub m: bool,
    pub x: ReconciledSet,
    pub y: ReconciledSet,
    pub k: usize,
    pub r0: Vec<bool>,
    pub r1: Vec<bool>,
    pub b0: bool,
    pub b1: bool,
    pub c0: Vec<bool>,
    pub c1: Vec<bool>,
    /// Bob's reconciled key for `I`.
    pub bob_key: Vec<bool>,
    /// What Bob decrypted from `c_m`.
    pub bob_r: Vec<bool>,
    pub bob_b: bool,
}

impl OtSession {
    /// The set sent as `X` or `Y` that Bob can decrypt with.
    pub fn chosen(&self) -> &ReconciledSet {
        if self.m {
            &self.y
        } else {
            &self.x
        }
    }

    pub fn other(&self) -> &ReconciledSet {
        if self.m {
            &self.x
        } else {
            &self.y
        }
    }

    pub fn message(&self, which: bool) -> (&[bool], bool) {
        if which {
            (&self.r1, self.b1)
        } else {
            (&self.r0, self.b0)
        }
    }

    /// Alice's key for the set Bob chose.
    pub fn alice_key(&self) -> Vec<bool> {
        self.chosen().key_from(&self.rot.alice_bits)
    }

    pub fn outcome(&self) -> OtOutcome {
        let (r, b) = self.message(self.m);
        OtOutcome {
            success: self.bob_r == r && self.bob_b == b,
            key_matches: self.bob_key == self.alice_key(),
            padded: self.padded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OtOutcome {
    /// Bob recovered both `R_m` and `b_m`.
    pub success: bool,
    pub key_matches: bool,
    pub padded: usize,
}

/// Bob's value for pulse `i`: his conclusive bit, or a guess.
fn bob_value<R: Rng + ?Sized>(rot: &RotSession, i: usize, rng: &mut R) -> bool {
    rot.conclusive_value(i).unwrap_or_else(|| rng.random_bool(0.5))
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Runs the transfer of `(b0, b1)` to an honest Bob who wants a random
/// message.
///
/// Each set holds `row.l_obt` indices. If Bob holds fewer conclusive bits he
/// pads `I` with random non-conclusive ones and will most likely decrypt
/// garbage.
pub fn run_ot12<R: Rng + ?Sized>(
    rot: RotSession,
    b0: bool,
    b1: bool,
    row: &ParamTableRow,
    rng: &mut R,
) -> Result<OtSession> {
    let m = rng.random_bool(0.5);
    run_ot12_with_choice(rot, b0, b1, m, row, rng)
}

/// [`run_ot12`] with Bob's choice fixed.
pub fn run_ot12_with_choice<R: Rng + ?Sized>(
    rot: RotSession,
    b0: bool,
    b1: bool,
    m: bool,
    row: &ParamTableRow,
    rng: &mut R,
) -> Result<OtSession> {
    let n = rot.n_pulses();
    let size = row.l_obt as usize;
    if size == 0 || 2 * size > n {
        return Err(Error::TooFewPulses {
            pulses: n,
            set_size: size,
        });
    }

    // Bob: choose I among conclusive pulses, J uniformly from the rest.
    let conclusive: Vec<usize> = rot.conclusive.iter().map(|&(i, _)| i).collect();
    let mut in_i = vec![false; n];
    let padded = size.saturating_sub(conclusive.len());
    if padded == 0 {
        for p in sample(rng, conclusive.len(), size) {
            in_i[conclusive[p]] = true;
        }
    } else {
        for &i in &conclusive {
            in_i[i] = true;
        }
        let others: Vec<usize> = (0..n).filter(|&i| !in_i[i]).collect();
        for p in sample(rng, others.len(), padded) {
            in_i[others[p]] = true;
        }
    }
    let rest: Vec<usize> = (0..n).filter(|&i| !in_i[i]).collect();
    let set_j = sorted(sample(rng, rest.len(), size).into_iter().map(|p| rest[p]).collect());
    let set_i: Vec<usize> = (0..n).filter(|&i| in_i[i]).collect();
    let (x_indices, y_indices) = if m {
        (set_j.clone(), set_i.clone())
    } else {
        (set_i.clone(), set_j.clone())
    };

    // Bob's guess at r over every index he sends.
    let mut bob_bits = vec![false; n];
    for &i in x_indices.iter().chain(&y_indices) {
        bob_bits[i] = bob_value(&rot, i, rng);
    }

    // Alice: reconcile both sets with fresh public seeds.
    let reconcile_set = |indices: Vec<usize>, rng: &mut R| -> Result<(ReconciledSet, Vec<bool>)> {
        let spec = PermutationSpec::random(DEFAULT_ROUNDS, rng);
        let alice: Vec<bool> = indices.iter().map(|&i| rot.alice_bits[i]).collect();
        let bob: Vec<bool> = indices.iter().map(|&i| bob_bits[i]).collect();
        let out = reconcile(&alice, &bob, &spec)?;
        Ok((
            ReconciledSet {
                indices,
                spec,
                syndromes: out.transcript,
                kept: out.kept,
            },
            out.bob,
        ))
    };
    let (x, bob_x) = reconcile_set(x_indices, rng)?;
    let (y, bob_y) = reconcile_set(y_indices, rng)?;

    let key_x = x.key_from(&rot.alice_bits);
    let key_y = y.key_from(&rot.alice_bits);
    let k = key_x.len();
    let r0: Vec<bool> = (0..k).map(|_| rng.random()).collect();
    let r1: Vec<bool> = (0..k).map(|_| rng.random()).collect();
    let c0 = encrypt(&key_x, &r0, b0)?;
    let c1 = encrypt(&key_y, &r1, b1)?;

    let bob_key = if m { bob_y } else { bob_x };
    let (bob_r, bob_b) = decrypt(&bob_key, if m { &c1 } else { &c0 })?;

    Ok(OtSession {
        rot,
        set_i,
        set_j,
        padded,
        m,
        x,
        y,
        k,
        r0,
        r1,
        b0,
        b1,
        c0,
        c1,
        bob_key,
        bob_r,
        bob_b,
    })
}

/// Monte Carlo failure rate of honest transfers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureEstimate {
    pub trials: u64,
    /// Runs where Bob did not recover `(R_m, b_m)`, aborts included.
    pub failures: u64,
    /// Runs whose random-OT session aborted.
    pub aborted: u64,
    /// Runs where Bob had to pad `I`.
    pub padded: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Runs `trials` honest transfers; trial `i` draws from substream `i` of
/// `seed`.
pub fn estimate_ot_failure(
    config: &RotConfig,
    row: &ParamTableRow,
    trials: u64,
    seed: u64,
) -> Result<FailureEstimate> {
    config.validate()?;
    let outcomes: Vec<Result<Option<OtOutcome>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::substream(seed, "ot-failure", t);
            let rot = match run_rot(config, &mut rng) {
                Ok(rot) => rot,
                Err(Error::InsufficientConclusive { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let (b0, b1) = (rng.random(), rng.random());
            Ok(Some(run_ot12(rot, b0, b1, row, &mut rng)?.outcome()))
        })
        .collect();
    let (mut failures, mut aborted, mut padded) = (0, 0, 0);
    for outcome in outcomes {
        match outcome? {
            None => {
                aborted += 1;
                failures += 1;
            }
            Some(o) => {
                failures += !o.success as u64;
                padded += (o.padded > 0) as u64;
            }
        }
    }
    let (ci_low, ci_high) = wilson_interval(failures, trials);
    Ok(FailureEstimate {
        trials,
        failures,
        aborted,
        padded,
        rate: failures as f64 / trials.max(1) as f64,
        ci_low,
        ci_high,
    })
}

/// Bisects the physical error rate in `[0, hi]` until the measured transfer
/// failure rate meets `target`. Every probe reuses the same substreams, so
/// the measured rate moves monotonically with the error rate up to noise.
pub fn error_rate_for_failure(
    target: f64,
    config: &RotConfig,
    row: &ParamTableRow,
    trials: u64,
    seed: u64,
    hi: f64,
) -> Result<f64> {
    check_probability("target", target)?;
    check_probability("hi", hi)?;
    let failure_at = |eps: f64| -> Result<f64> {
        let mut probe = *config;
        probe.system = probe.system.with_error(eps)?;
        Ok(estimate_ot_failure(&probe, row, trials, seed)?.rate)
    };
    let (mut lo, mut hi) = (0.0, hi);
    if failure_at(hi)? < target {
        return Err(Error::Domain {
            name: "target",
            value: target,
            reason: "not reached within the error-rate range",
        });
    }
    for _ in 0..24 {
        let mid = 0.5 * (lo + hi);
        if failure_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Exact distribution of the ciphertext of the unchosen message as Bob sees
/// it, over every `R` and every key bit unknown to him.
///
/// `known_key[j]` is `Some(bit)` where Bob knows key bit `j`. Returns the
/// count of each ciphertext over the `2^(k + unknown)` equally likely cases.
///
/// # Panics
///
/// If the enumeration would exceed `2^24` cases.
pub fn view_distribution(known_key: &[Option<bool>], b: bool) -> BTreeMap<Vec<bool>, u64> {
    let k = known_key.len();
    let unknown: Vec<usize> = (0..k).filter(|&j| known_key[j].is_none()).collect();
    let bits = k + unknown.len();
    assert!(bits <= 24, "view enumeration over 2^{bits} cases");
    let mut counts = BTreeMap::new();
    for r_mask in 0u64..1 << k {
        let r: Vec<bool> = (0..k).map(|j| r_mask >> j & 1 == 1).collect();
        for u_mask in 0u64..1 << unknown.len() {
            let mut key: Vec<bool> = known_key.iter().map(|b| b.unwrap_or(false)).collect();
            for (t, &j) in unknown.iter().enumerate() {
                key[j] = u_mask >> t & 1 == 1;
            }
            let c = encrypt(&key, &r, b).expect("equal lengths");
            *counts.entry(c).or_insert(0) += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{binom_cdf_le, select_params, SelectionConfig, SystemParams};
    use crate::rng::{from_seed, substream};
    use proptest::prelude::{any, prop_assert_eq, proptest};

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    fn row5() -> ParamTableRow {
        *select_params(5.0, &SelectionConfig::default()).unwrap().row().unwrap()
    }

    fn rot5(eps: f64, seed: u64) -> RotSession {
        let row = row5();
        let system = SystemParams::ideal_for_mu(5.0, 0.8).unwrap().with_error(eps).unwrap();
        let cfg = RotConfig::new(system, row.n_pulses, 0.95 * row.a, 0.005, row.l_obt).unwrap();
        run_rot(&cfg, &mut substream(seed, "rot", 0)).unwrap()
    }

    #[test]
    fn hand_example() {
        assert_eq!(encrypt(&bits("101"), &bits("110"), true).unwrap(), bits("0111"));
        assert_eq!(decrypt(&bits("101"), &bits("0111")).unwrap(), (bits("110"), true));
        assert_eq!(encrypt(&bits("000"), &bits("110"), true).unwrap(), bits("1101"));
        assert!(encrypt(&bits("10"), &bits("110"), true).is_err());
        assert!(decrypt(&bits("10"), &bits("110")).is_ok());
        assert!(decrypt(&bits("10"), &bits("1101")).is_err());
    }

    #[test]
    fn single_key_error_corrupts() {
        let key = bits("1100101");
        let r = bits("0110011");
        let c = encrypt(&key, &r, false).unwrap();
        for j in 0..key.len() {
            let mut wrong = key.clone();
            wrong[j] ^= true;
            let (r2, b2) = decrypt(&wrong, &c).unwrap();
            assert_ne!(r2, r);
            assert!(b2);
        }
    }

    #[test]
    fn error_free_transfer_succeeds() {
        for seed in 0..20 {
            let rot = rot5(0.0, seed);
            let held = rot.conclusive.len();
            let s = run_ot12(rot, true, false, &row5(), &mut substream(seed, "ot", 0)).unwrap();
            if held >= row5().l_obt as usize {
                assert_eq!(s.padded, 0);
                assert!(s.outcome().success);
                assert!(s.outcome().key_matches);
            }
        }
    }

    #[test]
    fn session_invariants() {
        let row = row5();
        let s = run_ot12(rot5(0.003, 1), false, true, &row, &mut from_seed(2)).unwrap();
        assert_eq!(s.set_i.len(), row.l_obt as usize);
        assert_eq!(s.set_j.len(), row.l_obt as usize);
        assert!(s.set_i.iter().all(|i| s.set_j.binary_search(i).is_err()));
        assert_eq!(s.k as u64, row.k);
        assert_eq!(s.c0.len(), s.k + 1);
        assert!(s.x.indices.windows(2).all(|w| w[0] < w[1]));
        let (ci, _) = if s.m { (&s.y, &s.x) } else { (&s.x, &s.y) };
        assert_eq!(ci.indices, s.set_i);
        if s.padded == 0 {
            assert!(s.set_i.iter().all(|&i| s.rot.conclusive_value(i).is_some()));
        }
    }

    #[test]
    fn pads_short_sets() {
        let mut rot = rot5(0.0, 3);
        rot.conclusive.truncate(100);
        let s = run_ot12(rot, false, false, &row5(), &mut from_seed(4)).unwrap();
        assert_eq!(s.padded, row5().l_obt as usize - 100);
        assert_eq!(s.set_i.len(), row5().l_obt as usize);
        assert!(!s.outcome().key_matches);
    }

    #[test]
    fn too_few_pulses() {
        let mut row = row5();
        row.l_obt = 500;
        assert!(matches!(
            run_ot12(rot5(0.0, 5), false, false, &row, &mut from_seed(6)),
            Err(Error::TooFewPulses { .. })
        ));
    }

    #[test]
    fn choice_is_uniform() {
        let rot = rot5(0.0, 9);
        let ones = (0..400)
            .filter(|&i| run_ot12(rot.clone(), false, false, &row5(), &mut from_seed(i)).unwrap().m)
            .count();
        assert!((ones as f64 / 400.0 - 0.5).abs() < 0.08, "{ones}");
        let s0 = run_ot12_with_choice(rot5(0.0, 7), false, true, false, &row5(), &mut from_seed(8)).unwrap();
        let s1 = run_ot12_with_choice(rot5(0.0, 7), false, true, true, &row5(), &mut from_seed(8)).unwrap();
        assert_eq!(s0.x.indices, s1.y.indices);
        assert_eq!(s0.y.indices, s1.x.indices);
        assert!(!s0.bob_b);
        assert!(s1.bob_b);
    }

    #[test]
    fn failure_rate_tracks_budget() {
        let row = row5();
        let system = SystemParams::ideal_for_mu(5.0, 0.8).unwrap();
        let mut cfg = RotConfig::new(system, row.n_pulses, 0.95 * row.a, 0.005, row.l_obt).unwrap();
        let clean = estimate_ot_failure(&cfg, &row, 2000, 1).unwrap();
        assert_eq!(clean.aborted, 0);
        // Padding happens exactly when fewer than l_obt pulses are
        // conclusive; reconciliation repairs some of the guessed bits, so
        // failures stay below the padding rate.
        let short = binom_cdf_le(row.n_pulses, row.p_con, row.l_obt - 1).unwrap();
        let expected = clean.trials as f64 * short;
        let sd = (expected * (1.0 - short)).sqrt();
        assert!((clean.padded as f64 - expected).abs() < 4.0 * sd, "{clean:?} vs {short}");
        assert!(clean.failures <= clean.padded);

        cfg.system = cfg.system.with_error(0.003).unwrap();
        let noisy = estimate_ot_failure(&cfg, &row, 2000, 1).unwrap();
        assert!(noisy.rate > clean.rate && noisy.rate <= 0.2, "{noisy:?}");

        let eps = error_rate_for_failure(0.2, &cfg, &row, 1000, 2, 0.02).unwrap();
        cfg.system = cfg.system.with_error(eps).unwrap();
        let at = estimate_ot_failure(&cfg, &row, 1000, 2).unwrap();
        assert!((at.rate - 0.2).abs() < 0.01, "{eps}: {at:?}");
        assert!(eps > 0.003);
    }

    #[test]
    fn hiding_by_enumeration() {
        for k in 1..=4usize {
            for known_mask in 0u32..(1 << k) {
                for known_values in 0u32..(1 << k) {
                    let known: Vec<Option<bool>> = (0..k)
                        .map(|j| (known_mask >> j & 1 == 1).then_some(known_values >> j & 1 == 1))
                        .collect();
                    let d0 = view_distribution(&known, false);
                    let d1 = view_distribution(&known, true);
                    let all_known = known.iter().all(Option::is_some);
                    assert_eq!(d0 == d1, !all_known, "k={k} known={known:?}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip(key in proptest::collection::vec(any::<bool>(), 0..64), seed: u64, b: bool) {
            let mut rng = from_seed(seed);
            let r: Vec<bool> = key.iter().map(|_| rng.random()).collect();
            let c = encrypt(&key, &r, b).unwrap();
            prop_assert_eq!(c.len(), key.len() + 1);
            prop_assert_eq!(decrypt(&key, &c).unwrap(), (r, b));
        }
    }
}
