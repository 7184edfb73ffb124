//! Hamming (63,57,3) syndrome reconciliation over permuted blocks.
//!
//! One round: both parties permute their strings with a shared seed, cut the
//! result into 63-bit blocks, and Bob corrects each block with the XOR of
//! Alice's syndrome and his own. After the last round the six check
//! positions (1, 2, 4, 8, 16, 32) of every complete block of that round are
//! discarded from both strings, leaving `len - 6 floor(len / 63)` bits.
//!
//! When `len` is not a multiple of 63, the last block is topped up with the
//! first `delta` positions of the first block. Those positions are then
//! covered by two syndromes; corrections apply to the underlying position
//! and blocks are processed in order, so Bob's syndrome for the last block
//! already sees any fix made in the first. A string shorter than one block
//! is padded with zero bits known to both sides instead.
//!
//! # Syndrome transcript byte layout
//!
//! ```text
//! u32 LE  number of rounds R
//! per round:
//!   u32 LE  number of syndromes n
//!   ceil(6n / 8) bytes: syndromes packed MSB-first, 6 bits each,
//!                       zero-padded to a byte boundary
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::rng;

pub const BLOCK_LEN: usize = 63;
pub const CHECK_BITS: usize = 6;
/// 1-based positions of the check bits within a block.
pub const CHECK_POSITIONS: [usize; CHECK_BITS] = [1, 2, 4, 8, 16, 32];
pub const DEFAULT_ROUNDS: usize = 4;

/// Exactly 63 bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitBlock(Vec<bool>);

impl BitBlock {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.len() != BLOCK_LEN {
            return Err(Error::Length {
                what: "block",
                expected: BLOCK_LEN,
                found: bits.len(),
            });
        }
        Ok(Self(bits))
    }

    pub fn zeros() -> Self {
        Self(vec![false; BLOCK_LEN])
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Flips the bit at 1-based `position`.
    pub fn flip(&mut self, position: usize) {
        self.0[position - 1] ^= true;
    }
}

/// A 6-bit Hamming syndrome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Syndrome(u8);

impl Syndrome {
    pub const ZERO: Syndrome = Syndrome(0);

    pub fn new(value: u8) -> Result<Self> {
        if value as usize > BLOCK_LEN {
            return Err(Error::Domain {
                name: "syndrome",
                value: value as f64,
                reason: "must fit in six bits",
            });
        }
        Ok(Self(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// 1-based position flagged by this syndrome, if any.
    pub fn position(self) -> Option<usize> {
        (self.0 != 0).then_some(self.0 as usize)
    }
}

impl std::ops::BitXor for Syndrome {
    type Output = Syndrome;

    fn bitxor(self, rhs: Syndrome) -> Syndrome {
        Syndrome(self.0 ^ rhs.0)
    }
}

fn syndrome_of(bits: impl Iterator<Item = bool>) -> Syndrome {
    Syndrome(
        bits.enumerate()
            .filter(|&(_, bit)| bit)
            .fold(0u8, |acc, (j, _)| acc ^ (j as u8 + 1)),
    )
}

/// GF(2) sum of the 1-based positions holding a one.
pub fn syndrome(block: &BitBlock) -> Syndrome {
    syndrome_of(block.0.iter().copied())
}

/// Flips the position named by `s_diff`; a zero syndrome leaves the block
/// alone.
pub fn correct(block: &BitBlock, s_diff: Syndrome) -> BitBlock {
    let mut out = block.clone();
    if let Some(position) = s_diff.position() {
        out.flip(position);
    }
    out
}

/// Seeded Fisher-Yates permutation: `order[j]` is the source index placed
/// at position `j`.
pub fn permutation(len: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    let mut stream = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..len).rev() {
        let j = stream.random_range(0..=i);
        order.swap(i, j);
    }
    order
}

pub fn permute(bits: &[bool], seed: u64) -> Vec<bool> {
    permutation(bits.len(), seed)
        .into_iter()
        .map(|i| bits[i])
        .collect()
}

pub fn inverse_permute(bits: &[bool], seed: u64) -> Vec<bool> {
    let mut out = vec![false; bits.len()];
    for (j, i) in permutation(bits.len(), seed).into_iter().enumerate() {
        out[i] = bits[j];
    }
    out
}

/// Where each of the 63 block positions reads from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    At(usize),
    Zero,
}

fn block_layout(len: usize) -> Vec<[Slot; BLOCK_LEN]> {
    if len == 0 {
        return Vec::new();
    }
    let blocks = len.div_ceil(BLOCK_LEN);
    let delta = blocks * BLOCK_LEN - len;
    (0..blocks)
        .map(|b| {
            std::array::from_fn(|j| {
                let index = b * BLOCK_LEN + j;
                if index < len {
                    Slot::At(index)
                } else if blocks > 1 {
                    Slot::At(j - (BLOCK_LEN - delta))
                } else {
                    Slot::Zero
                }
            })
        })
        .collect()
}

/// Splits `bits` into 63-bit blocks, topping up the last one.
pub fn partition_blocks(bits: &[bool]) -> Vec<BitBlock> {
    block_layout(bits.len())
        .iter()
        .map(|layout| BitBlock(read_block(layout, bits)))
        .collect()
}

fn read_block(layout: &[Slot; BLOCK_LEN], bits: &[bool]) -> Vec<bool> {
    layout
        .iter()
        .map(|slot| match *slot {
            Slot::At(i) => bits[i],
            Slot::Zero => false,
        })
        .collect()
}

/// Per-round permutation seeds, shared in the clear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationSpec {
    pub round_seeds: Vec<u64>,
}

impl PermutationSpec {
    pub fn new(round_seeds: Vec<u64>) -> Self {
        Self { round_seeds }
    }

    pub fn random<R: Rng + ?Sized>(rounds: usize, rng: &mut R) -> Self {
        Self::new((0..rounds).map(|_| rng.random()).collect())
    }

    pub fn rounds(&self) -> usize {
        self.round_seeds.len()
    }
}

/// Alice's syndromes, one list per round.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SyndromeTranscript {
    pub rounds: Vec<Vec<Syndrome>>,
}

impl SyndromeTranscript {
    /// Bits disclosed to an eavesdropper.
    pub fn leaked_bits(&self) -> usize {
        CHECK_BITS * self.rounds.iter().map(Vec::len).sum::<usize>()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.rounds.len() as u32).to_le_bytes());
        for round in &self.rounds {
            out.extend_from_slice(&(round.len() as u32).to_le_bytes());
            let mut packed = vec![0u8; (CHECK_BITS * round.len()).div_ceil(8)];
            for (i, s) in round.iter().enumerate() {
                for b in 0..CHECK_BITS {
                    if s.0 >> (CHECK_BITS - 1 - b) & 1 == 1 {
                        let bit = i * CHECK_BITS + b;
                        packed[bit / 8] |= 0x80 >> (bit % 8);
                    }
                }
            }
            out.extend_from_slice(&packed);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        fn truncated() -> Error {
            Error::Serialization("truncated syndrome transcript".into())
        }
        fn read_u32(bytes: &[u8], at: &mut usize) -> Result<usize> {
            let raw = bytes.get(*at..*at + 4).ok_or_else(truncated)?;
            *at += 4;
            Ok(u32::from_le_bytes(raw.try_into().expect("four bytes")) as usize)
        }
        let mut at = 0;
        let n_rounds = read_u32(bytes, &mut at)?;
        let mut rounds = Vec::new();
        for _ in 0..n_rounds {
            let n = read_u32(bytes, &mut at)?;
            let len = (CHECK_BITS * n).div_ceil(8);
            let packed = bytes.get(at..at + len).ok_or_else(truncated)?;
            at += len;
            let round = (0..n)
                .map(|i| {
                    let value = (0..CHECK_BITS).fold(0u8, |acc, b| {
                        let bit = i * CHECK_BITS + b;
                        acc << 1 | (packed[bit / 8] >> (7 - bit % 8) & 1)
                    });
                    Syndrome(value)
                })
                .collect();
            rounds.push(round);
        }
        if at != bytes.len() {
            return Err(Error::Serialization("trailing bytes after transcript".into()));
        }
        Ok(Self { rounds })
    }
}

/// Output of [`reconcile`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reconciled {
    pub alice: Vec<bool>,
    pub bob: Vec<bool>,
    /// Source positions kept after discarding, ascending.
    pub kept: Vec<usize>,
    pub transcript: SyndromeTranscript,
}

/// Runs every round of `spec`, then discards the final round's check
/// positions.
pub fn reconcile(alice: &[bool], bob: &[bool], spec: &PermutationSpec) -> Result<Reconciled> {
    if alice.len() != bob.len() {
        return Err(Error::Length {
            what: "reconciliation input",
            expected: alice.len(),
            found: bob.len(),
        });
    }
    let len = alice.len();
    let layout = block_layout(len);
    let mut bob = bob.to_vec();
    let mut transcript = SyndromeTranscript::default();
    let mut last_order: Vec<usize> = (0..len).collect();

    for &seed in &spec.round_seeds {
        let order = permutation(len, seed);
        let alice_view: Vec<bool> = order.iter().map(|&i| alice[i]).collect();
        let alice_syndromes: Vec<Syndrome> = layout
            .iter()
            .map(|block| syndrome_of(read_block(block, &alice_view).into_iter()))
            .collect();

        for (block, &s_alice) in layout.iter().zip(&alice_syndromes) {
            let s_bob = syndrome_of(block.iter().map(|slot| match *slot {
                Slot::At(j) => bob[order[j]],
                Slot::Zero => false,
            }));
            if let Some(position) = (s_alice ^ s_bob).position() {
                if let Slot::At(j) = block[position - 1] {
                    bob[order[j]] ^= true;
                }
            }
        }
        transcript.rounds.push(alice_syndromes);
        last_order = order;
    }

    let mut discard = vec![false; len];
    for block in layout.iter().take(len / BLOCK_LEN) {
        for position in CHECK_POSITIONS {
            if let Slot::At(j) = block[position - 1] {
                discard[last_order[j]] = true;
            }
        }
    }
    let kept: Vec<usize> = (0..len).filter(|&i| !discard[i]).collect();
    Ok(Reconciled {
        alice: kept.iter().map(|&i| alice[i]).collect(),
        bob: kept.iter().map(|&i| bob[i]).collect(),
        kept,
        transcript,
    })
}

/// Monte Carlo estimate of the post-reconciliation bit error rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualEstimate {
    pub trials: u64,
    pub output_bits: u64,
    pub residual_errors: u64,
    pub rate: f64,
    /// Wilson 95% interval.
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval at z = 1.96.
pub fn wilson_interval(successes: u64, total: u64) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let n = total as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Reconciles `trials` random strings of `len` bits whose copies differ by
/// independent flips of probability `eps1`. Trial `i` draws from substream
/// `i` of `seed`.
pub fn estimate_residual(
    len: usize,
    eps1: f64,
    trials: u64,
    rounds: usize,
    seed: u64,
) -> Result<ResidualEstimate> {
    check_probability("eps1", eps1)?;
    if len == 0 || trials == 0 {
        return Err(Error::Domain {
            name: "trials",
            value: trials as f64,
            reason: "length and trial count must be positive",
        });
    }
    let per_trial: Vec<(u64, u64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::substream(seed, "reconcile", t);
            let alice: Vec<bool> = (0..len).map(|_| rng.random()).collect();
            let bob: Vec<bool> = alice
                .iter()
                .map(|&b| b ^ (eps1 > 0.0 && rng.random_bool(eps1)))
                .collect();
            let spec = PermutationSpec::random(rounds, &mut rng);
            let out = reconcile(&alice, &bob, &spec).expect("equal lengths");
            let errors = out.alice.iter().zip(&out.bob).filter(|(a, b)| a != b).count();
            (errors as u64, out.alice.len() as u64)
        })
        .collect();
    let residual_errors = per_trial.iter().map(|p| p.0).sum();
    let output_bits = per_trial.iter().map(|p| p.1).sum();
    let (ci_low, ci_high) = wilson_interval(residual_errors, output_bits);
    Ok(ResidualEstimate {
        trials,
        output_bits,
        residual_errors,
        rate: residual_errors as f64 / output_bits as f64,
        ci_low,
        ci_high,
    })
}
