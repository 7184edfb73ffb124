//! Physical layer: weak coherent pulses, lossy transport, dark counts and
//! per-photon projective measurement.
//!
//! Polarization states are plain angles. A photon polarized at `a` measured
//! in the basis `{b, b + pi/2}` lands on the orthogonal outcome with
//! probability `sin^2(a - b)` (Malus' law); nothing else of the state is
//! needed.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::analytics::{SystemParams, PHI};
use crate::error::{check_non_negative, Result};

/// Angle comparisons are done to this tolerance.
pub const ANGLE_TOLERANCE: f64 = 1e-9;

/// Adds `delta` to `angle` and wraps into `[0, 2 pi)`.
pub fn rotate(angle: f64, delta: f64) -> f64 {
    let wrapped = (angle + delta).rem_euclid(TAU);
    if TAU - wrapped < ANGLE_TOLERANCE {
        0.0
    } else {
        wrapped
    }
}

/// One time-slotted optical pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub angle: f64,
    pub photons: u32,
    pub slot: u64,
}

impl Pulse {
    pub fn new(angle: f64, photons: u32, slot: u64) -> Self {
        Self {
            angle: rotate(angle, 0.0),
            photons,
            slot,
        }
    }
}

/// One of the two measurement bases of a [`BasisPair`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    /// 0 for the basis of the unrotated state, 1 for the rotated one.
    pub index: u8,
    pub angle: f64,
}

/// The bases `B0 = {theta0, theta0 + pi/2}` and
/// `B1 = {theta0 + pi/6, theta0 + pi/6 + pi/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisPair {
    pub theta0: f64,
}

impl BasisPair {
    pub fn new(theta0: f64) -> Self {
        Self {
            theta0: rotate(theta0, 0.0),
        }
    }

    pub fn theta1(&self) -> f64 {
        rotate(self.theta0, PHI)
    }

    pub fn basis(&self, index: u8) -> Basis {
        let angle = if index == 0 { self.theta0 } else { self.theta1() };
        Basis {
            index: index & 1,
            angle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    /// At least one photon excluded the basis state; carries the inferred bit.
    Conclusive(bool),
    Inconclusive,
    NoClick,
    /// A dark count in an otherwise empty slot.
    Dark,
}

impl EventKind {
    pub fn clicked(self) -> bool {
        !matches!(self, EventKind::NoClick)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub slot: u64,
    pub kind: EventKind,
}

/// Poisson photon number of a weak coherent pulse.
pub fn sample_photons<R: Rng + ?Sized>(mu_s: f64, rng: &mut R) -> Result<u32> {
    check_non_negative("mu_s", mu_s)?;
    if mu_s == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mu_s).expect("positive finite mean");
    Ok(dist.sample(rng) as u32)
}

/// Keeps each photon independently with probability `survive_prob`.
///
/// # Panics
///
/// If `survive_prob` is not a probability.
pub fn thin<R: Rng + ?Sized>(photons: u32, survive_prob: f64, rng: &mut R) -> u32 {
    assert!(
        (0.0..=1.0).contains(&survive_prob),
        "survival probability {survive_prob} outside [0, 1]"
    );
    if photons == 0 || survive_prob == 0.0 {
        return 0;
    }
    if survive_prob == 1.0 {
        return photons;
    }
    Binomial::new(photons as u64, survive_prob)
        .expect("validated")
        .sample(rng) as u32
}

/// Measures every photon of `pulse` in `basis`.
///
/// A photon on the orthogonal outcome proves the prepared state was not the
/// basis state, so the pulse is conclusive for bit `basis.index ^ 1`. With
/// probability `eps` that bit is flipped.
pub fn measure_pulse<R: Rng + ?Sized>(pulse: &Pulse, basis: Basis, eps: f64, rng: &mut R) -> EventKind {
    if pulse.photons == 0 {
        return EventKind::NoClick;
    }
    let orthogonal = (pulse.angle - basis.angle).sin().powi(2);
    let hit = orthogonal > ANGLE_TOLERANCE
        && (0..pulse.photons).any(|_| rng.random_bool(orthogonal.min(1.0)));
    if !hit {
        return EventKind::Inconclusive;
    }
    let bit = basis.index == 0;
    let flip = eps > 0.0 && rng.random_bool(eps);
    EventKind::Conclusive(bit ^ flip)
}

/// Whether a detector fires spontaneously in one slot.
pub fn dark_click<R: Rng + ?Sized>(dark_rate: f64, rng: &mut R) -> bool {
    if dark_rate <= 0.0 {
        return false;
    }
    if dark_rate >= 1.0 {
        return true;
    }
    rng.random_bool(dark_rate)
}

/// The polarization angles Bob may prepare: |0>, |1>, |+>, |->.
pub const PREPARED_ANGLES: [f64; 4] = [0.0, PI / 2.0, PI / 4.0, 3.0 * PI / 4.0];

/// Counts from [`simulate_honest_chain`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainStats {
    pub pulses: u64,
    pub clicks: u64,
    pub conclusive: u64,
    pub errors: u64,
}

impl ChainStats {
    pub fn conclusive_rate(&self) -> f64 {
        self.conclusive as f64 / self.pulses.max(1) as f64
    }
}

/// Runs the honest chain source -> channel -> detector -> random-basis
/// measurement on `pulses` pulses with uniformly random encoded bits.
pub fn simulate_honest_chain<R: Rng + ?Sized>(
    system: &SystemParams,
    pulses: u64,
    rng: &mut R,
) -> Result<ChainStats> {
    system.validate()?;
    let eps = system.eps();
    let mut stats = ChainStats {
        pulses,
        ..ChainStats::default()
    };
    for slot in 0..pulses {
        let bit = rng.random_bool(0.5);
        let bases = BasisPair::new(PREPARED_ANGLES[rng.random_range(0..4)]);
        let emitted = sample_photons(system.mu_s, rng)?;
        let arrived = thin(emitted, system.transfer(), rng);
        let pulse = Pulse::new(bases.basis(bit as u8).angle, arrived, slot);
        let kind = measure_pulse(&pulse, bases.basis(rng.random_range(0..2)), eps, rng);
        match kind {
            EventKind::Conclusive(value) => {
                stats.clicks += 1;
                stats.conclusive += 1;
                stats.errors += (value != bit) as u64;
            }
            EventKind::Inconclusive | EventKind::Dark => stats.clicks += 1,
            EventKind::NoClick => {}
        }
    }
    Ok(stats)
}
