//! Random oblivious transfer: Bob prepares pulses, Alice encodes one random
//! bit per pulse by rotating it, Bob keeps the pulses whose measurement
//! excludes one of the two candidate states.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::{SystemParams, PHI};
use crate::error::{check_probability, Error, Result};
use crate::photonics::{
    dark_click, measure_pulse, sample_photons, thin, BasisPair, DetectionEvent, EventKind, Pulse,
    PREPARED_ANGLES,
};

/// How a dark count that survives the timing filter is classified.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum DarkPolicy {
    /// Carries no basis information, so it is never conclusive.
    #[default]
    Inconclusive,
    /// Pessimistic: read as a conclusive bit of random value.
    RandomConclusive,
}

/// What Bob does when he holds fewer than `l_obt` conclusive bits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShortfallPolicy {
    /// Abort the session.
    Abort,
    /// Continue; the transfer pads its set with non-conclusive indices.
    #[default]
    Pad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotConfig {
    pub system: SystemParams,
    /// Pulses per session.
    pub n_pulses: u64,
    /// Detection fraction the calibration must beat.
    pub a: f64,
    /// Tolerable error rate agreed before the run.
    pub eps_set: f64,
    /// Conclusive bits needed per index set.
    pub l_obt: u64,
    /// Round-trip delay in slots.
    pub travel_offset: u64,
    /// Slots between consecutive pulses.
    pub pulse_spacing: u64,
    pub dark_policy: DarkPolicy,
    pub shortfall: ShortfallPolicy,
    pub calibration_pulses: u64,
}

impl RotConfig {
    pub const DEFAULT_CALIBRATION_PULSES: u64 = 10_000;

    pub fn new(system: SystemParams, n_pulses: u64, a: f64, eps_set: f64, l_obt: u64) -> Result<Self> {
        let config = Self {
            system,
            n_pulses,
            a,
            eps_set,
            l_obt,
            travel_offset: 3,
            pulse_spacing: 2,
            dark_policy: DarkPolicy::default(),
            shortfall: ShortfallPolicy::default(),
            calibration_pulses: Self::DEFAULT_CALIBRATION_PULSES,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        check_probability("a", self.a)?;
        check_probability("eps_set", self.eps_set)?;
        if self.pulse_spacing == 0 {
            return Err(Error::Domain {
                name: "pulse_spacing",
                value: 0.0,
                reason: "must be positive",
            });
        }
        Ok(())
    }

    /// Slot in which pulse `i` leaves Alice.
    pub fn send_slot(&self, i: u64) -> u64 {
        i * self.pulse_spacing
    }

    /// Slot in which pulse `i` is expected back at Bob.
    pub fn arrival_slot(&self, i: u64) -> u64 {
        self.send_slot(i) + self.travel_offset
    }

    /// Pulse index whose arrival falls in `slot`, if any.
    pub fn pulse_at(&self, slot: u64) -> Option<u64> {
        let since = slot.checked_sub(self.travel_offset)?;
        (since % self.pulse_spacing == 0 && since / self.pulse_spacing < self.n_pulses)
            .then_some(since / self.pulse_spacing)
    }

    fn window(&self) -> u64 {
        self.n_pulses * self.pulse_spacing + self.travel_offset
    }
}

/// Outcome of the pre-run calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub accepted: bool,
    pub detection_rate: f64,
    pub error_rate: f64,
    pub pulses: u64,
    pub conclusive: u64,
}

/// Test pulses in an announced state, measured in the other basis.
///
/// Accepts iff the detection rate exceeds `a` and the bit-error rate among
/// conclusive results stays below `eps_set`.
pub fn calibrate<R: Rng + ?Sized>(config: &RotConfig, rng: &mut R) -> Result<Calibration> {
    config.validate()?;
    let system = &config.system;
    let eps = system.eps();
    let (mut clicks, mut conclusive, mut errors) = (0u64, 0u64, 0u64);
    for slot in 0..config.calibration_pulses {
        let bases = BasisPair::new(PREPARED_ANGLES[rng.random_range(0..4)]);
        let bit = rng.random_bool(0.5);
        let photons = thin(sample_photons(system.mu_s, rng)?, system.transfer(), rng);
        let pulse = Pulse::new(bases.basis(bit as u8).angle, photons, slot);
        let mut kind = measure_pulse(&pulse, bases.basis(!bit as u8), eps, rng);
        if kind == EventKind::NoClick && dark_click(system.dark_rate, rng) {
            kind = EventKind::Dark;
        }
        clicks += kind.clicked() as u64;
        if let EventKind::Conclusive(value) = kind {
            conclusive += 1;
            errors += (value != bit) as u64;
        }
    }
    let pulses = config.calibration_pulses;
    let detection_rate = clicks as f64 / pulses.max(1) as f64;
    let error_rate = if conclusive == 0 {
        0.0
    } else {
        errors as f64 / conclusive as f64
    };
    Ok(Calibration {
        accepted: pulses > 0 && conclusive > 0 && detection_rate > config.a && error_rate < config.eps_set,
        detection_rate,
        error_rate,
        pulses,
        conclusive,
    })
}

/// Classical messages Bob sends Alice before the transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BobMessage {
    /// Bob saw the return window of this send slot.
    SlotAck(u64),
}

/// Full record of one random-OT run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotSession {
    pub config: RotConfig,
    /// Alice's encoded bits `r`.
    pub alice_bits: Vec<bool>,
    /// Angle of the state Bob prepared for each pulse.
    pub phi_angles: Vec<f64>,
    /// Basis index Bob measured each returning pulse in.
    pub bob_bases: Vec<u8>,
    /// Send slot announced by Alice for each pulse.
    pub send_slots: Vec<u64>,
    /// Every click Bob's detector registered, ordered by slot.
    pub events: Vec<DetectionEvent>,
    pub bob_messages: Vec<BobMessage>,
    /// `(pulse index, inferred bit)`, ascending by index.
    pub conclusive: Vec<(usize, bool)>,
}

impl RotSession {
    pub fn n_pulses(&self) -> usize {
        self.alice_bits.len()
    }

    pub fn conclusive_rate(&self) -> f64 {
        if self.alice_bits.is_empty() {
            0.0
        } else {
            self.conclusive.len() as f64 / self.alice_bits.len() as f64
        }
    }

    /// Bob's value at `index`, if that pulse was conclusive.
    pub fn conclusive_value(&self, index: usize) -> Option<bool> {
        self.conclusive
            .binary_search_by_key(&index, |&(i, _)| i)
            .ok()
            .map(|pos| self.conclusive[pos].1)
    }

    /// Conclusive values that disagree with Alice's bits.
    pub fn error_count(&self) -> usize {
        self.conclusive
            .iter()
            .filter(|&&(i, v)| self.alice_bits[i] != v)
            .count()
    }
}

/// Runs one session with honest parties.
///
/// Bob prepares each pulse in one of four states, Alice rotates it by
/// `r_i * pi/6` and announces when she sent it, and Bob measures what comes
/// back in the arrival slot in a random basis of that pulse's pair. Clicks
/// outside arrival slots are filtered out.
///
/// # Errors
///
/// [`Error::InsufficientConclusive`] when no pulse is conclusive, or when
/// fewer than `l_obt` are and the shortfall policy is [`ShortfallPolicy::Abort`].
pub fn run_rot<R: Rng + ?Sized>(config: &RotConfig, rng: &mut R) -> Result<RotSession> {
    config.validate()?;
    let system = &config.system;
    let eps = system.eps();
    let n = config.n_pulses as usize;

    let mut alice_bits = Vec::with_capacity(n);
    let mut phi_angles = Vec::with_capacity(n);
    let mut bob_bases = Vec::with_capacity(n);
    let mut send_slots = Vec::with_capacity(n);
    let mut arrivals = Vec::with_capacity(n);

    for i in 0..config.n_pulses {
        let phi = PREPARED_ANGLES[rng.random_range(0..4)];
        let photons = sample_photons(system.mu_s, rng)?;
        let r = rng.random_bool(0.5);
        let bases = BasisPair::new(phi);
        let encoded = encode(phi, r);
        let returned = thin(photons, system.transfer(), rng);
        let basis = rng.random_range(0..2u8);
        let slot = config.arrival_slot(i);
        let mut kind = measure_pulse(&Pulse::new(encoded, returned, slot), bases.basis(basis), eps, rng);
        if kind == EventKind::NoClick && dark_click(system.dark_rate, rng) {
            kind = EventKind::Dark;
        }
        alice_bits.push(r);
        phi_angles.push(phi);
        bob_bases.push(basis);
        send_slots.push(config.send_slot(i));
        arrivals.push(DetectionEvent { slot, kind });
    }

    let mut events = Vec::new();
    let mut arrivals = arrivals.into_iter().peekable();
    for slot in 0..config.window() {
        if arrivals.peek().is_some_and(|e| e.slot == slot) {
            let event = arrivals.next().expect("peeked");
            if event.kind.clicked() {
                events.push(event);
            }
        } else if dark_click(system.dark_rate, rng) {
            events.push(DetectionEvent {
                slot,
                kind: EventKind::Dark,
            });
        }
    }

    let mut conclusive = Vec::new();
    for event in &events {
        let Some(i) = config.pulse_at(event.slot) else {
            continue;
        };
        match event.kind {
            EventKind::Conclusive(v) => conclusive.push((i as usize, v)),
            EventKind::Dark if config.dark_policy == DarkPolicy::RandomConclusive => {
                conclusive.push((i as usize, rng.random_bool(0.5)))
            }
            _ => {}
        }
    }

    let need = match config.shortfall {
        ShortfallPolicy::Abort => config.l_obt as usize,
        ShortfallPolicy::Pad => 1,
    };
    if conclusive.len() < need {
        return Err(Error::InsufficientConclusive {
            have: conclusive.len(),
            need,
        });
    }

    let bob_messages = send_slots.iter().map(|&s| BobMessage::SlotAck(s)).collect();
    Ok(RotSession {
        config: *config,
        alice_bits,
        phi_angles,
        bob_bases,
        send_slots,
        events,
        bob_messages,
        conclusive,
    })
}

/// Bounds a session's conclusive rate must respect to act as a Rabin-style
/// channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelBounds {
    pub beta: f64,
    pub alpha: f64,
}

impl Default for ChannelBounds {
    fn default() -> Self {
        Self {
            beta: 0.0,
            alpha: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelAudit {
    pub conclusive_rate: f64,
    /// `beta < rate < alpha`.
    pub rate_in_bounds: bool,
    /// Bob's messages are slot acknowledgments covering every send slot,
    /// so they cannot depend on which pulses were conclusive.
    pub alice_oblivious: bool,
    /// Every conclusive index is distinct, in range, and backed by an event
    /// in its arrival slot.
    pub well_formed: bool,
}

impl ChannelAudit {
    pub fn passed(&self) -> bool {
        self.rate_in_bounds && self.alice_oblivious && self.well_formed
    }
}

/// Checks a session against the extended Rabin OT channel properties.
/// An empty session passes vacuously.
pub fn rot_channel_properties(session: &RotSession, bounds: ChannelBounds) -> ChannelAudit {
    let n = session.n_pulses();
    if n == 0 {
        return ChannelAudit {
            conclusive_rate: 0.0,
            rate_in_bounds: true,
            alice_oblivious: true,
            well_formed: true,
        };
    }
    let rate = session.conclusive_rate();
    let acked: Vec<u64> = session
        .bob_messages
        .iter()
        .map(|BobMessage::SlotAck(s)| *s)
        .collect();
    let alice_oblivious = acked == session.send_slots;

    let config = &session.config;
    let strictly_increasing = session.conclusive.windows(2).all(|w| w[0].0 < w[1].0);
    let backed = session.conclusive.iter().all(|&(i, _)| {
        i < n
            && session
                .events
                .binary_search_by_key(&config.arrival_slot(i as u64), |e| e.slot)
                .is_ok()
    });
    ChannelAudit {
        conclusive_rate: rate,
        rate_in_bounds: rate > bounds.beta && rate < bounds.alpha,
        alice_oblivious,
        well_formed: strictly_increasing && backed,
    }
}

/// A dishonest Bob who splits every pulse and runs unambiguous state
/// discrimination on each photon with a detector of efficiency
/// `adversary_eta_d`.
///
/// A photon discriminates the two candidate states with probability
/// `1 - cos(pi/6)`; any success reveals `r_i`. The honest protocol assumed
/// detector efficiency `eta_d`, so the adversary sees mean photon number
/// `mu_s * eta_c * adversary_eta_d`.
pub fn pns_bob_strategy<R: Rng + ?Sized>(
    config: &RotConfig,
    adversary_eta_d: f64,
    rng: &mut R,
) -> Result<RotSession> {
    config.validate()?;
    check_probability("adversary_eta_d", adversary_eta_d)?;
    let system = &config.system;
    let usd = 1.0 - PHI.cos();
    let n = config.n_pulses as usize;
    let mut session = RotSession {
        config: *config,
        alice_bits: Vec::with_capacity(n),
        phi_angles: Vec::with_capacity(n),
        bob_bases: Vec::with_capacity(n),
        send_slots: Vec::with_capacity(n),
        events: Vec::new(),
        bob_messages: Vec::with_capacity(n),
        conclusive: Vec::new(),
    };
    for i in 0..config.n_pulses {
        let phi = PREPARED_ANGLES[rng.random_range(0..4)];
        let photons = sample_photons(system.mu_s, rng)?;
        let r = rng.random_bool(0.5);
        let returned = thin(photons, system.eta_c * adversary_eta_d, rng);
        let identified = (0..returned).any(|_| rng.random_bool(usd));
        let slot = config.arrival_slot(i);
        session.alice_bits.push(r);
        session.phi_angles.push(phi);
        // Unambiguous discrimination uses neither basis of the pair.
        session.bob_bases.push(u8::MAX);
        session.send_slots.push(config.send_slot(i));
        session.bob_messages.push(BobMessage::SlotAck(config.send_slot(i)));
        if returned > 0 {
            let kind = if identified {
                EventKind::Conclusive(r)
            } else {
                EventKind::Inconclusive
            };
            session.events.push(DetectionEvent { slot, kind });
        }
        if identified {
            session.conclusive.push((i as usize, r));
        }
    }
    Ok(session)
}

/// Angle of the state Alice returns for prepared angle `phi` and bit `r`.
pub fn encode(phi: f64, r: bool) -> f64 {
    crate::photonics::rotate(phi, if r { PHI } else { 0.0 })
}

/// Whether `angle` is one of the four states Bob may prepare.
pub fn is_prepared_angle(angle: f64) -> bool {
    PREPARED_ANGLES.iter().any(|&a| (a - angle).abs() < 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{p_con, p_con_malicious, p_con_malicious_boosted};
    use crate::rng::{from_seed, substream};
    use std::f64::consts::FRAC_PI_2;

    fn config(mu: f64, n: u64) -> RotConfig {
        let system = SystemParams::ideal_for_mu(mu, 0.8).unwrap();
        RotConfig::new(system, n, 0.95 * -(-mu).exp_m1(), 0.005, 260).unwrap()
    }

    #[test]
    fn calibration_accepts_good_hardware() {
        let mut cfg = config(5.0, 800);
        cfg.system = cfg.system.with_error(0.003).unwrap();
        let cal = calibrate(&cfg, &mut from_seed(1)).unwrap();
        assert!(cal.accepted, "{cal:?}");
        assert!((cal.detection_rate - (1.0 - (-5f64).exp())).abs() < 0.005);
        assert!((cal.error_rate - 0.003).abs() < 0.003);
    }

    #[test]
    fn calibration_rejects() {
        let mut cfg = config(5.0, 800);
        cfg.a = 0.9999;
        assert!(!calibrate(&cfg, &mut from_seed(2)).unwrap().accepted);

        let mut cfg = config(5.0, 800);
        cfg.eps_set = 0.0;
        cfg.system = cfg.system.with_error(0.003).unwrap();
        assert!(!calibrate(&cfg, &mut from_seed(3)).unwrap().accepted);
    }

    #[test]
    fn error_free_session_matches_alice() {
        let session = run_rot(&config(5.0, 800), &mut from_seed(4)).unwrap();
        assert!(!session.conclusive.is_empty());
        assert_eq!(session.error_count(), 0);
        for &(i, _) in &session.conclusive {
            assert!(session.events.iter().any(|e| e.slot == session.config.arrival_slot(i as u64)));
        }
        assert!(session.phi_angles.iter().all(|&a| is_prepared_angle(a)));
        assert!(rot_channel_properties(&session, ChannelBounds::default()).passed());
    }

    #[test]
    fn zero_intensity_aborts() {
        let err = run_rot(&config(0.0, 800), &mut from_seed(5)).unwrap_err();
        assert_eq!(err, Error::InsufficientConclusive { have: 0, need: 1 });
    }

    #[test]
    fn abort_policy_enforces_threshold() {
        let mut cfg = config(5.0, 800);
        cfg.shortfall = ShortfallPolicy::Abort;
        cfg.l_obt = 400;
        assert!(matches!(
            run_rot(&cfg, &mut from_seed(6)),
            Err(Error::InsufficientConclusive { need: 400, .. })
        ));
    }

    #[test]
    fn mean_conclusive_count() {
        let cfg = config(5.0, 800);
        let runs = 200;
        let total: usize = (0..runs)
            .map(|i| run_rot(&cfg, &mut substream(7, "rot", i)).unwrap().conclusive.len())
            .sum();
        let mean = total as f64 / runs as f64;
        let expected = 800.0 * p_con(5.0).unwrap();
        assert!((mean - expected).abs() < 5.0, "{mean} vs {expected}");
    }

    #[test]
    fn dark_counts_are_filtered() {
        let mut cfg = config(1.0, 2000);
        cfg.system.dark_rate = 0.05;
        let session = run_rot(&cfg, &mut from_seed(8)).unwrap();
        let off_slot = session
            .events
            .iter()
            .filter(|e| cfg.pulse_at(e.slot).is_none())
            .count();
        assert!(off_slot > 0);
        assert!(session.conclusive.iter().all(|&(i, _)| i < 2000));
        assert_eq!(session.error_count(), 0);

        cfg.dark_policy = DarkPolicy::RandomConclusive;
        let pessimistic = run_rot(&cfg, &mut from_seed(8)).unwrap();
        assert!(pessimistic.conclusive.len() >= session.conclusive.len());
        assert!(pessimistic.error_count() > 0);
    }

    #[test]
    fn slot_arithmetic() {
        let cfg = config(5.0, 10);
        assert_eq!(cfg.arrival_slot(4), 11);
        assert_eq!(cfg.pulse_at(11), Some(4));
        assert_eq!(cfg.pulse_at(12), None);
        assert_eq!(cfg.pulse_at(2), None);
        assert_eq!(cfg.pulse_at(cfg.arrival_slot(10)), None);
    }

    #[test]
    fn pns_rates() {
        let cfg = config(5.0, 100_000);
        let boosted = pns_bob_strategy(&cfg, 1.0, &mut from_seed(9)).unwrap();
        let target = p_con_malicious_boosted(5.0, 0.8).unwrap();
        assert!((boosted.conclusive_rate() - target).abs() < 0.005);
        assert_eq!(boosted.error_count(), 0);
        assert!(!rot_channel_properties(&boosted, ChannelBounds::default()).rate_in_bounds);

        let fair = pns_bob_strategy(&cfg, 0.8, &mut from_seed(10)).unwrap();
        let target = p_con_malicious(5.0).unwrap();
        assert!((fair.conclusive_rate() - target).abs() < 0.005);

        let dark = pns_bob_strategy(&config(0.0, 1000), 1.0, &mut from_seed(11)).unwrap();
        assert_eq!(dark.conclusive_rate(), 0.0);
    }

    #[test]
    fn empty_session_passes_vacuously() {
        let mut cfg = config(5.0, 0);
        cfg.shortfall = ShortfallPolicy::Pad;
        let session = pns_bob_strategy(&cfg, 1.0, &mut from_seed(12)).unwrap();
        assert!(rot_channel_properties(&session, ChannelBounds::default()).passed());
    }

    #[test]
    fn encoding_rotates_by_sixth_of_pi() {
        assert_eq!(encode(0.0, false), 0.0);
        assert!((encode(FRAC_PI_2, true) - (FRAC_PI_2 + PHI)).abs() < 1e-15);
    }

    #[test]
    fn sessions_replay() {
        let cfg = config(3.0, 500);
        let a = run_rot(&cfg, &mut from_seed(13)).unwrap();
        let b = run_rot(&cfg, &mut from_seed(13)).unwrap();
        assert_eq!(a, b);
    }
}
