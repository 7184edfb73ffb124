//! Practical quantum oblivious transfer and bit commitment over weak coherent
//! pulses.
//!
//! The crate is organized bottom-up:
//!
//! * [`analytics`] evaluates every closed-form probability of the scheme and
//!   searches for protocol parameters.
//! * [`photonics`] simulates the physical layer: Poisson sources, lossy
//!   channels, imperfect detectors and per-photon projective measurements.
//! * [`reconciliation`] implements the (63,57,3) Hamming syndrome exchange.
//! * [`protocols`] drives the random-OT, 1-of-2 OT and bit-commitment state
//!   machines, including the adversaries.
//!
//! All randomness is drawn from caller-supplied seeded streams; see [`rng`].

pub mod analytics;
pub mod error;
pub mod photonics;
pub mod protocols;
pub mod reconciliation;
pub mod rng;

pub use analytics::{ParamTableRow, Selection, SelectionConfig, SelectionRule, SystemParams};
pub use error::{Error, Result};
pub use photonics::{BasisPair, DetectionEvent, EventKind, Pulse};
pub use protocols::{
    bc::{CommitmentTranscript, Verdict, VerifyPolicy},
    ot12::OtSession,
    rot::{RotConfig, RotSession},
};
pub use reconciliation::{BitBlock, PermutationSpec, Syndrome};
