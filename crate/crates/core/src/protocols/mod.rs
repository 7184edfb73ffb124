//! Message-level state machines for the three protocols.
//!
//! * [`rot`]: random oblivious transfer over weak coherent pulses.
//! * [`ot12`]: 1-of-2 oblivious transfer built on a random-OT session.
//! * [`bc`]: bit commitment built on repeated 1-of-2 transfers.
//!
//! Each session is a single-threaded state machine fed by one seeded stream;
//! both parties draw from it in a fixed order, so a seed replays a session
//! exactly.

pub mod bc;
pub mod ot12;
pub mod rot;

/// Bumped whenever a serialized transcript changes shape.
pub const TRANSCRIPT_VERSION: u32 = 1;
