use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {name} = {value} ({reason})")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// Two inputs that must agree in length do not.
    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    Length {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// Bob holds fewer conclusive bits than the protocol requires.
    #[error("insufficient conclusive bits: have {have}, need {need}")]
    InsufficientConclusive { have: usize, need: usize },

    /// Too few pulses to draw two disjoint index sets.
    #[error("{pulses} pulses cannot hold two disjoint sets of {set_size}")]
    TooFewPulses { pulses: usize, set_size: usize },

    /// One of the OT rounds of a commitment aborted.
    #[error("OT round {round} aborted: {source}")]
    RoundAborted {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("transcript serialization: {0}")]
    Serialization(String),
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            reason: "must be a probability in [0, 1]",
        })
    }
}

pub(crate) fn check_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            reason: "must be finite and non-negative",
        })
    }
}
