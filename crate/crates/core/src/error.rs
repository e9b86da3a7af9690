use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("expected {expected} bits, got {got}")]
    InputShape { expected: usize, got: usize },

    #[error("bit value {0} is not 0 or 1")]
    NotABit(u8),

    #[error("invalid configuration: {0}")]
    Config(&'static str),

    #[error("unknown mode {0}, expected 1..=6")]
    UnknownMode(u8),

    /// The power split leaves a non-positive distance for one of the
    /// far-user interference patterns of the mode.
    #[error("power allocation a1={a1} invalid for mode {mode}, term {term}: {condition}")]
    InvalidPowerAllocation {
        mode: u8,
        term: usize,
        a1: f64,
        condition: &'static str,
    },

    /// Conditional SIC error probability was requested for a threshold
    /// that can never be met.
    #[error("conditional ABEP undefined: relay threshold is infeasible")]
    UndefinedConditional,
}
