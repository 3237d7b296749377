use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: unknown pattern tag, unsupported horizon,
    /// malformed study or instance files.
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid numeric input to a domain operation (nonpositive mean,
    /// degenerate truncation, too many partition regions, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A model handed to a solver is infeasible.
    #[error("model infeasible: {0}")]
    Infeasible(String),

    /// A model handed to a solver is unbounded below.
    #[error("model unbounded: {0}")]
    Unbounded(String),

    /// A solver gave up (iteration or node limit).
    #[error("solver limit reached: {0}")]
    SolverLimit(String),

    /// A policy lookup hit a state it does not cover.
    #[error("policy has no action for stage {stage} state ({i1},{i2})")]
    UnreachableState { stage: usize, i1: i64, i2: i64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
