use thiserror::Error;

/// Errors raised by the library. Each variant maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A synthesized probability left `[0, 1]` by more than the clamping tolerance.
    /// `state` is the 1-based full-state index.
    #[error("equalizer infeasible at state {state}: probability {value} outside [0, 1]")]
    Infeasible { state: usize, value: f64 },

    #[error("no equalizer exists")]
    NoEqualizer,

    #[error("gamma {gamma} outside enforceable interval [{lower}, {upper}]")]
    GammaOutOfRange { gamma: f64, lower: f64, upper: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no pure mutual best response among followers within tolerance {0}")]
    NoFollowerEquilibrium(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
