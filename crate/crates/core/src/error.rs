use thiserror::Error;

/// Errors raised by the simulator and the dynamics solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("empty album")]
    EmptyAlbum,

    #[error("sample {0} is not a benign sample")]
    NotBenign(u64),

    #[error("sample {0} is not a virus sample")]
    NotVirus(u64),

    #[error("no benign bank")]
    EmptyBank,

    #[error("cure generation exceeded {0} epochs")]
    EpochBudget(u32),

    #[error("non-finite state at t={t}: {state:?}")]
    NonFinite { t: f64, state: Vec<f64> },

    #[error("empty event log")]
    EmptyLog,
}

impl SimError {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        SimError::Config { field, reason: reason.into() }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
