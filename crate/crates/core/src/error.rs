use std::fmt;

use serde::{Deserialize, Serialize};

/// Hypotheses on the kernel and the potential checked before a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H1,
    H2,
    H3,
    H4,
    H5,
    H6,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            Hypothesis::H1 => "H1",
            Hypothesis::H2 => "H2",
            Hypothesis::H3 => "H3",
            Hypothesis::H4 => "H4",
            Hypothesis::H5 => "H5",
            Hypothesis::H6 => "H6",
        };
        write!(f, "({tag})")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("hypothesis {hypothesis} violated: {detail}")]
    Hypothesis {
        hypothesis: Hypothesis,
        detail: String,
        witness: Option<f64>,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("field lives on a different grid (expected {expected} cells, got {got})")]
    DomainMismatch { expected: usize, got: usize },

    #[error("numerical blow-up at t = {t} (last finite max|phi| = {max_abs_phi})")]
    BlowUp { t: f64, max_abs_phi: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("acceptance threshold not met: {0}")]
    Threshold(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status used by the `nlch` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Hypothesis { .. } => 3,
            Error::BlowUp { .. } | Error::Singular(_) => 4,
            Error::Threshold(_) => 5,
            Error::DomainMismatch { .. } | Error::InsufficientData(_) | Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
