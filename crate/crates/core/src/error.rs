use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
///
/// The variants group into three families that the CLI maps onto exit codes:
/// validation problems, numerical failures and I/O.
#[derive(Debug, Error)]
pub enum RsfError {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("no Costas permutation of order {0} exists")]
    NoCostas(usize),

    #[error("singular configuration: {0}")]
    Singular(String),

    #[error("quadrature did not converge on [{a:e}, {b:e}]")]
    Quadrature { a: f64, b: f64 },

    #[error("echo not captured: {0}")]
    NoEcho(String),

    #[error("trial {trial} at {snr_db} dB failed: {source}")]
    Trial {
        snr_db: f64,
        trial: usize,
        #[source]
        source: Box<RsfError>,
    },

    #[error("no successful trials at {0} dB")]
    EmptyAggregate(f64),

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl RsfError {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        RsfError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than numerics or I/O.
    pub fn is_validation(&self) -> bool {
        match self {
            RsfError::Validation { .. } | RsfError::NoCostas(_) | RsfError::UnknownPreset(_) => true,
            RsfError::Json(e) => !e.is_io(),
            _ => false,
        }
    }

    pub fn is_io(&self) -> bool {
        match self {
            RsfError::Io(_) => true,
            RsfError::Json(e) => e.is_io(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, RsfError>;
