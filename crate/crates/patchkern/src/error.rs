//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value; `key` names the offending config key.
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    /// A kernel was asked for something its kind does not support.
    #[error("kernel: {0}")]
    Kernel(String),

    /// Incompatible teacher/student patch schemes for spectral analysis.
    #[error("incompatible patch schemes: {0}")]
    IncompatibleSchemes(String),

    /// Matrix factorization failed even after jitter escalation.
    #[error("factorization failed after jitter escalation (last jitter {jitter:.3e}, min eigenvalue {min_eigenvalue:.6e})")]
    Factorization { jitter: f64, min_eigenvalue: f64 },

    /// A solve produced a residual above the contract bound.
    #[error("linear solve residual {residual:.3e} exceeds bound {bound:.3e}")]
    Residual { residual: f64, bound: f64 },

    /// Fixed-point iteration did not converge.
    #[error("{what} did not converge within {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    /// Spectrum enumeration would exceed the entry budget.
    #[error("spectrum enumeration over budget: k_max {k_max:.3} yields {entries} entries (budget {budget}); try k_max <= {suggested:.3}")]
    SpectrumBudget {
        k_max: f64,
        entries: usize,
        budget: usize,
        suggested: f64,
    },

    /// A rank past the enumerated spectrum was requested.
    #[error("rank {p} exceeds the {modes} enumerated modes; enlarge k_max")]
    RankPastEnumeration { p: usize, modes: usize },

    /// Exponent fitting got unusable curve data.
    #[error("exponent fit: {0}")]
    Fit(String),

    /// A learning-curve realization failed (after one retry).
    #[error("realization failed at P={p}, realization {realization}: {source}")]
    Realization {
        p: usize,
        realization: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("TOML parse error: {0}")]
    Toml(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Exit code contract: 2 for configuration errors, 1 for runtime errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Toml(_) => 2,
            _ => 1,
        }
    }
}
