//! Error type shared by the engine modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its allowed range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Model parameters violate a structural requirement.
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    /// The weight vector can no longer be normalized (all -inf or NaN).
    #[error("degenerate population: {0}")]
    DegeneratePopulation(String),

    /// Degeneracy during a sequential run, tagged with the step that failed.
    #[error("degenerate population at step {step}: {reason}")]
    DegenerateAtStep { step: usize, reason: String },

    /// A per-element kernel failed; `index` is the lowest failing element.
    #[error("element {index}: {source}")]
    Element {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A data file could not be parsed.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the error (or its root cause) is numerical degeneracy
    /// rather than bad configuration or I/O.
    pub fn is_degenerate(&self) -> bool {
        match self {
            Error::DegeneratePopulation(_) | Error::DegenerateAtStep { .. } => true,
            Error::Element { source, .. } => source.is_degenerate(),
            _ => false,
        }
    }
}
