//! Experiment runner for the popmc engine: binds configs, seeds, models,
//! samplers and diagnostics, and emits the CSV/JSON artifacts.

pub mod bench;
pub mod config;
pub mod experiments;
pub mod manifest;

use popmc_core::Error as CoreError;

/// Process-level error classes; each maps to a distinct exit code.
#[derive(Clone, Debug)]
pub enum CliError {
    /// Unusable configuration or input file contents.
    Config(String),
    /// Numerical degeneracy during a run.
    Numeric(String),
    /// Filesystem failure.
    Io(String),
}

impl CliError {
    pub const EXIT_OK: i32 = 0;
    pub const EXIT_CONFIG: i32 = 2;
    pub const EXIT_NUMERIC: i32 = 3;
    pub const EXIT_IO: i32 = 4;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => Self::EXIT_CONFIG,
            CliError::Numeric(_) => Self::EXIT_NUMERIC,
            CliError::Io(_) => Self::EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical degeneracy: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Element { source, .. } => CliError::from(*source),
            CoreError::DegeneratePopulation(_) | CoreError::DegenerateAtStep { .. } => {
                CliError::Numeric(e.to_string())
            }
            CoreError::Io(_) => CliError::Io(e.to_string()),
            CoreError::InvalidConfig(_) | CoreError::InvalidModel(_) | CoreError::Parse { .. } => {
                CliError::Config(e.to_string())
            }
        }
    }
}
