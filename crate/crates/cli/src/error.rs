use serde::Serialize;
use thiserror::Error;

use qbound::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid_config: {0}")]
    InvalidConfig(String),

    #[error("precondition: {0}")]
    Precondition(String),

    #[error("io_error: {0}")]
    Io(String),

    #[error("{}: {}", core_code(.0), .0)]
    Core(#[from] CoreError),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn core_code(e: &CoreError) -> &'static str {
    match e {
        CoreError::NotPositiveDefinite(_) => "not_positive_definite",
        CoreError::NoConvergence(_) => "no_convergence",
        CoreError::NonFiniteSample(_) => "non_finite_sample",
        CoreError::QuadratureFailure(_) => "quadrature_failure",
        CoreError::InsufficientOrder { .. } => "insufficient_order",
        CoreError::PrecisionExhausted { .. } => "precision_exhausted",
        CoreError::NotInClass(_) => "not_in_class",
        CoreError::FiniteSupport { .. } => "finite_support",
        CoreError::DimensionMismatch(_) => "dimension_mismatch",
        CoreError::InvalidInput(_) => "invalid_input",
        CoreError::OutsideWindow { .. } => "outside_window",
        CoreError::SingularPair(..) => "singular_pair",
        CoreError::ZeroVariance => "zero_variance",
        CoreError::NegativeIntensity(_) => "negative_intensity",
        CoreError::Table(_) => "table_error",
    }
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::InvalidConfig(_) => "invalid_config",
            CliError::Precondition(_) => "precondition",
            CliError::Io(_) => "io_error",
            CliError::Core(e) => core_code(e),
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::InvalidConfig(m) | CliError::Precondition(m) | CliError::Io(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }

    /// One-line JSON error record.
    pub fn record(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            schema_version: u32,
            error: &'a str,
            message: String,
            record: String,
        }
        serde_json::to_string(&Record {
            schema_version: crate::SCHEMA_VERSION,
            error: self.code(),
            message: self.message(),
            record: self.to_string(),
        })
        .expect("serializable")
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
