//! CLI error categories and their process exit codes.

use std::path::PathBuf;

use weakval_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed config document, with a 1-based position.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    /// Malformed flag or environment value.
    #[error("parse error in {source_name}: {message}")]
    Argument {
        source_name: String,
        message: String,
    },
    #[error("invalid {field}: {constraint}")]
    Validation { field: String, constraint: String },
    #[error("postselection kept no shots")]
    EmptyPostselection,
    #[error("numeric failure: {0}")]
    Numeric(CoreError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub const EXIT_IO: i32 = 1;
    pub const EXIT_PARSE: i32 = 2;
    pub const EXIT_VALIDATION: i32 = 3;
    pub const EXIT_EMPTY_POSTSELECTION: i32 = 4;
    pub const EXIT_NUMERIC: i32 = 5;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Argument { .. } => Self::EXIT_PARSE,
            CliError::Validation { .. } => Self::EXIT_VALIDATION,
            CliError::EmptyPostselection => Self::EXIT_EMPTY_POSTSELECTION,
            CliError::Numeric(_) => Self::EXIT_NUMERIC,
            CliError::Io { .. } => Self::EXIT_IO,
        }
    }

    pub fn validation(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            constraint: constraint.into(),
        }
    }
}

/// Maps simulator errors onto the CLI categories. Specification problems
/// become validation errors; everything else is numeric.
impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::MissingField { field } => {
                CliError::validation(config_key(field), "required for this experiment")
            }
            CoreError::InvalidSpec { field, constraint } => {
                CliError::validation(config_key(field), constraint)
            }
            CoreError::InvalidStrength { theta } => CliError::validation(
                "epsilon1",
                format!("meter angle θ = {theta} outside [0, π/2]"),
            ),
            CoreError::NegativeDuration { delta_t } => {
                CliError::validation("delta_t", format!("δt = {delta_t} must be ≥ 0"))
            }
            CoreError::NotNormalized { norm_sqr } => CliError::validation(
                "initial",
                format!("|α|²+|β|² = {norm_sqr}, must equal 1 within 1e-9"),
            ),
            CoreError::EmptyPostselection => CliError::EmptyPostselection,
            e => CliError::Numeric(e),
        }
    }
}

/// Config key for a simulator field name.
fn config_key(field: &str) -> &str {
    match field {
        "final_state" => "final",
        f => f,
    }
}
