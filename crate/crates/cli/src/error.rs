use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{module}: {source}")]
    Core {
        module: &'static str,
        #[source]
        source: rankaudit::Error,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("policy mismatch: {0}")]
    PolicyMismatch(String),
    #[error("{0}")]
    Uncontrolled(String),
    #[error("serialization: {0}")]
    Serialize(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn is_validation(e: &rankaudit::Error) -> bool {
    use rankaudit::Error as E;
    match e {
        E::Spec(_)
        | E::MissingColumn(_)
        | E::NonBinarySensitive { .. }
        | E::NonBinaryTarget { .. }
        | E::EmptyFile
        | E::InvalidNumber { .. }
        | E::NonNumericColumn(_)
        | E::InvalidFractions(_)
        | E::DegenerateSplit { .. }
        | E::InvalidParameter(_)
        | E::IdMismatch(_)
        | E::ScoreOutOfRange { .. }
        | E::RateOutOfRange(_)
        | E::ModelFormat(_)
        | E::Csv(_) => true,
        E::Method { source, .. } => is_validation(source),
        _ => false,
    }
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::PolicyMismatch(_) | CliError::Uncontrolled(_) => EXIT_VALIDATION,
            CliError::Core { source, .. } if is_validation(source) => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        }
    }
}

/// Tag core errors with the module that raised them.
pub trait InModule<T> {
    fn in_module(self, module: &'static str) -> CliResult<T>;
}

impl<T> InModule<T> for rankaudit::Result<T> {
    fn in_module(self, module: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Core { module, source })
    }
}
