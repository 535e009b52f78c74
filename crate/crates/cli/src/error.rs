use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] taug::Error),
    #[error("{0}: file not found")]
    Missing(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Missing(_) => "MISSING_FILE",
            CliError::Config(_) => "BAD_CONFIG",
            CliError::Io { .. } => "IO_ERROR",
        }
    }

    pub fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

macro_rules! via_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

via_core!(
    taug::corpus::CorpusError,
    taug::lexicon::LexiconError,
    taug::translate::TranslateError,
    taug::segment::SegmentError,
    taug::classifier::ClassifierError
);

pub type Result<T, E = CliError> = std::result::Result<T, E>;
