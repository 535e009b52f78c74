use thiserror::Error;

use crate::classifier::ClassifierError;
use crate::corpus::CorpusError;
use crate::lexicon::LexiconError;
use crate::segment::SegmentError;
use crate::translate::TranslateError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Union of every module error, with a stable machine-readable code.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Upper-snake-case identifier used on the CLI error line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Corpus(e) => e.code(),
            Error::Lexicon(e) => e.code(),
            Error::Translate(e) => e.code(),
            Error::Segment(e) => e.code(),
            Error::Classifier(e) => e.code(),
            Error::Io { .. } => "IO_ERROR",
            Error::Config(_) => "BAD_CONFIG",
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
