//! Binary fake-news classifier.
//!
//! A segment's non-pad ids are embedded and mean-pooled, then pass through
//! five dense layers: the first four use ReLU followed by dropout, the last
//! has a single sigmoid unit giving the probability that the text is fake.
//! A document's probability is the mean over its segments.

mod artifact;
mod metrics;
mod model;
mod train;

use thiserror::Error;

pub use artifact::{ModelArtifact, MAGIC, VERSION};
pub use metrics::{evaluate, predict, predict_text, Confusion, Metrics, Prediction};
pub use model::{DropoutMasks, Gradients, Model, ModelConfig};
pub use train::{train, EarlyStopping, EpochMetrics, FinalMetrics, Progress, TrainConfig, TrainReport};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{0} corpus is empty")]
    EmptyCorpus(&'static str),
    #[error("document `{0}` has no tokens")]
    EmptyDocument(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("bad model file: {0}")]
    BadArtifact(String),
    #[error("model was trained with a different vocabulary")]
    VocabMismatch,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ClassifierError {
    pub fn code(&self) -> &'static str {
        match self {
            ClassifierError::ShapeMismatch(_) => "SHAPE_MISMATCH",
            ClassifierError::EmptyCorpus(_) => "EMPTY_CORPUS",
            ClassifierError::EmptyDocument(_) => "EMPTY_DOCUMENT",
            ClassifierError::Config(_) => "BAD_CONFIG",
            ClassifierError::BadArtifact(_) => "BAD_MODEL_FILE",
            ClassifierError::VocabMismatch => "VOCAB_MISMATCH",
            ClassifierError::Io { .. } => "IO_ERROR",
        }
    }
}
