//! News-corpus toolkit: synonym-based data augmentation, sentence-chunked
//! translation, sliding-window subword encoding and a small dense binary
//! classifier trained with patience-based early stopping.
//!
//! The modules follow the order of the processing pipeline:
//!
//! 1. [`corpus`] loads, validates, splits and persists labeled documents.
//! 2. [`textkit`] tokenizes text, splits sentences and counts words.
//! 3. [`lexicon`] tags parts of speech and holds synonyms and embeddings.
//! 4. [`augment`] swaps nouns for their most similar synonym.
//! 5. [`translate`] chunks documents and drives a rate-limited backend.
//! 6. [`segment`] cuts documents into overlapping windows of subword ids.
//! 7. [`classifier`] trains, evaluates and applies the fake-news model.

pub mod augment;
pub mod classifier;
pub mod corpus;
pub mod error;
pub mod lexicon;
pub mod segment;
pub mod textkit;
pub mod translate;

pub use error::{Error, Result};
