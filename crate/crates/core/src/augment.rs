//! Noun-for-synonym data augmentation.
//!
//! Two rules decide every substitution:
//!
//! 1. only tokens tagged [`Pos::Noun`] are ever replaced;
//! 2. among the noun's synonyms, the one most similar to the noun wins, and
//!    it is used only if its similarity reaches the configured threshold.
//!
//! Ties between equally similar synonyms go to the lexicographically
//! smallest. A replacement copies the leading capitalization of the word it
//! replaces. Synonyms are single tokens, so token counts never change.

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusError, Document};
use crate::error::{Error, Result};
use crate::lexicon::{tag, LexiconBundle};
use crate::textkit::{tokenize, Pos, TokenSeq};

pub const DEFAULT_THRESHOLD: f64 = 0.40;
pub const AUGMENTED_SUFFIX: &str = "-aug";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentMode {
    /// Keep originals and add one augmented copy of each.
    #[default]
    Append,
    /// Overwrite each document with its augmented text.
    Replace,
}

impl FromStr for AugmentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "append" => Ok(AugmentMode::Append),
            "replace" => Ok(AugmentMode::Replace),
            other => Err(format!("unknown augment mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub threshold: f64,
    pub mode: AugmentMode,
    /// Unused by the deterministic procedure; kept for stochastic variants.
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            threshold: DEFAULT_THRESHOLD,
            mode: AugmentMode::Append,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "augment threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replacement {
    pub token_index: usize,
    pub original: String,
    pub substitute: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentTrace {
    pub replacements: Vec<Replacement>,
}

impl AugmentTrace {
    pub fn len(&self) -> usize {
        self.replacements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replacements.is_empty()
    }
}

/// Highest-similarity synonym, ties broken lexicographically.
fn best_synonym<'a>(word: &str, bundle: &'a LexiconBundle) -> Option<(&'a str, f64)> {
    let mut best: Option<(&str, f64)> = None;
    for cand in bundle.synonyms.synonyms(word) {
        let sim = bundle.embeddings.similarity(word, cand);
        best = match best {
            Some((b, bs)) if bs > sim || (bs == sim && b <= cand.as_str()) => Some((b, bs)),
            _ => Some((cand.as_str(), sim)),
        };
    }
    best
}

fn match_leading_case(original: &str, substitute: &str) -> String {
    let upper = original.chars().next().is_some_and(char::is_uppercase);
    let mut chars = substitute.chars();
    match chars.next() {
        Some(first) if upper => first.to_uppercase().chain(chars).collect(),
        _ => substitute.to_string(),
    }
}

/// Applies both rules to an already tagged sequence.
pub fn augment_text(seq: &TokenSeq, bundle: &LexiconBundle, cfg: &AugmentConfig) -> (TokenSeq, AugmentTrace) {
    let mut surfaces = vec![None; seq.len()];
    let mut trace = AugmentTrace::default();
    for (i, tok) in seq.iter().enumerate() {
        if tok.pos != Pos::Noun {
            continue;
        }
        let Some((synonym, similarity)) = best_synonym(&tok.normalized, bundle) else {
            continue;
        };
        if similarity < cfg.threshold {
            continue;
        }
        let substitute = match_leading_case(&tok.surface, synonym);
        trace.replacements.push(Replacement {
            token_index: i,
            original: tok.surface.clone(),
            substitute: substitute.clone(),
            similarity,
        });
        surfaces[i] = Some(substitute);
    }
    (seq.with_surfaces(&surfaces), trace)
}

/// Tokenizes, tags and augments raw text.
pub fn augment_str(text: &str, bundle: &LexiconBundle, cfg: &AugmentConfig) -> (String, AugmentTrace) {
    let tagged = tag(&tokenize(text), &bundle.pos);
    let (out, trace) = augment_text(&tagged, bundle, cfg);
    (out.source, trace)
}

/// Trace of one output document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocTrace {
    pub doc_id: String,
    pub trace: AugmentTrace,
}

/// Augments every document. In `Append` mode the output holds all
/// originals followed by their copies (ids suffixed `-aug`, same order); in
/// `Replace` mode each document is rewritten in place. Traces carry the id
/// of the output document they describe.
pub fn augment_corpus(corpus: &Corpus, bundle: &LexiconBundle, cfg: &AugmentConfig) -> Result<(Corpus, Vec<DocTrace>), CorpusError> {
    let mut augmented = Vec::with_capacity(corpus.len());
    let mut traces = Vec::with_capacity(corpus.len());
    for doc in corpus {
        let (text, trace) = augment_str(&doc.text, bundle, cfg);
        let id = match cfg.mode {
            AugmentMode::Append => format!("{}{AUGMENTED_SUFFIX}", doc.id),
            AugmentMode::Replace => doc.id.clone(),
        };
        traces.push(DocTrace {
            doc_id: id.clone(),
            trace,
        });
        augmented.push(Document { id, text, ..doc.clone() });
    }

    let documents = match cfg.mode {
        AugmentMode::Append => corpus.iter().cloned().chain(augmented).collect(),
        AugmentMode::Replace => augmented,
    };
    let out = Corpus::new(documents, format!("{} [augmented]", corpus.provenance()))?;
    Ok((out, traces))
}

#[derive(Serialize)]
struct TraceLine<'a> {
    doc_id: &'a str,
    token_index: usize,
    original: &'a str,
    substitute: &'a str,
    similarity: f64,
}

/// One JSON object per replacement.
pub fn write_trace_jsonl<W: Write>(traces: &[DocTrace], mut writer: W) -> std::io::Result<()> {
    for dt in traces {
        for r in &dt.trace.replacements {
            let line = TraceLine {
                doc_id: &dt.doc_id,
                token_index: r.token_index,
                original: &r.original,
                substitute: &r.substitute,
                similarity: r.similarity,
            };
            serde_json::to_writer(&mut writer, &line)?;
            writer.write_all(b"\n")?;
        }
    }
    Ok(())
}
