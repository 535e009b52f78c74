//! Sliding-window segmentation and greedy longest-match subword encoding.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Document;
use crate::textkit::tokenize;

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const SPECIALS: [&str; 4] = [PAD, UNK, CLS, SEP];
/// Marks a piece that continues a word.
pub const CONTINUATION: &str = "##";
pub const DEFAULT_VOCAB_WORDS: usize = 30_000;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("vocabulary line {line}: expected `{expected}`, found `{found}`")]
    MissingSpecial { line: usize, expected: String, found: String },
    #[error("vocabulary line {line}: duplicate piece `{piece}`")]
    DuplicatePiece { line: usize, piece: String },
    #[error("vocabulary line {line}: empty piece")]
    EmptyPiece { line: usize },
    #[error("invalid segment config: {0}")]
    Config(String),
}

impl SegmentError {
    pub fn code(&self) -> &'static str {
        match self {
            SegmentError::Io { .. } => "IO_ERROR",
            SegmentError::MissingSpecial { .. } => "BAD_VOCAB",
            SegmentError::DuplicatePiece { .. } => "BAD_VOCAB",
            SegmentError::EmptyPiece { .. } => "BAD_VOCAB",
            SegmentError::Config(_) => "BAD_CONFIG",
        }
    }
}

/// Piece → id map. Ids are dense line numbers; the first four are
/// `[PAD] [UNK] [CLS] [SEP]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordVocab {
    pieces: Vec<String>,
    index: HashMap<String, u32>,
    longest_piece: usize,
}

impl SubwordVocab {
    pub const PAD_ID: u32 = 0;
    pub const UNK_ID: u32 = 1;
    pub const CLS_ID: u32 = 2;
    pub const SEP_ID: u32 = 3;

    pub fn from_pieces(pieces: Vec<String>) -> Result<Self, SegmentError> {
        for (i, special) in SPECIALS.iter().enumerate() {
            match pieces.get(i) {
                Some(p) if p == special => {}
                other => {
                    return Err(SegmentError::MissingSpecial {
                        line: i + 1,
                        expected: special.to_string(),
                        found: other.cloned().unwrap_or_default(),
                    })
                }
            }
        }
        let mut index = HashMap::with_capacity(pieces.len());
        let mut longest_piece = 0;
        for (i, p) in pieces.iter().enumerate() {
            if p.is_empty() {
                return Err(SegmentError::EmptyPiece { line: i + 1 });
            }
            if index.insert(p.clone(), i as u32).is_some() {
                return Err(SegmentError::DuplicatePiece {
                    line: i + 1,
                    piece: p.clone(),
                });
            }
            longest_piece = longest_piece.max(p.chars().count());
        }
        Ok(SubwordVocab {
            pieces,
            index,
            longest_piece,
        })
    }

    /// Top `max_words` normalized words by frequency (ties alphabetical),
    /// then every character seen, both as a word-initial piece and as a
    /// `##` continuation, so any word over seen characters is encodable.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, max_words: usize) -> Self {
        let mut counts: HashMap<String, u64> = HashMap::new();
        let mut chars = BTreeSet::new();
        for text in texts {
            for tok in tokenize(text).tokens {
                chars.extend(tok.normalized.chars());
                *counts.entry(tok.normalized).or_insert(0) += 1;
            }
        }
        let mut words: Vec<(String, u64)> = counts.into_iter().collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        words.truncate(max_words);

        let mut pieces: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        let mut seen: std::collections::HashSet<String> = pieces.iter().cloned().collect();
        let candidates = words
            .into_iter()
            .map(|(w, _)| w)
            .chain(chars.iter().map(|c| c.to_string()))
            .chain(chars.iter().map(|c| format!("{CONTINUATION}{c}")));
        for p in candidates {
            if seen.insert(p.clone()) {
                pieces.push(p);
            }
        }
        Self::from_pieces(pieces).expect("built vocabulary is well-formed")
    }

    pub fn build_from_documents<'a>(docs: impl IntoIterator<Item = &'a Document>, max_words: usize) -> Self {
        Self::build(docs.into_iter().map(|d| d.text.as_str()), max_words)
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.index.get(piece).copied()
    }

    pub fn piece(&self, id: u32) -> Option<&str> {
        self.pieces.get(id as usize).map(String::as_str)
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    pub fn parse(text: &str) -> Result<Self, SegmentError> {
        Self::from_pieces(text.lines().map(str::to_string).collect())
    }

    pub fn to_text(&self) -> String {
        let mut s = self.pieces.join("\n");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self, SegmentError> {
        let text = std::fs::read_to_string(path).map_err(|source| SegmentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), SegmentError> {
        std::fs::write(path, self.to_text()).map_err(|source| SegmentError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// SHA-256 of the file form; ties a model to the vocabulary it was
    /// trained with.
    pub fn fingerprint(&self) -> [u8; 32] {
        Sha256::digest(self.to_text().as_bytes()).into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    pub window_size: usize,
    pub overlap: usize,
    pub max_seq_len: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            window_size: 150,
            overlap: 30,
            max_seq_len: 512,
        }
    }
}

impl SegmentConfig {
    pub fn new(window_size: usize, overlap: usize, max_seq_len: usize) -> Result<Self, SegmentError> {
        let cfg = SegmentConfig {
            window_size,
            overlap,
            max_seq_len,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SegmentError> {
        if self.window_size == 0 {
            return Err(SegmentError::Config("window_size must be positive".into()));
        }
        if self.overlap >= self.window_size {
            return Err(SegmentError::Config(format!(
                "overlap {} must be smaller than window_size {}",
                self.overlap, self.window_size
            )));
        }
        if self.max_seq_len < self.window_size.max(2) {
            return Err(SegmentError::Config(format!(
                "max_seq_len {} must be at least window_size {} and 2",
                self.max_seq_len, self.window_size
            )));
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.window_size - self.overlap
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub index: usize,
    /// Position of the first word in the document.
    pub start: usize,
    pub words: Vec<String>,
}

/// Window `k` covers `words[k*stride .. k*stride + window_size)`; windows
/// stop at the first one reaching the end of the document.
pub fn window_words(words: &[String], cfg: &SegmentConfig) -> Vec<Window> {
    let mut out = Vec::new();
    let stride = cfg.stride();
    let mut start = 0;
    while start < words.len() {
        let end = (start + cfg.window_size).min(words.len());
        out.push(Window {
            index: out.len(),
            start,
            words: words[start..end].to_vec(),
        });
        if end == words.len() {
            break;
        }
        start += stride;
    }
    out
}

/// Greedy longest-match-first. A word with any unmatchable remainder
/// becomes a single `[UNK]`.
pub fn subword_tokenize(word: &str, vocab: &SubwordVocab) -> Vec<u32> {
    let chars: Vec<char> = word.chars().collect();
    let mut ids = Vec::new();
    let mut start = 0;
    let mut candidate = String::new();
    while start < chars.len() {
        let limit = (start + vocab.longest_piece).min(chars.len());
        let mut found = None;
        for end in (start + 1..=limit).rev() {
            candidate.clear();
            if start > 0 {
                candidate.push_str(CONTINUATION);
            }
            candidate.extend(&chars[start..end]);
            if let Some(id) = vocab.id(&candidate) {
                found = Some((id, end));
                break;
            }
        }
        match found {
            Some((id, end)) => {
                ids.push(id);
                start = end;
            }
            None => return vec![SubwordVocab::UNK_ID],
        }
    }
    ids
}

/// One fixed-length model input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub doc_id: String,
    pub index: usize,
    pub word_window: Vec<String>,
    /// Exactly `max_seq_len` ids, padded with `[PAD]`.
    pub ids: Vec<u32>,
    /// Number of leading non-pad ids.
    pub attention_len: usize,
}

impl Segment {
    pub fn active_ids(&self) -> &[u32] {
        &self.ids[..self.attention_len]
    }
}

/// `[CLS] pieces… [SEP]`, cut to `max_seq_len` with `[SEP]` kept last,
/// then padded.
pub fn encode_segment(doc_id: &str, index: usize, window: &[String], vocab: &SubwordVocab, cfg: &SegmentConfig) -> Segment {
    let max = cfg.max_seq_len;
    let mut ids = Vec::with_capacity(max);
    ids.push(SubwordVocab::CLS_ID);
    for w in window {
        ids.extend(subword_tokenize(w, vocab));
        if ids.len() >= max {
            break;
        }
    }
    ids.truncate(max - 1);
    ids.push(SubwordVocab::SEP_ID);
    let attention_len = ids.len();
    ids.resize(max, SubwordVocab::PAD_ID);
    Segment {
        doc_id: doc_id.to_string(),
        index,
        word_window: window.to_vec(),
        ids,
        attention_len,
    }
}

/// The word sequence the windows run over: normalized tokens, punctuation
/// included.
pub fn document_words(text: &str) -> Vec<String> {
    tokenize(text).words()
}

pub fn segment_text(doc_id: &str, text: &str, vocab: &SubwordVocab, cfg: &SegmentConfig) -> Vec<Segment> {
    window_words(&document_words(text), cfg)
        .into_iter()
        .map(|w| encode_segment(doc_id, w.index, &w.words, vocab, cfg))
        .collect()
}

pub fn segment_document(doc: &Document, vocab: &SubwordVocab, cfg: &SegmentConfig) -> Vec<Segment> {
    segment_text(&doc.id, &doc.text, vocab, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    fn ranges(ws: &[Window]) -> Vec<(usize, usize)> {
        ws.iter().map(|w| (w.start, w.start + w.words.len())).collect()
    }

    fn vocab(pieces: &[&str]) -> SubwordVocab {
        SubwordVocab::from_pieces(SPECIALS.iter().chain(pieces).map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn window_examples() {
        let cfg = SegmentConfig::default();
        assert_eq!(ranges(&window_words(&words(150), &cfg)), [(0, 150)]);
        let ws = window_words(&words(270), &cfg);
        assert_eq!(ranges(&ws), [(0, 150), (120, 270)]);
        assert_eq!(ws[0].words[120..], ws[1].words[..30]);
        assert_eq!(ranges(&window_words(&words(151), &cfg)), [(0, 150), (120, 151)]);
        assert!(window_words(&[], &cfg).is_empty());
        assert_eq!(ranges(&window_words(&words(10), &cfg)), [(0, 10)]);
    }

    #[test]
    fn config_validation() {
        assert!(SegmentConfig::new(150, 30, 512).is_ok());
        assert!(SegmentConfig::new(150, 150, 512).is_err());
        assert!(SegmentConfig::new(150, 30, 100).is_err());
        assert!(SegmentConfig::new(0, 0, 512).is_err());
        assert!(SegmentConfig::new(1, 0, 1).is_err());
    }

    #[test]
    fn subword_examples() {
        let v = vocab(&["covid", "##19", "##1", "vac", "##cine", "##c"]);
        assert_eq!(subword_tokenize("covid", &v), [v.id("covid").unwrap()]);
        assert_eq!(subword_tokenize("covid19", &v), [v.id("covid").unwrap(), v.id("##19").unwrap()]);
        assert_eq!(subword_tokenize("vaccine", &v), [v.id("vac").unwrap(), v.id("##cine").unwrap()]);
        assert_eq!(subword_tokenize("covidx", &v), [SubwordVocab::UNK_ID]);
        assert_eq!(subword_tokenize("xyz", &v), [SubwordVocab::UNK_ID]);
    }

    #[test]
    fn encode_pads_and_brackets() {
        let v = vocab(&["a"]);
        let cfg = SegmentConfig::new(4, 1, 8).unwrap();
        let seg = encode_segment("d", 0, &[], &v, &cfg);
        assert_eq!(seg.ids, [2, 3, 0, 0, 0, 0, 0, 0]);
        assert_eq!(seg.attention_len, 2);

        let seg = encode_segment("d", 0, &["a".into(), "a".into()], &v, &cfg);
        assert_eq!(seg.ids, [2, 4, 4, 3, 0, 0, 0, 0]);
        assert_eq!(seg.active_ids(), [2, 4, 4, 3]);
    }

    #[test]
    fn encode_truncates_with_sep_last() {
        // Every 4-letter word splits into 4 pieces: a window of 3 words
        // needs 2 + 12 = 14 ids and must be cut to 8.
        let v = vocab(&["a", "##b", "##c", "##d"]);
        let cfg = SegmentConfig::new(3, 0, 8).unwrap();
        let window: Vec<String> = vec!["abcd".into(); 3];
        assert_eq!(subword_tokenize("abcd", &v).len(), 4);
        let seg = encode_segment("d", 0, &window, &v, &cfg);
        assert_eq!(seg.ids.len(), 8);
        assert_eq!(seg.attention_len, 8);
        assert_eq!(seg.ids[0], SubwordVocab::CLS_ID);
        assert_eq!(seg.ids[7], SubwordVocab::SEP_ID);
        assert_eq!(seg.ids[1..7], [4, 5, 6, 7, 4, 5]);
    }

    #[test]
    fn built_vocab_covers_training_text() {
        let v = SubwordVocab::build(["Vacina nova, vacina velha.", "covid19 vacina"], 2);
        assert_eq!(v.piece(4), Some("vacina"));
        // "," "." "covid19" "nova" "velha" each once: alphabetical tie order.
        assert_eq!(v.piece(5), Some(","));
        assert!(v.id("##9").is_some());
        for w in ["nova", "covid19", "velha"] {
            let ids = subword_tokenize(w, &v);
            assert!(!ids.contains(&SubwordVocab::UNK_ID), "{w}");
        }
        assert_eq!(subword_tokenize("zzz", &v), [SubwordVocab::UNK_ID]);
        let again = SubwordVocab::parse(&v.to_text()).unwrap();
        assert_eq!(again, v);
        assert_eq!(again.fingerprint(), v.fingerprint());
    }

    #[test]
    fn vocab_file_validation() {
        assert!(matches!(SubwordVocab::parse("[PAD]\n[UNK]\n[SEP]\n"), Err(SegmentError::MissingSpecial { line: 3, .. })));
        assert!(matches!(
            SubwordVocab::parse("[PAD]\n[UNK]\n[CLS]\n[SEP]\na\na\n"),
            Err(SegmentError::DuplicatePiece { line: 6, .. })
        ));
    }

    proptest! {
        #[test]
        fn windows_cover_and_overlap(n in 0usize..700, window in 1usize..200, overlap_frac in 0.0f64..1.0) {
            let overlap = ((window as f64) * overlap_frac) as usize % window;
            let cfg = SegmentConfig::new(window, overlap, window.max(2)).unwrap();
            let ws = words(n);
            let wins = window_words(&ws, &cfg);
            let mut rebuilt = Vec::new();
            for (k, w) in wins.iter().enumerate() {
                prop_assert!(w.words.len() <= window);
                let skip = if k == 0 { 0 } else { overlap };
                rebuilt.extend_from_slice(&w.words[skip..]);
                if k + 1 < wins.len() {
                    let next = &wins[k + 1];
                    let shared = overlap.min(next.words.len());
                    prop_assert_eq!(&w.words[w.words.len() - overlap..][..shared], &next.words[..shared]);
                }
            }
            prop_assert_eq!(rebuilt, ws);
        }

        #[test]
        fn encoded_ids_are_in_range(text in "[a-e ]{0,200}", probe in "[a-f]{1,12}") {
            let v = SubwordVocab::build([text.as_str()], 5);
            let ids = subword_tokenize(&probe, &v);
            prop_assert!(!ids.is_empty());
            prop_assert!(ids.iter().all(|&i| (i as usize) < v.len()));
            prop_assert_eq!(subword_tokenize(&probe, &v), ids);
            let cfg = SegmentConfig::new(20, 5, 24).unwrap();
            for seg in segment_text("d", &text, &v, &cfg) {
                prop_assert_eq!(seg.ids.len(), 24);
                prop_assert!(seg.attention_len <= 24);
                prop_assert_eq!(seg.ids[seg.attention_len - 1], SubwordVocab::SEP_ID);
                prop_assert!(seg.ids[seg.attention_len..].iter().all(|&i| i == SubwordVocab::PAD_ID));
            }
        }
    }
}
