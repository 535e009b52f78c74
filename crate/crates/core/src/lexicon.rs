//! The augmenter's knowledge: a POS lexicon, a synonym dictionary and a
//! word-embedding table.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use thiserror::Error;

use crate::textkit::{Pos, TokenSeq};

pub const POS_FILE: &str = "pos.tsv";
pub const SYNONYM_FILE: &str = "synonyms.json";
pub const EMBEDDING_FILE: &str = "embeddings.txt";

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown part of speech `{value}`")]
    BadPos { line: usize, value: String },
    #[error("synonym dictionary is not a json object of string arrays: {0}")]
    Json(String),
    #[error("synonym `{synonym}` of `{headword}` is not a single token")]
    MultiWordSynonym { headword: String, synonym: String },
    #[error("vector for `{word}` has {got} components, expected {expected}")]
    DimensionMismatch { word: String, expected: usize, got: usize },
    #[error("vector for `{word}` is all zeros")]
    ZeroVector { word: String },
    #[error("embedding header announces {expected} vectors, found {got}")]
    CountMismatch { expected: usize, got: usize },
}

impl LexiconError {
    pub fn code(&self) -> &'static str {
        match self {
            LexiconError::Io { .. } => "IO_ERROR",
            LexiconError::Malformed { .. } => "MALFORMED_LEXICON",
            LexiconError::BadPos { .. } => "BAD_POS",
            LexiconError::Json(_) => "MALFORMED_SYNONYMS",
            LexiconError::MultiWordSynonym { .. } => "MULTI_WORD_SYNONYM",
            LexiconError::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            LexiconError::ZeroVector { .. } => "ZERO_VECTOR",
            LexiconError::CountMismatch { .. } => "COUNT_MISMATCH",
        }
    }
}

fn read(path: &Path) -> Result<String, LexiconError> {
    std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Word → part of speech lookup. Keys are lowercase.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PosLexicon {
    entries: HashMap<String, Pos>,
}

impl PosLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ignores `Pos::Unknown`: the lexicon only stores known classes.
    pub fn insert(&mut self, word: &str, pos: Pos) {
        if pos != Pos::Unknown {
            self.entries.insert(word.to_lowercase(), pos);
        }
    }

    pub fn get(&self, word: &str) -> Option<Pos> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `word<TAB>pos` per line, pos one of `noun verb adj pron other`.
    pub fn parse_tsv(text: &str) -> Result<Self, LexiconError> {
        let mut lex = PosLexicon::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let (word, pos) = raw.split_once('\t').ok_or_else(|| LexiconError::Malformed {
                line,
                message: "expected `word<TAB>pos`".to_string(),
            })?;
            let pos = match pos.trim() {
                "noun" => Pos::Noun,
                "verb" => Pos::Verb,
                "adj" => Pos::Adjective,
                "pron" => Pos::Pronoun,
                "other" => Pos::Other,
                other => {
                    return Err(LexiconError::BadPos {
                        line,
                        value: other.to_string(),
                    })
                }
            };
            let word = word.trim();
            if word.is_empty() {
                return Err(LexiconError::Malformed {
                    line,
                    message: "empty word".to_string(),
                });
            }
            lex.insert(word, pos);
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::parse_tsv(&read(path)?)
    }
}

impl<S: AsRef<str>> FromIterator<(S, Pos)> for PosLexicon {
    fn from_iter<I: IntoIterator<Item = (S, Pos)>>(iter: I) -> Self {
        let mut lex = PosLexicon::new();
        for (w, p) in iter {
            lex.insert(w.as_ref(), p);
        }
        lex
    }
}

/// Sets each token's class from the lexicon (`Unknown` when absent).
pub fn tag(seq: &TokenSeq, lex: &PosLexicon) -> TokenSeq {
    let mut out = seq.clone();
    for tok in &mut out.tokens {
        tok.pos = lex.get(&tok.normalized).unwrap_or(Pos::Unknown);
    }
    out
}

/// Headword → ordered single-token synonyms, all lowercase.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymDict {
    entries: HashMap<String, Vec<String>>,
}

impl SynonymDict {
    pub fn new() -> Self {
        Self::default()
    }

    /// Lowercases everything, drops the headword itself and repeated
    /// synonyms, and rejects synonyms that are empty or contain whitespace.
    pub fn insert<S: AsRef<str>>(&mut self, headword: &str, synonyms: impl IntoIterator<Item = S>) -> Result<(), LexiconError> {
        let head = headword.trim().to_lowercase();
        let mut seen = HashSet::new();
        let mut list = Vec::new();
        for s in synonyms {
            let raw = s.as_ref();
            let syn = raw.trim().to_lowercase();
            if syn.is_empty() || syn.chars().any(char::is_whitespace) {
                return Err(LexiconError::MultiWordSynonym {
                    headword: head,
                    synonym: raw.to_string(),
                });
            }
            if syn != head && seen.insert(syn.clone()) {
                list.push(syn);
            }
        }
        self.entries.insert(head, list);
        Ok(())
    }

    /// Entry for the lowercased word, or an empty slice.
    pub fn synonyms(&self, word: &str) -> &[String] {
        self.entries
            .get(&word.to_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self, LexiconError> {
        // BTreeMap gives a stable insertion order for error reporting.
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(text).map_err(|e| LexiconError::Json(e.to_string()))?;
        let mut dict = SynonymDict::new();
        for (head, syns) in raw {
            dict.insert(&head, syns)?;
        }
        Ok(dict)
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::from_json(&read(path)?)
    }
}

/// Fixed-dimension word vectors with precomputed squared norms.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: HashMap<String, (Vec<f64>, f64)>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        EmbeddingTable {
            dimension,
            vectors: HashMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<(), LexiconError> {
        let word = word.to_lowercase();
        if vector.len() != self.dimension {
            return Err(LexiconError::DimensionMismatch {
                word,
                expected: self.dimension,
                got: vector.len(),
            });
        }
        let sq_norm = vector.iter().map(|v| v * v).sum::<f64>();
        if sq_norm == 0.0 || !sq_norm.is_finite() {
            return Err(LexiconError::ZeroVector { word });
        }
        self.vectors.insert(word, (vector, sq_norm));
        Ok(())
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(&word.to_lowercase()).map(|(v, _)| v.as_slice())
    }

    /// Cosine similarity clamped to `[0, 1]`; 0 when either word is absent.
    pub fn similarity(&self, a: &str, b: &str) -> f64 {
        let a = a.to_lowercase();
        let b = b.to_lowercase();
        let (Some((va, sa)), Some((vb, sb))) = (self.vectors.get(&a), self.vectors.get(&b)) else {
            return 0.0;
        };
        if a == b {
            return 1.0;
        }
        let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
        // One square root keeps exact cosines (e.g. 0.4 from 2/√25) exact.
        (dot / (sa * sb).sqrt()).clamp(0.0, 1.0)
    }

    /// Header `<count> <dimension>`, then `word v1 … vd` per line.
    pub fn parse_text(text: &str) -> Result<Self, LexiconError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(LexiconError::Malformed {
            line: 1,
            message: "missing `<count> <dimension>` header".to_string(),
        })?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| LexiconError::Malformed {
                line: 1,
                message: "header must be two integers".to_string(),
            })?;
        let [count, dimension] = nums[..] else {
            return Err(LexiconError::Malformed {
                line: 1,
                message: "header must be two integers".to_string(),
            });
        };
        if dimension == 0 {
            return Err(LexiconError::Malformed {
                line: 1,
                message: "dimension must be positive".to_string(),
            });
        }

        let mut table = EmbeddingTable::new(dimension);
        let mut got = 0;
        for (i, line) in lines {
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-blank line");
            let vector: Vec<f64> = parts
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| LexiconError::Malformed {
                    line: i + 1,
                    message: format!("bad number: {e}"),
                })?;
            table.insert(word, vector)?;
            got += 1;
        }
        if got != count {
            return Err(LexiconError::CountMismatch { expected: count, got });
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::parse_text(&read(path)?)
    }
}

/// Everything the augmenter consults.
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconBundle {
    pub pos: PosLexicon,
    pub synonyms: SynonymDict,
    pub embeddings: EmbeddingTable,
}

impl LexiconBundle {
    pub fn empty() -> Self {
        LexiconBundle {
            pos: PosLexicon::new(),
            synonyms: SynonymDict::new(),
            embeddings: EmbeddingTable::new(1),
        }
    }

    /// Reads `pos.tsv`, `synonyms.json` and `embeddings.txt` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, LexiconError> {
        Ok(LexiconBundle {
            pos: PosLexicon::load(&dir.join(POS_FILE))?,
            synonyms: SynonymDict::load(&dir.join(SYNONYM_FILE))?,
            embeddings: EmbeddingTable::load(&dir.join(EMBEDDING_FILE))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textkit::tokenize;
    use proptest::prelude::*;

    #[test]
    fn tags_by_lookup() {
        let lex: PosLexicon = [("vacina", Pos::Noun)].into_iter().collect();
        let tagged = tag(&tokenize("A vacina"), &lex);
        let tags: Vec<_> = tagged.iter().map(|t| t.pos).collect();
        assert_eq!(tags, [Pos::Unknown, Pos::Noun]);
        assert_eq!(tag(&tagged, &lex), tagged);

        let none = tag(&tokenize("Uma vacina nova."), &PosLexicon::new());
        assert!(none.iter().all(|t| t.pos == Pos::Unknown));
    }

    #[test]
    fn pos_tsv() {
        let lex = PosLexicon::parse_tsv("# c\nVaccine\tnoun\nrun\tverb\nnew\tadj\nshe\tpron\n,\tother\n").unwrap();
        assert_eq!(lex.get("vaccine"), Some(Pos::Noun));
        assert_eq!(lex.get("new"), Some(Pos::Adjective));
        assert_eq!(lex.len(), 5);
        assert!(matches!(
            PosLexicon::parse_tsv("a\tnoun\nb\tadverb\n"),
            Err(LexiconError::BadPos { line: 2, .. })
        ));
        assert!(matches!(PosLexicon::parse_tsv("nope\n"), Err(LexiconError::Malformed { line: 1, .. })));
    }

    #[test]
    fn synonym_lookup_folds_case() {
        let dict = SynonymDict::from_json(r#"{"disease": ["illness", "malady"]}"#).unwrap();
        assert_eq!(dict.synonyms("Disease"), ["illness", "malady"]);
        assert!(dict.synonyms("vaccine").is_empty());
    }

    #[test]
    fn synonym_invariants_enforced_at_load() {
        let dict = SynonymDict::from_json(r#"{"Cure": ["cure", "Remedy", "remedy", "fix"]}"#).unwrap();
        assert_eq!(dict.synonyms("cure"), ["remedy", "fix"]);
        assert!(matches!(
            SynonymDict::from_json(r#"{"flu": ["common cold"]}"#),
            Err(LexiconError::MultiWordSynonym { .. })
        ));
        assert!(matches!(SynonymDict::from_json(r#"{"flu": [""]}"#), Err(LexiconError::MultiWordSynonym { .. })));
        assert!(matches!(SynonymDict::from_json("[1]"), Err(LexiconError::Json(_))));
    }

    fn table(rows: &[(&str, &[f64])]) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(rows[0].1.len());
        for (w, v) in rows {
            t.insert(w, v.to_vec()).unwrap();
        }
        t
    }

    #[test]
    fn similarity_examples() {
        let t = table(&[("x", &[1.0, 0.0]), ("y", &[0.0, 1.0]), ("z", &[1.0, 1.0]), ("n", &[-1.0, 0.0])]);
        assert_eq!(t.similarity("x", "x"), 1.0);
        assert_eq!(t.similarity("x", "y"), 0.0);
        // 1 / (1 * sqrt 2)
        assert!((t.similarity("x", "z") - 0.70711).abs() < 1e-5);
        assert_eq!(t.similarity("x", "n"), 0.0);
        assert_eq!(t.similarity("x", "missing"), 0.0);
        assert_eq!(t.similarity("missing", "missing"), 0.0);
        assert_eq!(t.similarity("X", "z"), t.similarity("x", "z"));
    }

    #[test]
    fn embedding_text_format() {
        let t = EmbeddingTable::parse_text("2 3\nvaccine 0.1 0.2 0.3\nshot 0.1 0.2 0.25\n").unwrap();
        assert_eq!(t.dimension(), 3);
        assert_eq!(t.vector("shot"), Some(&[0.1, 0.2, 0.25][..]));
        assert!(matches!(
            EmbeddingTable::parse_text("1 2\na 1 2 3\n"),
            Err(LexiconError::DimensionMismatch { expected: 2, got: 3, .. })
        ));
        assert!(matches!(EmbeddingTable::parse_text("1 2\na 0 0\n"), Err(LexiconError::ZeroVector { .. })));
        assert!(matches!(
            EmbeddingTable::parse_text("3 1\na 1\n"),
            Err(LexiconError::CountMismatch { expected: 3, got: 1 })
        ));
        assert!(matches!(EmbeddingTable::parse_text("1 2\na 1 x\n"), Err(LexiconError::Malformed { line: 2, .. })));
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-5.0f64..5.0, 3).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn similarity_is_symmetric(a in vec3(), b in vec3()) {
            let mut t = EmbeddingTable::new(3);
            t.insert("a", a).unwrap();
            t.insert("b", b).unwrap();
            let (ab, ba) = (t.similarity("a", "b"), t.similarity("b", "a"));
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn similarity_is_scale_invariant(a in vec3(), b in vec3(), c in 0.01f64..100.0) {
            let mut t = EmbeddingTable::new(3);
            t.insert("a", a.clone()).unwrap();
            t.insert("b", b).unwrap();
            let before = t.similarity("a", "b");
            t.insert("a", a.iter().map(|x| x * c).collect()).unwrap();
            prop_assert!((t.similarity("a", "b") - before).abs() < 1e-9);
        }

        #[test]
        fn tagging_keeps_text_and_spans(text in "\\PC{0,40}", nouns in proptest::collection::vec("[a-z]{1,3}", 0..5)) {
            let lex: PosLexicon = nouns.iter().map(|n| (n.as_str(), Pos::Noun)).collect();
            let seq = tokenize(&text);
            let tagged = tag(&seq, &lex);
            prop_assert_eq!(&tagged.source, &seq.source);
            prop_assert_eq!(tagged.tokens.len(), seq.tokens.len());
            for (a, b) in tagged.iter().zip(seq.iter()) {
                prop_assert_eq!(&a.surface, &b.surface);
                prop_assert_eq!(a.span, b.span);
            }
        }
    }
}
