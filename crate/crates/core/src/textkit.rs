//! Tokenization, sentence splitting, stopwords and word-frequency tables.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

/// Grammatical class of a token. `Unknown` until tagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pos {
    Noun,
    Verb,
    Adjective,
    Pronoun,
    Other,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    /// Lowercased surface.
    pub normalized: String,
    /// Half-open character (not byte) offsets into the source text.
    pub span: (usize, usize),
    pub pos: Pos,
}

impl Token {
    fn new(surface: String, span: (usize, usize), pos: Pos) -> Self {
        let normalized = surface.to_lowercase();
        Token {
            surface,
            normalized,
            span,
            pos,
        }
    }

    /// True when the token has no alphanumeric character.
    pub fn is_punctuation(&self) -> bool {
        is_punctuation_only(&self.surface)
    }
}

/// Tokens of one text together with the text itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    pub tokens: Vec<Token>,
    pub source: String,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Token> {
        self.tokens.iter()
    }

    /// Normalized forms, punctuation included.
    pub fn words(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.normalized.clone()).collect()
    }

    /// Rebuilds text from token surfaces and the whitespace gaps between
    /// their spans.
    pub fn detokenize(&self) -> String {
        let chars: Vec<char> = self.source.chars().collect();
        let mut out = String::with_capacity(self.source.len());
        let mut cursor = 0;
        for t in &self.tokens {
            out.extend(&chars[cursor..t.span.0]);
            out.push_str(&t.surface);
            cursor = t.span.1;
        }
        out.extend(&chars[cursor..]);
        out
    }

    /// Returns a new sequence where token `i` has surface `replacements[i]`
    /// (when `Some`); the source is rebuilt and spans shifted accordingly.
    pub fn with_surfaces(&self, replacements: &[Option<String>]) -> TokenSeq {
        let chars: Vec<char> = self.source.chars().collect();
        let mut source = String::with_capacity(self.source.len());
        let mut tokens = Vec::with_capacity(self.tokens.len());
        let mut cursor = 0;
        let mut out_len = 0;
        for (i, t) in self.tokens.iter().enumerate() {
            let gap = &chars[cursor..t.span.0];
            source.extend(gap);
            out_len += gap.len();
            let surface = replacements.get(i).cloned().flatten().unwrap_or_else(|| t.surface.clone());
            let n = surface.chars().count();
            source.push_str(&surface);
            tokens.push(Token::new(surface, (out_len, out_len + n), t.pos));
            out_len += n;
            cursor = t.span.1;
        }
        source.extend(&chars[cursor..]);
        TokenSeq { tokens, source }
    }
}

const UNICODE_PUNCT: &[char] = &[
    '“', '”', '‘', '’', '«', '»', '…', '–', '—', '¡', '¿', '·', '„', '‹', '›', '•',
];

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || UNICODE_PUNCT.contains(&c)
}

/// Punctuation that stays inside a word when flanked by word characters:
/// `covid-19`, `don't`, `3.5`, `1,000`.
fn joins(c: char, prev: char, next: char) -> bool {
    match c {
        '-' | '\'' | '’' => !is_punct(prev) && !is_punct(next),
        '.' | ',' => prev.is_ascii_digit() && next.is_ascii_digit(),
        _ => false,
    }
}

fn is_punctuation_only(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_alphanumeric)
}

/// Splits on Unicode whitespace and detaches punctuation marks into
/// single-character tokens (tagged `Other`). Word tokens are `Unknown`.
pub fn tokenize(text: &str) -> TokenSeq {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut word_start: Option<usize> = None;

    let flush = |tokens: &mut Vec<Token>, start: &mut Option<usize>, end: usize| {
        if let Some(s) = start.take() {
            tokens.push(Token::new(chars[s..end].iter().collect(), (s, end), Pos::Unknown));
        }
    };

    for (i, &c) in chars.iter().enumerate() {
        if c.is_whitespace() {
            flush(&mut tokens, &mut word_start, i);
            continue;
        }
        if is_punct(c) {
            let prev = if i > 0 { chars[i - 1] } else { ' ' };
            let next = chars.get(i + 1).copied().unwrap_or(' ');
            let inside = word_start.is_some() && !next.is_whitespace() && joins(c, prev, next);
            if !inside {
                flush(&mut tokens, &mut word_start, i);
                tokens.push(Token::new(c.to_string(), (i, i + 1), Pos::Other));
            }
            continue;
        }
        if word_start.is_none() {
            word_start = Some(i);
        }
    }
    flush(&mut tokens, &mut word_start, chars.len());

    TokenSeq {
        tokens,
        source: text.to_string(),
    }
}

/// Cuts after every `.`, abbreviations included. Each piece keeps its
/// terminating period; the pieces concatenate back to the input.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if c == '.' {
            out.push(text[start..i + 1].to_string());
            start = i + 1;
        }
    }
    if start < text.len() || out.is_empty() {
        out.push(text[start..].to_string());
    }
    out
}

/// Lowercased words ignored by frequency counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

const DEFAULT_STOPWORDS: &str = include_str!("../assets/stopwords.txt");

impl Stopwords {
    pub fn none() -> Self {
        Stopwords(HashSet::new())
    }

    /// Small built-in Portuguese + English list.
    pub fn default_list() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    /// One word per line; `#` starts a comment.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect();
        Stopwords(words)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Stopwords(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

/// Word counts sorted by count descending, then word ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrequencyTable {
    pub entries: Vec<(String, u64)>,
}

impl FrequencyTable {
    pub fn from_counts(counts: HashMap<String, u64>, top_k: usize) -> Self {
        let mut entries: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        entries.truncate(top_k);
        FrequencyTable { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(w, _)| w.as_str())
    }

    /// `word,count` with header.
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["word", "count"])?;
        for (w, c) in &self.entries {
            wtr.write_record([w.as_str(), &c.to_string()])?;
        }
        wtr.flush()
    }

    /// JSON array of `[word, count]` pairs.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("frequency table serializes")
    }
}

/// Counts normalized non-punctuation tokens over raw texts.
pub fn text_frequencies<'a>(
    texts: impl IntoIterator<Item = &'a str>,
    stopwords: &Stopwords,
    top_k: usize,
) -> FrequencyTable {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for text in texts {
        for tok in tokenize(text).tokens {
            if tok.is_punctuation() || stopwords.contains(&tok.normalized) {
                continue;
            }
            *counts.entry(tok.normalized).or_insert(0) += 1;
        }
    }
    FrequencyTable::from_counts(counts, top_k)
}

pub fn word_frequencies<'a>(
    docs: impl IntoIterator<Item = &'a Document>,
    stopwords: &Stopwords,
    top_k: usize,
) -> FrequencyTable {
    text_frequencies(docs.into_iter().map(|d| d.text.as_str()), stopwords, top_k)
}
