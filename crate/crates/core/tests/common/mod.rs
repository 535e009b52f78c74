//! Synthetic corpora and lexicons shared by the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;

use taug::corpus::{Corpus, Document, Label, Split};
use taug::lexicon::{EmbeddingTable, LexiconBundle, PosLexicon, SynonymDict};
use taug::textkit::Pos;

const SYLLABLES: [&str; 16] = [
    "ba", "ke", "di", "mo", "lu", "sa", "ti", "ro", "ne", "fa", "gu", "pi", "ze", "ho", "wa", "ly",
];

/// Distinct alphabetic word for every `i < 16^3`.
pub fn word(i: usize) -> String {
    assert!(i < 4096);
    [i / 256, (i / 16) % 16, i % 16].iter().map(|&d| SYLLABLES[d]).collect()
}

pub fn words(range: std::ops::Range<usize>) -> Vec<String> {
    range.map(word).collect()
}

/// Vocabulary layout for the two-class generator.
pub struct ClassVocab {
    pub shared: Vec<String>,
    pub real: Vec<String>,
    pub fake: Vec<String>,
}

impl ClassVocab {
    pub fn new(shared: usize, per_class: usize) -> Self {
        ClassVocab {
            shared: words(0..shared),
            real: words(shared..shared + per_class),
            fake: words(shared + per_class..shared + 2 * per_class),
        }
    }

    pub fn own(&self, label: Label) -> &[String] {
        match label {
            Label::Real => &self.real,
            Label::Fake => &self.fake,
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &String> {
        self.shared.iter().chain(&self.real).chain(&self.fake)
    }
}

/// Knobs of the document generator.
#[derive(Debug, Clone, Copy)]
pub struct DocShape {
    pub min_words: usize,
    pub max_words: usize,
    /// Range of the per-document share of class words.
    pub class_share: (f64, f64),
    /// Probability that a class word is drawn from the other class.
    pub leak: f64,
}

pub fn document_text<R: Rng>(rng: &mut R, vocab: &ClassVocab, label: Label, shape: &DocShape) -> String {
    let n = rng.gen_range(shape.min_words..=shape.max_words);
    let share = rng.gen_range(shape.class_share.0..=shape.class_share.1);
    let mut out: Vec<&str> = Vec::with_capacity(n + n / 12);
    for i in 0..n {
        let w = if rng.gen_bool(share) {
            let side = if rng.gen_bool(shape.leak) { label.flipped() } else { label };
            vocab.own(side).choose(rng).unwrap()
        } else {
            vocab.shared.choose(rng).unwrap()
        };
        out.push(w);
        if i % 12 == 11 {
            out.push(".");
        }
    }
    let mut text = out.join(" ").replace(" .", ".");
    if let Some(first) = text.get(..1) {
        text.replace_range(..1, &first.to_uppercase());
    }
    text
}

/// `per_class` documents of each label, alternating labels, ids `{prefix}{n}`.
pub fn labelled_corpus<R: Rng>(
    rng: &mut R,
    vocab: &ClassVocab,
    per_class: usize,
    split: Split,
    prefix: &str,
    shape: &DocShape,
) -> Corpus {
    let docs = (0..2 * per_class)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Real } else { Label::Fake };
            let text = document_text(rng, vocab, label, shape);
            Document::new(format!("{prefix}{i}"), text, label, split, "en")
        })
        .collect();
    Corpus::new(docs, prefix).unwrap()
}

/// Lexicon over `vocab`: every word a noun, each class word listing two
/// synonyms from its own class (similar vectors) and one from the other
/// (dissimilar vector).
pub fn class_lexicon<R: Rng>(rng: &mut R, vocab: &ClassVocab) -> LexiconBundle {
    let dim = 8;
    let mut pos = PosLexicon::new();
    let mut synonyms = SynonymDict::new();
    let mut embeddings = EmbeddingTable::new(dim);
    let jitter = |rng: &mut R, base: &[f64], noise: f64| -> Vec<f64> {
        base.iter().map(|x| x + rng.gen_range(-noise..noise)).collect()
    };
    let real_axis: Vec<f64> = (0..dim).map(|i| if i < dim / 2 { 1.0 } else { 0.0 }).collect();
    let fake_axis: Vec<f64> = (0..dim).map(|i| if i < dim / 2 { 0.0 } else { 1.0 }).collect();
    let neutral = vec![0.5; dim];
    for w in &vocab.shared {
        pos.insert(w, Pos::Noun);
        embeddings.insert(w, jitter(rng, &neutral, 1.0)).unwrap();
    }
    for (label, axis) in [(Label::Real, &real_axis), (Label::Fake, &fake_axis)] {
        let own = vocab.own(label);
        let other = vocab.own(label.flipped());
        for (i, w) in own.iter().enumerate() {
            pos.insert(w, Pos::Noun);
            embeddings.insert(w, jitter(rng, axis, 0.6)).unwrap();
            let syn = [
                own[(i + 1) % own.len()].as_str(),
                own[(i + 7) % own.len()].as_str(),
                other[i % other.len()].as_str(),
            ];
            synonyms.insert(w, syn).unwrap();
        }
    }
    LexiconBundle {
        pos,
        synonyms,
        embeddings,
    }
}
