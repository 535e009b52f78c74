//! Labeled news documents and their on-disk CSV / JSONL forms.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Column order of the CSV header.
pub const COLUMNS: [&str; 5] = ["id", "text", "label", "split", "language"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("row {row}: malformed json: {message}")]
    Json { row: usize, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: empty text")]
    EmptyText { row: usize },
    #[error("row {row}: duplicate id `{id}`")]
    DuplicateId { row: usize, id: String },
    #[error("row {row}: bad label `{value}` (expected `real` or `fake`)")]
    BadLabel { row: usize, value: String },
    #[error("row {row}: bad split `{value}` (expected `train` or `test`)")]
    BadSplit { row: usize, value: String },
    #[error("need at least 2 documents per label, `{label}` has {count}")]
    TooFewDocuments { label: Label, count: usize },
    #[error("holdout fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
}

impl CorpusError {
    pub fn code(&self) -> &'static str {
        match self {
            CorpusError::Io { .. } => "IO_ERROR",
            CorpusError::Csv(_) => "MALFORMED_CSV",
            CorpusError::Json { .. } => "MALFORMED_JSON",
            CorpusError::MissingColumn(_) => "MISSING_COLUMN",
            CorpusError::EmptyText { .. } => "EMPTY_TEXT",
            CorpusError::DuplicateId { .. } => "DUPLICATE_ID",
            CorpusError::BadLabel { .. } => "BAD_LABEL",
            CorpusError::BadSplit { .. } => "BAD_SPLIT",
            CorpusError::TooFewDocuments { .. } => "TOO_FEW_DOCUMENTS",
            CorpusError::BadFraction(_) => "BAD_FRACTION",
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Real, Label::Fake];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Fake => "fake",
        }
    }

    /// 1.0 for fake, 0.0 for real: the classifier's target value.
    pub fn target(self) -> f64 {
        match self {
            Label::Real => 0.0,
            Label::Fake => 1.0,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Real => Label::Fake,
            Label::Fake => Label::Real,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "real" => Ok(Label::Real),
            "fake" => Ok(Label::Fake),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(()),
        }
    }
}

/// One news item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub split: Split,
    /// BCP-47-style tag such as `en` or `pt`.
    pub language: String,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        label: Label,
        split: Split,
        language: impl Into<String>,
    ) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            label,
            split,
            language: language.into(),
        }
    }
}

/// An ordered, validated collection of documents with unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    provenance: String,
}

impl Corpus {
    /// Validates every document; `row` in errors is the 1-based position.
    pub fn new(documents: Vec<Document>, provenance: impl Into<String>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            check_document(doc, i + 1, &mut seen)?;
        }
        Ok(Corpus {
            documents,
            provenance: provenance.into(),
        })
    }

    pub fn empty(provenance: impl Into<String>) -> Self {
        Corpus {
            documents: Vec::new(),
            provenance: provenance.into(),
        }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.documents.iter()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Subset in original order. Cannot break the corpus invariants.
    pub fn filter(&self, mut keep: impl FnMut(&Document) -> bool) -> Corpus {
        Corpus {
            documents: self.documents.iter().filter(|d| keep(d)).cloned().collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn split_counts(&self) -> BTreeMap<Split, usize> {
        let mut counts = BTreeMap::new();
        for d in &self.documents {
            *counts.entry(d.split).or_insert(0) += 1;
        }
        counts
    }

    pub fn label_counts(&self) -> BTreeMap<Label, usize> {
        let mut counts = BTreeMap::new();
        for d in &self.documents {
            *counts.entry(d.label).or_insert(0) += 1;
        }
        counts
    }

    /// Concatenates corpora, rejecting ids that collide across inputs.
    pub fn concat(parts: impl IntoIterator<Item = Corpus>, provenance: impl Into<String>) -> Result<Corpus, CorpusError> {
        let documents = parts.into_iter().flat_map(|c| c.documents).collect();
        Corpus::new(documents, provenance)
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Document;
    type IntoIter = std::slice::Iter<'a, Document>;

    fn into_iter(self) -> Self::IntoIter {
        self.documents.iter()
    }
}

fn check_document(doc: &Document, row: usize, seen: &mut HashSet<String>) -> Result<(), CorpusError> {
    if doc.text.trim().is_empty() {
        return Err(CorpusError::EmptyText { row });
    }
    if !seen.insert(doc.id.clone()) {
        return Err(CorpusError::DuplicateId {
            row,
            id: doc.id.clone(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// `.jsonl`/`.ndjson`/`.json` mean JSONL, anything else CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") | Some("json") => Format::Jsonl,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(format!("unknown corpus format `{other}`")),
        }
    }
}

pub fn load_corpus(path: &Path, format: Format) -> Result<Corpus, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_corpus(BufReader::new(file), format, path.display().to_string())
}

pub fn save_corpus(corpus: &Corpus, path: &Path, format: Format) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_corpus(corpus, &mut out, format)?;
    out.flush().map_err(|e| CorpusError::io(path, e))
}

pub fn read_corpus<R: Read>(reader: R, format: Format, provenance: impl Into<String>) -> Result<Corpus, CorpusError> {
    let documents = match format {
        Format::Csv => read_csv(reader)?,
        Format::Jsonl => read_jsonl(reader)?,
    };
    Corpus::new(documents, provenance)
}

pub fn write_corpus<W: Write>(corpus: &Corpus, writer: W, format: Format) -> Result<(), CorpusError> {
    match format {
        Format::Csv => write_csv(corpus, writer),
        Format::Jsonl => write_jsonl(corpus, writer),
    }
}

fn parse_fields(row: usize, id: &str, text: &str, label: &str, split: &str, language: &str) -> Result<Document, CorpusError> {
    if text.trim().is_empty() {
        return Err(CorpusError::EmptyText { row });
    }
    let label = label.parse().map_err(|_| CorpusError::BadLabel {
        row,
        value: label.to_string(),
    })?;
    let split = split.parse().map_err(|_| CorpusError::BadSplit {
        row,
        value: split.to_string(),
    })?;
    Ok(Document::new(id, text, label, split, language))
}

fn read_csv<R: Read>(reader: R) -> Result<Vec<Document>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CorpusError::Csv(e.to_string()))?.clone();
    let mut index = [0usize; 5];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))?;
    }

    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CorpusError::Csv(format!("row {row}: {e}")))?;
        let field = |k: usize| record.get(index[k]).unwrap_or("");
        let doc = parse_fields(row, field(0), field(1), field(2), field(3), field(4))?;
        check_document(&doc, row, &mut seen)?;
        docs.push(doc);
    }
    Ok(docs)
}

fn read_jsonl<R: Read>(reader: R) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    let mut row = 0;
    for line in BufReader::new(reader).lines() {
        let line = line.map_err(|e| CorpusError::Csv(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| CorpusError::Json {
            row,
            message: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| CorpusError::Json {
            row,
            message: "expected a json object".to_string(),
        })?;
        let mut fields = [""; 5];
        for (slot, name) in fields.iter_mut().zip(COLUMNS) {
            let v = obj.get(name).ok_or_else(|| CorpusError::MissingColumn(name.to_string()))?;
            *slot = v.as_str().ok_or_else(|| CorpusError::Json {
                row,
                message: format!("`{name}` must be a string"),
            })?;
        }
        let doc = parse_fields(row, fields[0], fields[1], fields[2], fields[3], fields[4])?;
        check_document(&doc, row, &mut seen)?;
        docs.push(doc);
    }
    Ok(docs)
}

fn write_csv<W: Write>(corpus: &Corpus, writer: W) -> Result<(), CorpusError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| CorpusError::Csv(e.to_string());
    wtr.write_record(COLUMNS).map_err(csv_err)?;
    for d in corpus {
        wtr.write_record([
            d.id.as_str(),
            d.text.as_str(),
            d.label.as_str(),
            d.split.as_str(),
            d.language.as_str(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| CorpusError::Csv(e.to_string()))
}

fn write_jsonl<W: Write>(corpus: &Corpus, mut writer: W) -> Result<(), CorpusError> {
    for d in corpus {
        let line = serde_json::to_string(d).expect("document serializes");
        writeln!(writer, "{line}").map_err(|e| CorpusError::Csv(e.to_string()))?;
    }
    Ok(())
}

/// Label-stratified holdout. For each label with `n` documents,
/// `round(fraction * n)` of them (chosen by a seeded shuffle) go to the
/// holdout. Both outputs keep the input order.
pub fn split_holdout(corpus: &Corpus, fraction: f64, seed: u64) -> Result<(Corpus, Corpus), CorpusError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorpusError::BadFraction(fraction));
    }
    let counts = corpus.label_counts();
    for label in Label::ALL {
        let count = counts.get(&label).copied().unwrap_or(0);
        if count < 2 {
            return Err(CorpusError::TooFewDocuments { label, count });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_holdout = vec![false; corpus.len()];
    for label in Label::ALL {
        let mut members: Vec<usize> = corpus
            .iter()
            .enumerate()
            .filter(|(_, d)| d.label == label)
            .map(|(i, _)| i)
            .collect();
        let take = (fraction * members.len() as f64).round() as usize;
        members.shuffle(&mut rng);
        for &i in &members[..take] {
            in_holdout[i] = true;
        }
    }

    let (mut train, mut holdout) = (Vec::new(), Vec::new());
    for (doc, held) in corpus.iter().zip(in_holdout) {
        if held {
            holdout.push(doc.clone());
        } else {
            train.push(doc.clone());
        }
    }
    let provenance = corpus.provenance();
    Ok((
        Corpus {
            documents: train,
            provenance: format!("{provenance} [train part]"),
        },
        Corpus {
            documents: holdout,
            provenance: format!("{provenance} [holdout part]"),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, label: Label) -> Document {
        Document::new(id, format!("text of {id}"), label, Split::Train, "en")
    }

    fn csv_corpus(body: &str) -> Result<Corpus, CorpusError> {
        read_corpus(body.as_bytes(), Format::Csv, "inline")
    }

    #[test]
    fn loads_rows_in_file_order() {
        let c = csv_corpus(
            "id,text,label,split,language\n\
             b,second,fake,train,en\n\
             a,first,real,test,pt\n\
             c,third,real,train,en\n",
        )
        .unwrap();
        let ids: Vec<_> = c.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["b", "a", "c"]);
        assert_eq!(c.documents()[1].label, Label::Real);
        assert_eq!(c.documents()[1].split, Split::Test);
        assert_eq!(c.documents()[1].language, "pt");
    }

    #[test]
    fn empty_text_names_row() {
        let err = csv_corpus(
            "id,text,label,split,language\n\
             a,fine,real,train,en\n\
             b,\"   \",real,train,en\n",
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::EmptyText { row: 2 }), "{err:?}");
    }

    #[test]
    fn column_order_is_free_but_all_required() {
        let c = csv_corpus("language,split,label,text,id\nen,train,fake,hello,x\n").unwrap();
        assert_eq!(c.documents()[0].id, "x");
        let err = csv_corpus("id,text,label,split\na,b,real,train\n").unwrap_err();
        assert!(matches!(err, CorpusError::MissingColumn(ref c) if c == "language"));
    }

    #[test]
    fn duplicate_and_bad_values() {
        let err = csv_corpus(
            "id,text,label,split,language\n\
             a,x,real,train,en\n\
             a,y,real,train,en\n",
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { row: 2, ref id } if id == "a"));

        let err = csv_corpus("id,text,label,split,language\na,x,Real,train,en\n").unwrap_err();
        assert!(matches!(err, CorpusError::BadLabel { row: 1, .. }));
        let err = csv_corpus("id,text,label,split,language\na,x,real,dev,en\n").unwrap_err();
        assert!(matches!(err, CorpusError::BadSplit { row: 1, .. }));
    }

    #[test]
    fn jsonl_errors_name_rows() {
        let body = "{\"id\":\"a\",\"text\":\"x\",\"label\":\"fake\",\"split\":\"test\",\"language\":\"en\"}\n\
                    {\"id\":\"b\",\"text\":\"\",\"label\":\"fake\",\"split\":\"test\",\"language\":\"en\"}\n";
        let err = read_corpus(body.as_bytes(), Format::Jsonl, "inline").unwrap_err();
        assert!(matches!(err, CorpusError::EmptyText { row: 2 }));
        let err = read_corpus("{\"id\":\"a\"}\n".as_bytes(), Format::Jsonl, "inline").unwrap_err();
        assert!(matches!(err, CorpusError::MissingColumn(_)));
    }

    #[test]
    fn paper_split_counts() {
        let mut docs = Vec::new();
        for i in 0..1000 {
            let split = if i < 800 { Split::Train } else { Split::Test };
            docs.push(Document::new(format!("r{i}"), "news body", Label::Real, split, "en"));
        }
        let mut buf = Vec::new();
        write_corpus(&Corpus::new(docs, "gen").unwrap(), &mut buf, Format::Csv).unwrap();
        let c = read_corpus(buf.as_slice(), Format::Csv, "buf").unwrap();
        let counts = c.split_counts();
        assert_eq!(counts[&Split::Train], 800);
        assert_eq!(counts[&Split::Test], 200);
    }

    #[test]
    fn empty_corpus_writes_header_only() {
        let mut buf = Vec::new();
        write_corpus(&Corpus::empty("none"), &mut buf, Format::Csv).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id,text,label,split,language\n");
    }

    #[test]
    fn holdout_ten_and_ten() {
        let docs = (0..20)
            .map(|i| doc(&format!("d{i:02}"), if i % 2 == 0 { Label::Real } else { Label::Fake }))
            .collect();
        let c = Corpus::new(docs, "t").unwrap();
        let (train, hold) = split_holdout(&c, 0.1, 7).unwrap();
        assert_eq!(train.len(), 18);
        assert_eq!(hold.len(), 2);
        assert_eq!(hold.label_counts()[&Label::Real], 1);
        assert_eq!(hold.label_counts()[&Label::Fake], 1);

        let (train2, hold2) = split_holdout(&c, 0.1, 7).unwrap();
        assert_eq!(train.documents(), train2.documents());
        assert_eq!(hold.documents(), hold2.documents());

        let mut union: Vec<_> = train.iter().chain(hold.iter()).cloned().collect();
        union.sort_by(|a, b| a.id.cmp(&b.id));
        let mut input = c.into_documents();
        input.sort_by(|a, b| a.id.cmp(&b.id));
        assert_eq!(union, input);
    }

    #[test]
    fn holdout_needs_two_per_label() {
        let c = Corpus::new(vec![doc("a", Label::Real), doc("b", Label::Real), doc("c", Label::Fake)], "t").unwrap();
        assert!(matches!(
            split_holdout(&c, 0.5, 1),
            Err(CorpusError::TooFewDocuments { label: Label::Fake, count: 1 })
        ));
        assert!(matches!(split_holdout(&c, 1.0, 1), Err(CorpusError::BadFraction(_))));
    }
}
