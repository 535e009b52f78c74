//! Sentence-chunked, rate-limited, resumable document translation.
//!
//! Texts longer than the backend's per-request limit are cut at periods
//! (see [`split_sentences`]) and the sentences are packed greedily into
//! chunks that fit. Requests are spaced by a fixed delay; failed requests
//! are retried with a doubling delay. Corpus runs append every finished
//! document to a checkpoint so an interrupted run can resume.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, Document};
use crate::textkit::split_sentences;

pub const DEFAULT_MAX_CHARS: usize = 5000;
pub const DEFAULT_RETRIES: u32 = 3;

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("sentence {index} has {length} characters, over the {max_chars}-character limit")]
    OversizeSentence { index: usize, length: usize, max_chars: usize },
    #[error("backend failed on chunk {chunk_index} after {attempts} attempts: {message}")]
    BackendFailure {
        chunk_index: usize,
        attempts: u32,
        message: String,
    },
    #[error("checkpoint {path}: {source}")]
    Checkpoint {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("backend setup: {0}")]
    Setup(String),
    #[error("invalid translation config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl TranslateError {
    pub fn code(&self) -> &'static str {
        match self {
            TranslateError::OversizeSentence { .. } => "OVERSIZE_SENTENCE",
            TranslateError::BackendFailure { .. } => "BACKEND_FAILURE",
            TranslateError::Checkpoint { .. } => "CHECKPOINT_IO",
            TranslateError::Setup(_) => "BACKEND_SETUP",
            TranslateError::Config(_) => "BAD_CONFIG",
            TranslateError::Corpus(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslateConfig {
    pub source_lang: String,
    pub target_lang: String,
    /// Per-request limit, in characters.
    pub max_chars: usize,
    /// Minimum gap between two backend requests.
    #[serde(with = "duration_secs")]
    pub delay: Duration,
    /// One request per sentence for over-limit texts instead of packing.
    pub per_sentence: bool,
    pub max_retries: u32,
}

impl Default for TranslateConfig {
    fn default() -> Self {
        TranslateConfig {
            source_lang: "en".to_string(),
            target_lang: "pt".to_string(),
            max_chars: DEFAULT_MAX_CHARS,
            delay: Duration::from_secs(1),
            per_sentence: false,
            max_retries: DEFAULT_RETRIES,
        }
    }
}

impl TranslateConfig {
    pub fn validate(&self) -> Result<(), TranslateError> {
        if self.max_chars == 0 {
            return Err(TranslateError::Config("max_chars must be at least 1".to_string()));
        }
        Ok(())
    }
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

fn checked_sentences(text: &str, max_chars: usize) -> Result<Vec<String>, TranslateError> {
    let sentences = split_sentences(text);
    for (index, s) in sentences.iter().enumerate() {
        let length = char_len(s);
        if length > max_chars {
            return Err(TranslateError::OversizeSentence {
                index,
                length,
                max_chars,
            });
        }
    }
    Ok(sentences)
}

/// Whole text if it fits in `max_chars`, otherwise sentences packed
/// greedily into chunks of at most `max_chars`. Chunks concatenate back to
/// `text`.
pub fn chunk_for_translation(text: &str, max_chars: usize) -> Result<Vec<String>, TranslateError> {
    if char_len(text) <= max_chars {
        return Ok(vec![text.to_string()]);
    }
    let mut chunks = Vec::new();
    let mut current = String::new();
    let mut current_len = 0;
    for sentence in checked_sentences(text, max_chars)? {
        let n = char_len(&sentence);
        if current_len + n > max_chars && !current.is_empty() {
            chunks.push(std::mem::take(&mut current));
            current_len = 0;
        }
        current.push_str(&sentence);
        current_len += n;
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    Ok(chunks)
}

/// Like [`chunk_for_translation`] but over-limit texts go one sentence per
/// chunk.
pub fn chunk_per_sentence(text: &str, max_chars: usize) -> Result<Vec<String>, TranslateError> {
    if char_len(text) <= max_chars {
        return Ok(vec![text.to_string()]);
    }
    checked_sentences(text, max_chars)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct BackendError(pub String);

/// Anything that turns a chunk of text in one language into another.
/// Failures are treated as transient and retried.
pub trait TranslationBackend {
    fn translate(&mut self, chunk: &str, source: &str, target: &str) -> Result<String, BackendError>;
}

impl<B: TranslationBackend + ?Sized> TranslationBackend for &mut B {
    fn translate(&mut self, chunk: &str, source: &str, target: &str) -> Result<String, BackendError> {
        (**self).translate(chunk, source, target)
    }
}

impl<B: TranslationBackend + ?Sized> TranslationBackend for Box<B> {
    fn translate(&mut self, chunk: &str, source: &str, target: &str) -> Result<String, BackendError> {
        (**self).translate(chunk, source, target)
    }
}

/// Returns every chunk unchanged.
#[derive(Debug, Default, Clone)]
pub struct IdentityBackend;

impl TranslationBackend for IdentityBackend {
    fn translate(&mut self, chunk: &str, _: &str, _: &str) -> Result<String, BackendError> {
        Ok(chunk.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct MockCall {
    pub chunk: String,
    pub at: Instant,
}

/// Word-for-word dictionary substitution. Unknown words pass through;
/// a replaced word keeps the leading capitalization of the original.
/// Every call is logged with its timestamp.
#[derive(Debug, Default, Clone)]
pub struct MockBackend {
    map: HashMap<String, String>,
    calls: Vec<MockCall>,
}

impl MockBackend {
    pub fn new<K: AsRef<str>, V: Into<String>>(map: impl IntoIterator<Item = (K, V)>) -> Self {
        MockBackend {
            map: map.into_iter().map(|(k, v)| (k.as_ref().to_lowercase(), v.into())).collect(),
            calls: Vec::new(),
        }
    }

    /// JSON object `{ "source word": "target word", ... }`.
    pub fn from_json(text: &str) -> Result<Self, TranslateError> {
        let map: HashMap<String, String> =
            serde_json::from_str(text).map_err(|e| TranslateError::Setup(format!("mock map: {e}")))?;
        Ok(Self::new(map))
    }

    pub fn load(path: &Path) -> Result<Self, TranslateError> {
        let text = std::fs::read_to_string(path).map_err(|e| TranslateError::Setup(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn calls(&self) -> &[MockCall] {
        &self.calls
    }

    fn substitute(&self, word: &str, out: &mut String) {
        match self.map.get(&word.to_lowercase()) {
            Some(t) if word.chars().next().is_some_and(char::is_uppercase) => {
                let mut cs = t.chars();
                if let Some(f) = cs.next() {
                    out.extend(f.to_uppercase());
                    out.extend(cs);
                }
            }
            Some(t) => out.push_str(t),
            None => out.push_str(word),
        }
    }
}

impl TranslationBackend for MockBackend {
    fn translate(&mut self, chunk: &str, _: &str, _: &str) -> Result<String, BackendError> {
        self.calls.push(MockCall {
            chunk: chunk.to_string(),
            at: Instant::now(),
        });
        let mut out = String::with_capacity(chunk.len());
        let mut word = String::new();
        for c in chunk.chars() {
            if c.is_alphanumeric() {
                word.push(c);
            } else {
                if !word.is_empty() {
                    self.substitute(&word, &mut out);
                    word.clear();
                }
                out.push(c);
            }
        }
        if !word.is_empty() {
            self.substitute(&word, &mut out);
        }
        Ok(out)
    }
}

/// Runs an external program per chunk: the chunk goes to its stdin, the
/// translation is read verbatim from its stdout, exit status 0 means
/// success. Languages are passed in `TAUG_SOURCE_LANG`/`TAUG_TARGET_LANG`.
#[derive(Debug, Clone)]
pub struct CommandBackend {
    program: PathBuf,
    args: Vec<String>,
}

impl CommandBackend {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        CommandBackend {
            program: program.into(),
            args: Vec::new(),
        }
    }

    pub fn with_args(mut self, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.args = args.into_iter().map(Into::into).collect();
        self
    }
}

impl TranslationBackend for CommandBackend {
    fn translate(&mut self, chunk: &str, source: &str, target: &str) -> Result<String, BackendError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .env("TAUG_SOURCE_LANG", source)
            .env("TAUG_TARGET_LANG", target)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| BackendError(format!("spawn {}: {e}", self.program.display())))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let output = std::thread::scope(|s| {
            let writer = s.spawn(move || stdin.write_all(chunk.as_bytes()));
            let output = child.wait_with_output();
            let written = writer.join().expect("stdin writer panicked");
            (written, output)
        });
        let output = match output {
            (_, Err(e)) => return Err(BackendError(format!("wait: {e}"))),
            (Err(e), Ok(_)) => return Err(BackendError(format!("write stdin: {e}"))),
            (Ok(()), Ok(o)) => o,
        };
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            return Err(BackendError(format!("exit {}: {}", output.status, stderr.trim())));
        }
        String::from_utf8(output.stdout).map_err(|e| BackendError(format!("non-utf8 output: {e}")))
    }
}

/// Drives a backend under a global request spacing.
pub struct Translator<B> {
    backend: B,
    config: TranslateConfig,
    last_request: Option<Instant>,
}

impl<B: TranslationBackend> Translator<B> {
    pub fn new(backend: B, config: TranslateConfig) -> Result<Self, TranslateError> {
        config.validate()?;
        Ok(Translator {
            backend,
            config,
            last_request: None,
        })
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn into_backend(self) -> B {
        self.backend
    }

    pub fn config(&self) -> &TranslateConfig {
        &self.config
    }

    pub fn chunks(&self, text: &str) -> Result<Vec<String>, TranslateError> {
        if self.config.per_sentence {
            chunk_per_sentence(text, self.config.max_chars)
        } else {
            chunk_for_translation(text, self.config.max_chars)
        }
    }

    fn pace(&mut self, gap: Duration) {
        if let Some(last) = self.last_request {
            let elapsed = last.elapsed();
            if elapsed < gap {
                std::thread::sleep(gap - elapsed);
            }
        }
        self.last_request = Some(Instant::now());
    }

    fn request(&mut self, chunk_index: usize, chunk: &str) -> Result<String, TranslateError> {
        let mut gap = self.config.delay;
        let attempts = self.config.max_retries + 1;
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            self.pace(gap);
            match self.backend.translate(chunk, &self.config.source_lang, &self.config.target_lang) {
                Ok(t) => return Ok(t),
                Err(e) => {
                    log::warn!("chunk {chunk_index}: attempt {attempt}/{attempts} failed: {e}");
                    last_error = e.0;
                    gap *= 2;
                }
            }
        }
        Err(TranslateError::BackendFailure {
            chunk_index,
            attempts,
            message: last_error,
        })
    }

    /// Translates chunk by chunk; id, label and split are kept and the
    /// language becomes the target language.
    pub fn translate_document(&mut self, doc: &Document) -> Result<Document, TranslateError> {
        let chunks = self.chunks(&doc.text)?;
        let mut text = String::with_capacity(doc.text.len());
        for (i, chunk) in chunks.iter().enumerate() {
            text.push_str(&self.request(i, chunk)?);
        }
        Ok(Document {
            text,
            language: self.config.target_lang.clone(),
            ..doc.clone()
        })
    }

    /// Translates documents in order. With a checkpoint path, documents
    /// already recorded there are taken from it rather than re-translated,
    /// and each newly finished document is appended to it.
    pub fn translate_corpus(&mut self, corpus: &Corpus, checkpoint: Option<&Path>) -> Result<Corpus, TranslateError> {
        let mut done = match checkpoint {
            Some(p) => read_checkpoint(p)?,
            None => HashMap::new(),
        };
        let mut sink = match checkpoint {
            Some(p) => Some(open_checkpoint(p)?),
            None => None,
        };

        let mut out = Vec::with_capacity(corpus.len());
        for (n, doc) in corpus.iter().enumerate() {
            if let Some(text) = done.remove(&doc.id) {
                log::debug!("{}: restored from checkpoint", doc.id);
                out.push(Document {
                    text,
                    language: self.config.target_lang.clone(),
                    ..doc.clone()
                });
                continue;
            }
            let translated = self.translate_document(doc)?;
            if let (Some(file), Some(path)) = (sink.as_mut(), checkpoint) {
                append_checkpoint(file, path, &translated)?;
            }
            log::info!("translated {}/{}: {}", n + 1, corpus.len(), doc.id);
            out.push(translated);
        }
        Ok(Corpus::new(out, format!("{} [translated]", corpus.provenance()))?)
    }
}

pub fn translate_document<B: TranslationBackend>(doc: &Document, backend: B, cfg: &TranslateConfig) -> Result<Document, TranslateError> {
    Translator::new(backend, cfg.clone())?.translate_document(doc)
}

pub fn translate_corpus<B: TranslationBackend>(
    corpus: &Corpus,
    backend: B,
    cfg: &TranslateConfig,
    checkpoint: Option<&Path>,
) -> Result<Corpus, TranslateError> {
    Translator::new(backend, cfg.clone())?.translate_corpus(corpus, checkpoint)
}

#[derive(Serialize, Deserialize)]
struct CheckpointLine {
    id: String,
    text: String,
}

fn checkpoint_err(path: &Path) -> impl Fn(std::io::Error) -> TranslateError + '_ {
    move |source| TranslateError::Checkpoint {
        path: path.display().to_string(),
        source,
    }
}

/// Completed documents recorded in a checkpoint. A torn final line (from
/// a kill mid-write) is skipped.
pub fn read_checkpoint(path: &Path) -> Result<HashMap<String, String>, TranslateError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(HashMap::new()),
        Err(e) => return Err(checkpoint_err(path)(e)),
    };
    let mut done = HashMap::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(checkpoint_err(path))?;
        match serde_json::from_str::<CheckpointLine>(&line) {
            Ok(c) => {
                done.insert(c.id, c.text);
            }
            Err(e) if !line.trim().is_empty() => log::warn!("{}: skipping bad line: {e}", path.display()),
            Err(_) => {}
        }
    }
    Ok(done)
}

fn open_checkpoint(path: &Path) -> Result<File, TranslateError> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .read(true)
        .open(path)
        .map_err(checkpoint_err(path))?;
    // A torn last line must not swallow the next record.
    let len = file.metadata().map_err(checkpoint_err(path))?.len();
    if len > 0 {
        use std::io::{Read, Seek, SeekFrom};
        let mut last = [0u8; 1];
        file.seek(SeekFrom::Start(len - 1)).map_err(checkpoint_err(path))?;
        file.read_exact(&mut last).map_err(checkpoint_err(path))?;
        if last[0] != b'\n' {
            file.write_all(b"\n").map_err(checkpoint_err(path))?;
        }
    }
    Ok(file)
}

fn append_checkpoint(file: &mut File, path: &Path, doc: &Document) -> Result<(), TranslateError> {
    let line = serde_json::to_string(&CheckpointLine {
        id: doc.id.clone(),
        text: doc.text.clone(),
    })
    .expect("checkpoint line serializes");
    writeln!(file, "{line}").map_err(checkpoint_err(path))?;
    file.flush().map_err(checkpoint_err(path))
}
