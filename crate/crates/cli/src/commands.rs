use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;

use taug::augment::{augment_corpus, write_trace_jsonl, AugmentConfig, AugmentMode, DocTrace};
use taug::classifier::{evaluate, predict_text, train, Metrics, ModelArtifact, ModelConfig, Prediction, TrainConfig};
use taug::corpus::{load_corpus, save_corpus, split_holdout, Corpus, Format, Label, Split};
use taug::lexicon::LexiconBundle;
use taug::segment::{SegmentConfig, SubwordVocab, DEFAULT_VOCAB_WORDS};
use taug::textkit::{word_frequencies, FrequencyTable, Stopwords};
use taug::translate::{
    CommandBackend, IdentityBackend, MockBackend, TranslateConfig, TranslationBackend, Translator,
};

use crate::config::FileConfig;
use crate::error::{CliError, Result};
use crate::{
    AugmentArgs, ClassifyArgs, Command, EvalArgs, FormatArg, IngestArgs, PipelineArgs, SegmentFlags, SplitArg,
    StatsArgs, StopwordFlags, TrainArgs, TrainFlags, TranslateArgs, TranslationFlags,
};

const DEFAULT_TOP: usize = 20;
const DEFAULT_VAL_FRACTION: f64 = 0.1;

pub fn run(command: Command, cfg: &FileConfig) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Augment(a) => augment(a, cfg),
        Command::Translate(a) => translate(a, cfg),
        Command::Train(a) => train_cmd(a, cfg),
        Command::Eval(a) => eval(a, cfg),
        Command::Classify(a) => classify(a, cfg),
        Command::Stats(a) => stats(a, cfg),
        Command::Pipeline(a) => pipeline(a, cfg),
    }
}

// Shared plumbing

fn require(value: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    value.ok_or_else(|| CliError::Config(format!("{what} is required")))
}

/// Fails before any work starts if an input is missing.
fn ensure_exist<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
    for p in paths {
        if !p.exists() {
            return Err(CliError::Missing(p.display().to_string()));
        }
    }
    Ok(())
}

fn format_of(path: &Path, explicit: Option<FormatArg>) -> Format {
    explicit.map_or_else(|| Format::from_path(path), Into::into)
}

fn load(path: &Path, format: Option<FormatArg>) -> Result<Corpus> {
    let corpus = load_corpus(path, format_of(path, format))?;
    info!("{}: {} documents", path.display(), corpus.len());
    Ok(corpus)
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(CliError::io(dir)),
        _ => Ok(()),
    }
}

fn save(corpus: &Corpus, path: &Path, format: Option<FormatArg>) -> Result<()> {
    create_parent(path)?;
    save_corpus(corpus, path, format_of(path, format))?;
    info!("wrote {} documents to {}", corpus.len(), path.display());
    Ok(())
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    create_parent(path)?;
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(CliError::io(path))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_with(path, |w| w.write_all(text.as_bytes()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

fn print(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(CliError::io(Path::new("<stdout>")))
}

fn keep_split(corpus: &Corpus, split: SplitArg) -> Corpus {
    corpus.filter(|d| split.keeps(d.split))
}

fn stopwords(flags: &StopwordFlags, cfg: &FileConfig) -> Result<Stopwords> {
    if flags.no_stopwords {
        return Ok(Stopwords::none());
    }
    match flags.stopwords.clone().or_else(|| cfg.paths.stopwords.clone()) {
        Some(p) => Ok(Stopwords::load(&p)?),
        None => Ok(Stopwords::default_list()),
    }
}

fn stopword_path(flags: &StopwordFlags, cfg: &FileConfig) -> Option<PathBuf> {
    if flags.no_stopwords {
        return None;
    }
    flags.stopwords.clone().or_else(|| cfg.paths.stopwords.clone())
}

fn write_frequencies(path: &Path, table: &FrequencyTable) -> Result<()> {
    write_with(path, |w| table.write_csv(w))
}

// Configuration merging: flag, then file, then default.

fn augment_config(threshold: Option<f64>, mode: Option<AugmentMode>, cfg: &FileConfig) -> Result<AugmentConfig> {
    let d = AugmentConfig::default();
    let c = AugmentConfig {
        threshold: threshold.or(cfg.augment.threshold).unwrap_or(d.threshold),
        mode: mode.or(cfg.augment.mode).unwrap_or(d.mode),
        ..d
    };
    c.validate()?;
    Ok(c)
}

fn translate_config(f: &TranslationFlags, cfg: &FileConfig) -> Result<TranslateConfig> {
    let d = TranslateConfig::default();
    let t = &cfg.translate;
    let delay = match (f.delay, &t.delay) {
        (Some(d), _) => d,
        (None, Some(spec)) => spec.duration()?,
        (None, None) => d.delay,
    };
    Ok(TranslateConfig {
        source_lang: f.source_lang.clone().or_else(|| t.source_lang.clone()).unwrap_or(d.source_lang),
        target_lang: f.target_lang.clone().or_else(|| t.target_lang.clone()).unwrap_or(d.target_lang),
        max_chars: f.max_chars.or(t.max_chars).unwrap_or(d.max_chars),
        delay,
        per_sentence: f.per_sentence || t.per_sentence.unwrap_or(d.per_sentence),
        max_retries: f.retries.or(t.max_retries).unwrap_or(d.max_retries),
    })
}

fn backend_spec(f: &TranslationFlags, cfg: &FileConfig) -> Option<String> {
    f.backend.clone().or_else(|| cfg.translate.backend.clone())
}

/// Files a backend spec depends on.
fn backend_inputs(spec: &str) -> Result<Vec<PathBuf>> {
    match spec.split_once(':') {
        Some(("mock", file)) => Ok(vec![PathBuf::from(file)]),
        Some(("command", cmd)) => {
            let exe = cmd.split_whitespace().next().unwrap_or_default();
            if exe.is_empty() {
                return Err(CliError::Config("command backend needs an executable".into()));
            }
            Ok(if exe.contains('/') { vec![PathBuf::from(exe)] } else { Vec::new() })
        }
        None if spec == "identity" => Ok(Vec::new()),
        _ => Err(CliError::Config(format!(
            "unknown backend `{spec}`; expected mock:<file>, command:<exe> or identity"
        ))),
    }
}

fn make_backend(spec: &str) -> Result<Box<dyn TranslationBackend>> {
    backend_inputs(spec)?;
    Ok(match spec.split_once(':') {
        Some(("mock", file)) => Box::new(MockBackend::load(Path::new(file))?),
        Some(("command", cmd)) => {
            let mut parts = cmd.split_whitespace();
            let exe = parts.next().unwrap_or_default();
            Box::new(CommandBackend::new(exe).with_args(parts))
        }
        _ => Box::new(IdentityBackend),
    })
}

fn segment_config(f: &SegmentFlags, cfg: &FileConfig) -> Result<SegmentConfig> {
    let d = SegmentConfig::default();
    let s = &cfg.segment;
    Ok(SegmentConfig::new(
        f.window.or(s.window_size).unwrap_or(d.window_size),
        f.overlap.or(s.overlap).unwrap_or(d.overlap),
        f.max_seq_len.or(s.max_seq_len).unwrap_or(d.max_seq_len),
    )?)
}

fn seed(f: &TrainFlags, cfg: &FileConfig) -> u64 {
    f.seed.or(cfg.train.seed).unwrap_or(0)
}

fn model_config(f: &TrainFlags, cfg: &FileConfig) -> Result<ModelConfig> {
    let d = ModelConfig::default();
    let m = &cfg.model;
    let c = ModelConfig {
        embed_dim: f.embed_dim.or(m.embed_dim).unwrap_or(d.embed_dim),
        dense_dims: f.dense_dims.clone().or_else(|| m.dense_dims.clone()).unwrap_or(d.dense_dims),
        dropout_rate: f.dropout.or(m.dropout_rate).unwrap_or(d.dropout_rate),
        learning_rate: f.learning_rate.or(m.learning_rate).unwrap_or(d.learning_rate),
        seed: seed(f, cfg),
    };
    c.validate()?;
    Ok(c)
}

fn train_config(f: &TrainFlags, cfg: &FileConfig) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let t = &cfg.train;
    let c = TrainConfig {
        epochs: f.epochs.or(t.epochs).unwrap_or(d.epochs),
        patience: f.patience.or(t.patience).unwrap_or(d.patience),
        batch_size: f.batch_size.or(t.batch_size).unwrap_or(d.batch_size),
    };
    c.validate()?;
    Ok(c)
}

fn val_fraction(f: &TrainFlags, cfg: &FileConfig) -> Result<f64> {
    let v = f.val_fraction.or(cfg.train.val_fraction).unwrap_or(DEFAULT_VAL_FRACTION);
    if !(v > 0.0 && v < 1.0) {
        return Err(CliError::Config(format!("val_fraction must lie in (0, 1), got {v}")));
    }
    Ok(v)
}

fn vocab_words(f: &TrainFlags, cfg: &FileConfig) -> usize {
    f.vocab_words.or(cfg.train.vocab_words).unwrap_or(DEFAULT_VOCAB_WORDS)
}

fn load_model(inputs: &crate::ModelInputs, cfg: &FileConfig) -> Result<(ModelArtifact, SubwordVocab)> {
    let model_path = require(inputs.model.clone().or_else(|| cfg.paths.model.clone()), "--model")?;
    let vocab_path = require(inputs.vocab.clone().or_else(|| cfg.paths.vocab.clone()), "--vocab")?;
    ensure_exist([model_path.as_path(), vocab_path.as_path()])?;
    let artifact = ModelArtifact::load(&model_path)?;
    let vocab = SubwordVocab::load(&vocab_path)?;
    artifact.check_vocab(&vocab)?;
    Ok((artifact, vocab))
}

fn misclassified_table(corpus: &Corpus, metrics: &Metrics, sw: &Stopwords, top: usize) -> FrequencyTable {
    let wrong: HashSet<&str> = metrics.misclassified_ids.iter().map(String::as_str).collect();
    word_frequencies(corpus.iter().filter(|d| wrong.contains(d.id.as_str())), sw, top)
}

fn write_predictions(path: &Path, preds: &[Prediction]) -> Result<()> {
    write_with(path, |w| {
        for p in preds {
            serde_json::to_writer(&mut *w, p)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

fn write_trace(path: &Path, traces: &[DocTrace]) -> Result<()> {
    write_with(path, |w| write_trace_jsonl(traces, w))
}

// Commands

#[derive(Serialize)]
struct CorpusSummary {
    documents: usize,
    train: usize,
    test: usize,
    real: usize,
    fake: usize,
}

impl CorpusSummary {
    fn of(c: &Corpus) -> Self {
        let splits = c.split_counts();
        let labels = c.label_counts();
        CorpusSummary {
            documents: c.len(),
            train: splits.get(&Split::Train).copied().unwrap_or(0),
            test: splits.get(&Split::Test).copied().unwrap_or(0),
            real: labels.get(&Label::Real).copied().unwrap_or(0),
            fake: labels.get(&Label::Fake).copied().unwrap_or(0),
        }
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    ensure_exist(a.inputs.iter().map(PathBuf::as_path))?;
    let parts = a.inputs.iter().map(|p| load(p, None)).collect::<Result<Vec<_>>>()?;
    let provenance = a.inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(" + ");
    let merged = Corpus::concat(parts, provenance)?;
    save(&merged, &a.out, a.out_format)?;
    print(&to_json(&CorpusSummary::of(&merged)))
}

fn augment(a: AugmentArgs, cfg: &FileConfig) -> Result<()> {
    let input = require(a.io.input.clone().or_else(|| cfg.paths.corpus.clone()), "--in")?;
    let lexicon = require(a.lexicon.clone().or_else(|| cfg.paths.lexicon.clone()), "--lexicon")?;
    ensure_exist([input.as_path(), lexicon.as_path()])?;
    let acfg = augment_config(a.threshold, a.mode.map(Into::into), cfg)?;

    let corpus = load(&input, a.io.format)?;
    let bundle = LexiconBundle::load_dir(&lexicon)?;
    let (out, traces) = augment_corpus(&corpus, &bundle, &acfg)?;
    let replaced: usize = traces.iter().map(|t| t.trace.len()).sum();
    info!("{replaced} replacements in {} documents", traces.len());
    save(&out, &a.io.out, a.io.out_format)?;
    if let Some(p) = &a.trace {
        write_trace(p, &traces)?;
    }
    Ok(())
}

fn translate(a: TranslateArgs, cfg: &FileConfig) -> Result<()> {
    let input = require(a.io.input.clone().or_else(|| cfg.paths.corpus.clone()), "--in")?;
    let spec = backend_spec(&a.flags, cfg).ok_or_else(|| CliError::Config("--backend is required".into()))?;
    let mut inputs = vec![input.clone()];
    inputs.extend(backend_inputs(&spec)?);
    ensure_exist(inputs.iter().map(PathBuf::as_path))?;
    let tcfg = translate_config(&a.flags, cfg)?;

    let corpus = load(&input, a.io.format)?;
    let mut translator = Translator::new(make_backend(&spec)?, tcfg)?;
    if let Some(p) = &a.checkpoint {
        create_parent(p)?;
    }
    let out = translator.translate_corpus(&corpus, a.checkpoint.as_deref())?;
    save(&out, &a.io.out, a.io.out_format)
}

/// Loads the vocabulary if the file exists, otherwise builds and saves it.
fn obtain_vocab(path: &Path, corpus: &Corpus, max_words: usize) -> Result<SubwordVocab> {
    if path.exists() {
        info!("using vocabulary {}", path.display());
        return Ok(SubwordVocab::load(path)?);
    }
    let vocab = SubwordVocab::build_from_documents(corpus.iter(), max_words);
    create_parent(path)?;
    vocab.save(path)?;
    info!("built vocabulary of {} pieces at {}", vocab.len(), path.display());
    Ok(vocab)
}

fn train_cmd(a: TrainArgs, cfg: &FileConfig) -> Result<()> {
    let train_path = require(a.train.clone().or_else(|| cfg.paths.corpus.clone()), "--train")?;
    let vocab_path = require(a.vocab.clone().or_else(|| cfg.paths.vocab.clone()), "--vocab")?;
    let out = require(a.out.clone().or_else(|| cfg.paths.model.clone()), "--out")?;
    let mut inputs = vec![train_path.as_path()];
    inputs.extend(a.val.as_deref());
    ensure_exist(inputs)?;
    let scfg = segment_config(&a.flags.segment, cfg)?;
    let mcfg = model_config(&a.flags, cfg)?;
    let tcfg = train_config(&a.flags, cfg)?;

    let corpus = keep_split(&load(&train_path, None)?, a.split);
    let (fit, val) = match &a.val {
        Some(p) => (corpus, load(p, None)?),
        None => split_holdout(&corpus, val_fraction(&a.flags, cfg)?, mcfg.seed)?,
    };
    let vocab = obtain_vocab(&vocab_path, &fit, vocab_words(&a.flags, cfg))?;
    let (model, report) = train(&fit, &val, &vocab, &scfg, &mcfg, &tcfg)?;
    create_parent(&out)?;
    ModelArtifact::new(model, scfg, &vocab).save(&out)?;
    let json = report.to_json() + "\n";
    if let Some(p) = &a.report {
        write_text(p, &json)?;
    }
    print(&json)
}

fn eval(a: EvalArgs, cfg: &FileConfig) -> Result<()> {
    let test = require(a.test.clone().or_else(|| cfg.paths.corpus.clone()), "--test")?;
    let mut inputs = vec![test.clone()];
    inputs.extend(stopword_path(&a.stopwords, cfg));
    ensure_exist(inputs.iter().map(PathBuf::as_path))?;
    let (artifact, vocab) = load_model(&a.model, cfg)?;
    let sw = stopwords(&a.stopwords, cfg)?;

    let corpus = keep_split(&load(&test, None)?, a.split);
    let (metrics, preds) = evaluate(&corpus, &artifact.model, &vocab, &artifact.segments)?;
    let json = to_json(&metrics);
    if let Some(p) = &a.metrics {
        write_text(p, &json)?;
    }
    if let Some(p) = &a.predictions {
        write_predictions(p, &preds)?;
    }
    if let Some(p) = &a.misclassified_freq {
        let top = a.top.or(cfg.stats.top).unwrap_or(DEFAULT_TOP);
        write_frequencies(p, &misclassified_table(&corpus, &metrics, &sw, top))?;
    }
    print(&json)
}

fn classify(a: ClassifyArgs, cfg: &FileConfig) -> Result<()> {
    let from_stdin = a.text.as_os_str() == "-";
    if !from_stdin {
        ensure_exist([a.text.as_path()])?;
    }
    let (artifact, vocab) = load_model(&a.model, cfg)?;
    let text = if from_stdin {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(CliError::io(Path::new("<stdin>")))?;
        s
    } else {
        std::fs::read_to_string(&a.text).map_err(CliError::io(&a.text))?
    };
    let pred = predict_text(&a.id, &text, &artifact.model, &vocab, &artifact.segments)?;
    print(&to_json(&pred))
}

fn stats(a: StatsArgs, cfg: &FileConfig) -> Result<()> {
    let input = require(a.input.clone().or_else(|| cfg.paths.corpus.clone()), "--in")?;
    let mut inputs = vec![input.clone()];
    inputs.extend(stopword_path(&a.stopwords, cfg));
    ensure_exist(inputs.iter().map(PathBuf::as_path))?;
    let sw = stopwords(&a.stopwords, cfg)?;
    let top = a.top.or(cfg.stats.top).unwrap_or(DEFAULT_TOP);

    let corpus = load(&input, a.format)?;
    let label = a.label.map(Label::from);
    let picked = corpus.filter(|d| a.split.keeps(d.split) && label.is_none_or(|l| d.label == l));
    let table = word_frequencies(picked.iter(), &sw, top);
    if a.json {
        return print(&(table.to_json() + "\n"));
    }
    let mut buf = Vec::new();
    table.write_csv(&mut buf).map_err(CliError::io(Path::new("<stdout>")))?;
    print(&String::from_utf8(buf).expect("csv is utf-8"))
}

#[derive(Serialize)]
struct PipelineSummary<'a> {
    train_documents: usize,
    validation_documents: usize,
    test_documents: usize,
    augmented: bool,
    translated: bool,
    best_epoch: usize,
    epochs_run: usize,
    general_accuracy: f64,
    loss: f64,
    validation_accuracy: f64,
    validation_loss: f64,
    test: &'a Metrics,
}

fn pipeline(a: PipelineArgs, cfg: &FileConfig) -> Result<()> {
    let input = require(a.input.clone().or_else(|| cfg.paths.corpus.clone()), "--in or paths.corpus")?;
    let out_dir = require(a.out_dir.clone().or_else(|| cfg.paths.out_dir.clone()), "--out-dir or paths.out_dir")?;
    let lexicon = if a.no_augment {
        None
    } else {
        Some(require(a.lexicon.clone().or_else(|| cfg.paths.lexicon.clone()), "--lexicon or paths.lexicon")?)
    };
    let backend = backend_spec(&a.translation, cfg);
    let mut inputs = vec![input.clone()];
    inputs.extend(lexicon.clone());
    inputs.extend(stopword_path(&a.stopwords, cfg));
    if let Some(spec) = &backend {
        inputs.extend(backend_inputs(spec)?);
    }
    ensure_exist(inputs.iter().map(PathBuf::as_path))?;

    let acfg = augment_config(a.threshold, None, cfg)?;
    let tr_cfg = translate_config(&a.translation, cfg)?;
    let scfg = segment_config(&a.train.segment, cfg)?;
    let mcfg = model_config(&a.train, cfg)?;
    let tcfg = train_config(&a.train, cfg)?;
    let fraction = val_fraction(&a.train, cfg)?;
    let sw = stopwords(&a.stopwords, cfg)?;
    let top = a.top.or(cfg.stats.top).unwrap_or(DEFAULT_TOP);
    std::fs::create_dir_all(&out_dir).map_err(CliError::io(&out_dir))?;
    let out = |name: &str| out_dir.join(name);

    let corpus = load(&input, None)?;
    let train_all = corpus.filter(|d| d.split == Split::Train);
    let test = corpus.filter(|d| d.split == Split::Test);
    let (mut fit, mut val) = split_holdout(&train_all, fraction, mcfg.seed)?;
    let mut test = test;
    info!("split: {} train, {} validation, {} test", fit.len(), val.len(), test.len());

    if let Some(dir) = &lexicon {
        let bundle = LexiconBundle::load_dir(dir)?;
        let (augmented, traces) = augment_corpus(&fit, &bundle, &acfg)?;
        save(&augmented, &out("augmented_train.csv"), None)?;
        write_trace(&out("augment_trace.jsonl"), &traces)?;
        fit = augmented;
    }

    if let Some(spec) = &backend {
        let checkpoint = out("translation_checkpoint.jsonl");
        let mut translator = Translator::new(make_backend(spec)?, tr_cfg)?;
        fit = translator.translate_corpus(&fit, Some(&checkpoint))?;
        val = translator.translate_corpus(&val, Some(&checkpoint))?;
        test = translator.translate_corpus(&test, Some(&checkpoint))?;
        save(&fit, &out("translated_train.csv"), None)?;
        save(&val, &out("translated_val.csv"), None)?;
        save(&test, &out("translated_test.csv"), None)?;
        // Finished: a later run with other settings must not reuse it.
        std::fs::remove_file(&checkpoint).map_err(CliError::io(&checkpoint))?;
    }

    let vocab = SubwordVocab::build_from_documents(fit.iter(), vocab_words(&a.train, cfg));
    vocab.save(&out("vocab.txt"))?;
    let (model, report) = train(&fit, &val, &vocab, &scfg, &mcfg, &tcfg)?;
    let artifact = ModelArtifact::new(model, scfg, &vocab);
    artifact.save(&out("model.taug"))?;
    write_text(&out("train_report.json"), &(report.to_json() + "\n"))?;

    let (metrics, preds) = evaluate(&test, &artifact.model, &vocab, &scfg)?;
    write_text(&out("metrics.json"), &to_json(&metrics))?;
    write_predictions(&out("predictions.jsonl"), &preds)?;
    write_frequencies(&out("misclassified_freq.csv"), &misclassified_table(&test, &metrics, &sw, top))?;

    let f = report.final_metrics;
    print(&to_json(&PipelineSummary {
        train_documents: fit.len(),
        validation_documents: val.len(),
        test_documents: test.len(),
        augmented: lexicon.is_some(),
        translated: backend.is_some(),
        best_epoch: report.best_epoch,
        epochs_run: report.epochs_run(),
        general_accuracy: f.general_accuracy,
        loss: f.loss,
        validation_accuracy: f.validation_accuracy,
        validation_loss: f.validation_loss,
        test: &metrics,
    }))
}
