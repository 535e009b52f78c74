use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{DocExamples, Metrics};
use super::model::{DropoutMasks, Gradients, Model, ModelConfig};
use super::ClassifierError;
use crate::corpus::Corpus;
use crate::segment::{SegmentConfig, SubwordVocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Epochs without a strict validation-accuracy gain before stopping.
    pub patience: usize,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            patience: 3,
            batch_size: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if self.epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return Err(ClassifierError::Config("epochs, patience and batch_size must be positive".into()));
        }
        if self.patience > self.epochs {
            return Err(ClassifierError::Config(format!(
                "patience {} exceeds epochs {}",
                self.patience, self.epochs
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    Improved,
    NoImprovement,
    Stop,
}

/// Patience rule over validation accuracy. Only a strict increase over
/// the best value so far counts as improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    epoch: usize,
    best: Option<(usize, f64)>,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            epoch: 0,
            best: None,
        }
    }

    /// Records the accuracy of the next epoch.
    pub fn observe(&mut self, val_acc: f64) -> Progress {
        self.epoch += 1;
        match self.best {
            Some((_, best)) if val_acc <= best => {
                if self.epoch - self.best_epoch() >= self.patience {
                    Progress::Stop
                } else {
                    Progress::NoImprovement
                }
            }
            _ => {
                self.best = Some((self.epoch, val_acc));
                Progress::Improved
            }
        }
    }

    /// 1-based epoch of the best accuracy so far (0 before any epoch).
    pub fn best_epoch(&self) -> usize {
        self.best.map_or(0, |(e, _)| e)
    }

    /// Runs the rule over a whole trace capped at `max_epochs`; returns
    /// `(epochs run, best epoch)`, both 1-based.
    pub fn replay(trace: &[f64], patience: usize, max_epochs: usize) -> (usize, usize) {
        let mut es = EarlyStopping::new(patience);
        let mut ran = 0;
        for &acc in trace.iter().take(max_epochs) {
            ran += 1;
            if es.observe(acc) == Progress::Stop {
                break;
            }
        }
        (ran, es.best_epoch())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// The best epoch's figures: training-set accuracy and loss, validation
/// accuracy and loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub general_accuracy: f64,
    pub loss: f64,
    pub validation_accuracy: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub per_epoch: Vec<EpochMetrics>,
    /// 1-based.
    pub best_epoch: usize,
    /// True when the patience rule ended the run before the epoch budget.
    pub stopped_early: bool,
    pub final_metrics: FinalMetrics,
    /// Mean training-mode (dropout on) loss of each epoch's batches.
    pub running_loss: Vec<f64>,
}

#[derive(Serialize)]
struct PerEpochArrays {
    train_loss: Vec<f64>,
    train_accuracy: Vec<f64>,
    validation_loss: Vec<f64>,
    validation_accuracy: Vec<f64>,
    running_loss: Vec<f64>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    #[serde(flatten)]
    final_metrics: &'a FinalMetrics,
    best_epoch: usize,
    epochs_run: usize,
    stopped_early: bool,
    per_epoch: PerEpochArrays,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.per_epoch.len()
    }

    pub fn to_json(&self) -> String {
        let pick = |f: fn(&EpochMetrics) -> f64| self.per_epoch.iter().map(f).collect::<Vec<_>>();
        let json = ReportJson {
            final_metrics: &self.final_metrics,
            best_epoch: self.best_epoch,
            epochs_run: self.epochs_run(),
            stopped_early: self.stopped_early,
            per_epoch: PerEpochArrays {
                train_loss: pick(|e| e.train_loss),
                train_accuracy: pick(|e| e.train_acc),
                validation_loss: pick(|e| e.val_loss),
                validation_accuracy: pick(|e| e.val_acc),
                running_loss: self.running_loss.clone(),
            },
        };
        serde_json::to_string_pretty(&json).expect("report serializes")
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// Adam. Embedding rows are updated lazily: only rows present in the batch
/// move, and their moments decay only when they do.
struct Adam {
    lr: f64,
    step: i32,
    embedding: (Vec<f64>, Vec<f64>),
    layers: Vec<[(Vec<f64>, Vec<f64>); 2]>,
}

impl Adam {
    fn new(model: &Model) -> Self {
        let zeros = |n: usize| (vec![0.0; n], vec![0.0; n]);
        Adam {
            lr: model.config.learning_rate,
            step: 0,
            embedding: zeros(model.embedding.len()),
            layers: model
                .layers
                .iter()
                .map(|l| [zeros(l.weights.len()), zeros(l.bias.len())])
                .collect(),
        }
    }

    fn update(lr_t: f64, params: &mut [f64], grads: &[f64], moments: (&mut [f64], &mut [f64]), scale: f64) {
        let (m, v) = moments;
        for i in 0..params.len() {
            let g = grads[i] * scale;
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
            params[i] -= lr_t * m[i] / (v[i].sqrt() + EPSILON);
        }
    }

    fn apply(&mut self, model: &mut Model, grads: &mut Gradients, scale: f64) {
        self.step += 1;
        let lr_t = self.lr * (1.0 - BETA2.powi(self.step)).sqrt() / (1.0 - BETA1.powi(self.step));
        let dim = model.config.embed_dim;
        let embedding_grads = std::mem::take(&mut grads.embedding);
        for &row in grads.touched_rows() {
            let r = row as usize * dim..(row as usize + 1) * dim;
            Self::update(
                lr_t,
                &mut model.embedding[r.clone()],
                &embedding_grads[r.clone()],
                (&mut self.embedding.0[r.clone()], &mut self.embedding.1[r]),
                scale,
            );
        }
        grads.embedding = embedding_grads;
        for ((layer, (gw, gb)), [mw, mb]) in model.layers.iter_mut().zip(&grads.layers).zip(&mut self.layers) {
            Self::update(lr_t, &mut layer.weights, gw, (&mut mw.0, &mut mw.1), scale);
            Self::update(lr_t, &mut layer.bias, gb, (&mut mb.0, &mut mb.1), scale);
        }
    }
}

/// Trains on segment-level examples (every segment carries its document's
/// label) with binary cross-entropy and mini-batch Adam. After each epoch
/// both corpora are scored at document level; the patience rule watches
/// validation accuracy, and the parameters of the best epoch are returned.
/// Deterministic for a fixed `ModelConfig::seed`.
pub fn train(
    train: &Corpus,
    val: &Corpus,
    vocab: &SubwordVocab,
    segments: &SegmentConfig,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<(Model, TrainReport), ClassifierError> {
    mcfg.validate()?;
    tcfg.validate()?;
    segments.validate().map_err(|e| ClassifierError::Config(e.to_string()))?;
    if train.is_empty() {
        return Err(ClassifierError::EmptyCorpus("training"));
    }
    if val.is_empty() {
        return Err(ClassifierError::EmptyCorpus("validation"));
    }

    let train_docs = DocExamples::from_corpus(train, vocab, segments)?;
    let val_docs = DocExamples::from_corpus(val, vocab, segments)?;
    let examples: Vec<(&[u32], f64)> = train_docs
        .iter()
        .flat_map(|d| d.segments.iter().map(move |s| (s.as_slice(), d.label.target())))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(mcfg.seed);
    let mut model = Model::new(mcfg, vocab.len(), &mut rng)?;
    let mut adam = Adam::new(&model);
    let mut grads = Gradients::zeros(&model);
    let mut order: Vec<usize> = (0..examples.len()).collect();

    let mut stopper = EarlyStopping::new(tcfg.patience);
    let mut best_model = model.clone();
    let mut per_epoch = Vec::new();
    let mut running_loss = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=tcfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(tcfg.batch_size) {
            grads.clear(mcfg.embed_dim);
            for &i in batch {
                let (ids, target) = examples[i];
                let masks = DropoutMasks::sample(&model, &mut rng);
                total += model.accumulate_gradient(ids, target, Some(&masks), &mut grads)?;
            }
            adam.apply(&mut model, &mut grads, 1.0 / batch.len() as f64);
        }
        running_loss.push(total / examples.len() as f64);

        let on_train = Metrics::score(&model, &train_docs)?;
        let on_val = Metrics::score(&model, &val_docs)?;
        let m = EpochMetrics {
            train_loss: on_train.loss,
            train_acc: on_train.accuracy,
            val_loss: on_val.loss,
            val_acc: on_val.accuracy,
        };
        per_epoch.push(m);
        log::info!(
            "epoch {epoch}: loss {:.4} acc {:.4} val_loss {:.4} val_acc {:.4}",
            m.train_loss,
            m.train_acc,
            m.val_loss,
            m.val_acc
        );

        match stopper.observe(m.val_acc) {
            Progress::Improved => best_model = model.clone(),
            Progress::NoImprovement => {}
            Progress::Stop => {
                stopped_early = epoch < tcfg.epochs;
                break;
            }
        }
    }

    let best_epoch = stopper.best_epoch();
    let best = per_epoch[best_epoch - 1];
    let report = TrainReport {
        per_epoch,
        best_epoch,
        stopped_early,
        final_metrics: FinalMetrics {
            general_accuracy: best.train_acc,
            loss: best.train_loss,
            validation_accuracy: best.val_acc,
            validation_loss: best.val_loss,
        },
        running_loss,
    };
    Ok((best_model, report))
}
