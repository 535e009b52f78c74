use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::segment::{Segment, SubwordVocab};

/// Probabilities are kept this far from 0 and 1.
const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub embed_dim: usize,
    /// Output widths of the five dense layers; the last must be 1.
    pub dense_dims: Vec<usize>,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 64,
            dense_dims: vec![256, 128, 64, 32, 1],
            dropout_rate: 0.1,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: String| Err(ClassifierError::Config(m));
        if self.embed_dim == 0 {
            return bad("embed_dim must be positive".into());
        }
        if self.dense_dims.len() != 5 {
            return bad(format!("expected 5 dense layers, got {}", self.dense_dims.len()));
        }
        if self.dense_dims.contains(&0) {
            return bad("dense layer widths must be positive".into());
        }
        if self.dense_dims[4] != 1 {
            return bad("the last dense layer must have width 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate must lie in [0, 1), got {}", self.dropout_rate));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs × inputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }
}

/// Embedding table plus the dense stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub(super) config: ModelConfig,
    pub(super) vocab_size: usize,
    /// `vocab_size × embed_dim`, row-major.
    pub(super) embedding: Vec<f64>,
    pub(super) layers: Vec<Dense>,
}

/// Inverted-dropout multipliers (0 or `1/(1-rate)`) for the outputs of the
/// four hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks(pub(super) Vec<Vec<f64>>);

impl DropoutMasks {
    pub fn sample<R: Rng>(model: &Model, rng: &mut R) -> Self {
        let rate = model.config.dropout_rate;
        let keep = 1.0 / (1.0 - rate);
        DropoutMasks(
            model.layers[..4]
                .iter()
                .map(|l| {
                    (0..l.outputs)
                        .map(|_| if rate > 0.0 && rng.gen::<f64>() < rate { 0.0 } else { keep })
                        .collect()
                })
                .collect(),
        )
    }
}

/// Gradient buffers shaped like a [`Model`]. Embedding rows are tracked
/// sparsely through `touched`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub(super) embedding: Vec<f64>,
    pub(super) touched: Vec<u32>,
    pub(super) layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros(model: &Model) -> Self {
        Gradients {
            embedding: vec![0.0; model.embedding.len()],
            touched: Vec::new(),
            layers: model
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
                .collect(),
        }
    }

    pub fn clear(&mut self, embed_dim: usize) {
        for &row in &self.touched {
            let start = row as usize * embed_dim;
            self.embedding[start..start + embed_dim].fill(0.0);
        }
        self.touched.clear();
        for (w, b) in &mut self.layers {
            w.fill(0.0);
            b.fill(0.0);
        }
    }

    /// Sorted, deduplicated embedding rows with nonzero gradient.
    pub(super) fn touched_rows(&mut self) -> &[u32] {
        self.touched.sort_unstable();
        self.touched.dedup();
        &self.touched
    }

    /// Same order as [`Model::param`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = self.embedding.clone();
        for (w, b) in &self.layers {
            out.extend(w);
            out.extend(b);
        }
        out
    }
}

enum Slot {
    Embedding(usize),
    Weight(usize, usize),
    Bias(usize, usize),
}

struct Trace {
    count: f64,
    /// Layer inputs: pooled embedding, then each hidden output after
    /// activation and dropout.
    inputs: Vec<Vec<f64>>,
    /// Hidden pre-activations.
    pre: Vec<Vec<f64>>,
    logit: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of `sigmoid(z)` against `y`, computed from the
/// logit for stability.
fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

impl Model {
    /// Every parameter zero: the output is 0.5 for any input.
    pub fn zeros(config: &ModelConfig, vocab_size: usize) -> Result<Self, ClassifierError> {
        config.validate()?;
        if vocab_size == 0 {
            return Err(ClassifierError::ShapeMismatch("empty vocabulary".into()));
        }
        let mut layers = Vec::with_capacity(5);
        let mut inputs = config.embed_dim;
        for &outputs in &config.dense_dims {
            layers.push(Dense {
                inputs,
                outputs,
                weights: vec![0.0; inputs * outputs],
                bias: vec![0.0; outputs],
            });
            inputs = outputs;
        }
        Ok(Model {
            config: config.clone(),
            vocab_size,
            embedding: vec![0.0; vocab_size * config.embed_dim],
            layers,
        })
    }

    /// Random initialization: embeddings uniform in ±0.05, ReLU layers
    /// He-uniform, output layer Glorot-uniform, zero biases.
    pub fn new<R: Rng>(config: &ModelConfig, vocab_size: usize, rng: &mut R) -> Result<Self, ClassifierError> {
        let mut m = Self::zeros(config, vocab_size)?;
        m.embedding.iter_mut().for_each(|e| *e = rng.gen_range(-0.05..0.05));
        for (i, l) in m.layers.iter_mut().enumerate() {
            let limit = if i < 4 {
                (6.0 / l.inputs as f64).sqrt()
            } else {
                (6.0 / (l.inputs + l.outputs) as f64).sqrt()
            };
            l.weights.iter_mut().for_each(|w| *w = rng.gen_range(-limit..limit));
        }
        Ok(m)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn parameter_count(&self) -> usize {
        self.embedding.len() + self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum::<usize>()
    }

    fn locate(&self, mut i: usize) -> Slot {
        if i < self.embedding.len() {
            return Slot::Embedding(i);
        }
        i -= self.embedding.len();
        for (li, l) in self.layers.iter().enumerate() {
            if i < l.weights.len() {
                return Slot::Weight(li, i);
            }
            i -= l.weights.len();
            if i < l.bias.len() {
                return Slot::Bias(li, i);
            }
            i -= l.bias.len();
        }
        panic!("parameter index out of range")
    }

    /// Flat parameter view: embedding, then weights and bias of each layer.
    pub fn param(&self, i: usize) -> f64 {
        match self.locate(i) {
            Slot::Embedding(j) => self.embedding[j],
            Slot::Weight(l, j) => self.layers[l].weights[j],
            Slot::Bias(l, j) => self.layers[l].bias[j],
        }
    }

    pub fn set_param(&mut self, i: usize, value: f64) {
        let slot = match self.locate(i) {
            Slot::Embedding(j) => &mut self.embedding[j],
            Slot::Weight(l, j) => &mut self.layers[l].weights[j],
            Slot::Bias(l, j) => &mut self.layers[l].bias[j],
        };
        *slot = value;
    }

    fn trace(&self, ids: &[u32], masks: Option<&DropoutMasks>) -> Result<Trace, ClassifierError> {
        let dim = self.config.embed_dim;
        let mut pooled = vec![0.0; dim];
        let mut count = 0usize;
        for &id in ids {
            if id == SubwordVocab::PAD_ID {
                continue;
            }
            let row = id as usize;
            if row >= self.vocab_size {
                return Err(ClassifierError::ShapeMismatch(format!(
                    "id {id} outside vocabulary of {}",
                    self.vocab_size
                )));
            }
            for (p, e) in pooled.iter_mut().zip(&self.embedding[row * dim..(row + 1) * dim]) {
                *p += e;
            }
            count += 1;
        }
        if count == 0 {
            return Err(ClassifierError::ShapeMismatch("segment has no non-pad ids".into()));
        }
        let count = count as f64;
        pooled.iter_mut().for_each(|p| *p /= count);

        let mut inputs = vec![pooled];
        let mut pre = Vec::with_capacity(4);
        for (i, layer) in self.layers[..4].iter().enumerate() {
            let z = layer.forward(inputs.last().expect("input"));
            let mut h: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
            if let Some(m) = masks {
                h.iter_mut().zip(&m.0[i]).for_each(|(v, k)| *v *= k);
            }
            pre.push(z);
            inputs.push(h);
        }
        let logit = self.layers[4].forward(inputs.last().expect("input"))[0];
        Ok(Trace {
            count,
            inputs,
            pre,
            logit,
        })
    }

    /// Evaluation-mode probability that the ids come from a fake text.
    pub fn forward_ids(&self, ids: &[u32]) -> Result<f64, ClassifierError> {
        let t = self.trace(ids, None)?;
        Ok(sigmoid(t.logit).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR))
    }

    pub fn forward(&self, segment: &Segment) -> Result<f64, ClassifierError> {
        self.forward_ids(&segment.ids)
    }

    /// Cross-entropy of one example; `masks` switches on training-mode dropout.
    pub fn loss(&self, ids: &[u32], target: f64, masks: Option<&DropoutMasks>) -> Result<f64, ClassifierError> {
        Ok(bce_from_logit(self.trace(ids, masks)?.logit, target))
    }

    /// Adds d(loss)/d(params) for one example into `grads`; returns the loss.
    pub fn accumulate_gradient(
        &self,
        ids: &[u32],
        target: f64,
        masks: Option<&DropoutMasks>,
        grads: &mut Gradients,
    ) -> Result<f64, ClassifierError> {
        let t = self.trace(ids, masks)?;
        let loss = bce_from_logit(t.logit, target);

        let mut delta = vec![sigmoid(t.logit) - target];
        for li in (0..5).rev() {
            let layer = &self.layers[li];
            let input = &t.inputs[li];
            let (gw, gb) = &mut grads.layers[li];
            for (o, d) in delta.iter().enumerate() {
                gb[o] += d;
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                row.iter_mut().zip(input).for_each(|(g, x)| *g += d * x);
            }
            let mut back = vec![0.0; layer.inputs];
            for (o, d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                back.iter_mut().zip(row).for_each(|(b, w)| *b += d * w);
            }
            if li > 0 {
                // Through dropout and ReLU of the previous hidden layer.
                let z = &t.pre[li - 1];
                for (j, b) in back.iter_mut().enumerate() {
                    let keep = masks.map_or(1.0, |m| m.0[li - 1][j]);
                    *b *= if z[j] > 0.0 { keep } else { 0.0 };
                }
            }
            delta = back;
        }

        let dim = self.config.embed_dim;
        for &id in ids {
            if id == SubwordVocab::PAD_ID {
                continue;
            }
            let row = id as usize * dim;
            grads.embedding[row..row + dim]
                .iter_mut()
                .zip(&delta)
                .for_each(|(g, d)| *g += d / t.count);
            grads.touched.push(id);
        }
        Ok(loss)
    }

    /// Loss and full gradient of one example.
    pub fn loss_and_gradient(&self, ids: &[u32], target: f64, masks: Option<&DropoutMasks>) -> Result<(f64, Gradients), ClassifierError> {
        let mut g = Gradients::zeros(self);
        let loss = self.accumulate_gradient(ids, target, masks, &mut g)?;
        Ok((loss, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mini_config() -> ModelConfig {
        ModelConfig {
            embed_dim: 2,
            dense_dims: vec![3, 3, 2, 2, 1],
            dropout_rate: 0.2,
            learning_rate: 1e-3,
            seed: 1,
        }
    }

    #[test]
    fn zero_model_outputs_half() {
        let m = Model::zeros(&ModelConfig::default(), 50).unwrap();
        assert_eq!(m.forward_ids(&[2, 7, 9, 3, 0, 0]).unwrap(), 0.5);
        assert!((m.loss(&[2, 3], 1.0, None).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn eval_mode_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Model::new(&ModelConfig::default(), 30, &mut rng).unwrap();
        let ids = [2, 5, 6, 3, 0, 0];
        let p = m.forward_ids(&ids).unwrap();
        assert_eq!(p, m.forward_ids(&ids).unwrap());
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn shape_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Model::new(&mini_config(), 6, &mut rng).unwrap();
        assert!(matches!(m.forward_ids(&[2, 6, 3]), Err(ClassifierError::ShapeMismatch(_))));
        assert!(matches!(m.forward_ids(&[0, 0]), Err(ClassifierError::ShapeMismatch(_))));
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::default().validate().is_ok());
        let mut c = ModelConfig::default();
        c.dense_dims = vec![4, 4, 4, 1];
        assert!(c.validate().is_err());
        c.dense_dims = vec![4, 4, 4, 4, 2];
        assert!(c.validate().is_err());
        let c = ModelConfig {
            dropout_rate: 1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn flat_parameter_view_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = Model::new(&mini_config(), 6, &mut rng).unwrap();
        let n = m.parameter_count();
        assert_eq!(n, 6 * 2 + (2 * 3 + 3) + (3 * 3 + 3) + (3 * 2 + 2) + (2 * 2 + 2) + (2 + 1));
        m.set_param(n - 1, 0.25);
        assert_eq!(m.param(n - 1), 0.25);
        assert_eq!(m.layers[4].bias[0], 0.25);
        let (_, g) = m.loss_and_gradient(&[2, 4, 3], 1.0, None).unwrap();
        assert_eq!(g.flat().len(), n);
    }

    fn finite_difference_check(masks: bool) {
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = Model::new(&mini_config(), 6, &mut rng).unwrap();
            // Nudge biases off zero so no ReLU sits on its kink.
            for l in &mut m.layers {
                l.bias.iter_mut().for_each(|b| *b = rng.gen_range(0.05..0.3));
            }
            let masks = masks.then(|| DropoutMasks::sample(&m, &mut rng));
            let ids = [2, 4, 5, 4, 3, 0, 0];
            let target = (seed % 2) as f64;
            let (_, g) = m.loss_and_gradient(&ids, target, masks.as_ref()).unwrap();
            let analytic = g.flat();
            let h = 1e-6;
            for i in 0..m.parameter_count() {
                let orig = m.param(i);
                m.set_param(i, orig + h);
                let up = m.loss(&ids, target, masks.as_ref()).unwrap();
                m.set_param(i, orig - h);
                let down = m.loss(&ids, target, masks.as_ref()).unwrap();
                m.set_param(i, orig);
                let numeric = (up - down) / (2.0 * h);
                let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
                assert!(
                    (analytic[i] - numeric).abs() / scale < 1e-4,
                    "seed {seed} param {i}: analytic {} numeric {numeric}",
                    analytic[i]
                );
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        finite_difference_check(false);
    }

    #[test]
    fn gradients_match_finite_differences_with_dropout() {
        finite_difference_check(true);
    }
}
