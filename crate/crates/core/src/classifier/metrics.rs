use serde::{Deserialize, Serialize};

use super::model::Model;
use super::ClassifierError;
use crate::corpus::{Corpus, Document, Label};
use crate::segment::{segment_text, SegmentConfig, SubwordVocab};

/// Probabilities are clipped to `[EPS, 1-EPS]` inside the loss.
const EPS: f64 = 1e-7;

fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(EPS, 1.0 - EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Document-level output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub doc_id: String,
    pub prob_fake: f64,
    pub segment_probs: Vec<f64>,
    pub label: Label,
}

impl Prediction {
    /// Mean of the segment probabilities; `>= 0.5` is fake.
    pub fn from_segment_probs(doc_id: impl Into<String>, segment_probs: Vec<f64>) -> Result<Self, ClassifierError> {
        let doc_id = doc_id.into();
        if segment_probs.is_empty() {
            return Err(ClassifierError::EmptyDocument(doc_id));
        }
        let prob_fake = segment_probs.iter().sum::<f64>() / segment_probs.len() as f64;
        let label = if prob_fake >= 0.5 { Label::Fake } else { Label::Real };
        Ok(Prediction {
            doc_id,
            prob_fake,
            segment_probs,
            label,
        })
    }
}

/// Confusion counts with fake as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Mean document-level binary cross-entropy.
    pub loss: f64,
    pub confusion: Confusion,
    pub misclassified_ids: Vec<String>,
}

impl Metrics {
    /// Scores predictions against true labels, pairwise.
    pub fn from_predictions<'a>(pairs: impl IntoIterator<Item = (&'a Prediction, Label)>) -> Result<Self, ClassifierError> {
        let mut confusion = Confusion::default();
        let mut misclassified_ids = Vec::new();
        let mut loss = 0.0;
        let mut n = 0usize;
        for (pred, truth) in pairs {
            n += 1;
            loss += bce(pred.prob_fake, truth.target());
            match (pred.label, truth) {
                (Label::Fake, Label::Fake) => confusion.tp += 1,
                (Label::Fake, Label::Real) => confusion.fp += 1,
                (Label::Real, Label::Real) => confusion.tn += 1,
                (Label::Real, Label::Fake) => confusion.fn_ += 1,
            }
            if pred.label != truth {
                misclassified_ids.push(pred.doc_id.clone());
            }
        }
        if n == 0 {
            return Err(ClassifierError::EmptyCorpus("evaluation"));
        }
        Ok(Metrics {
            accuracy: (confusion.tp + confusion.tn) as f64 / n as f64,
            loss: loss / n as f64,
            confusion,
            misclassified_ids,
        })
    }

    pub(super) fn score(model: &Model, docs: &[DocExamples]) -> Result<Self, ClassifierError> {
        let preds = docs
            .iter()
            .map(|d| d.predict(model))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_predictions(preds.iter().zip(docs.iter().map(|d| d.label)))
    }
}

/// A document's active segment ids, encoded once and reused every epoch.
pub(super) struct DocExamples {
    pub id: String,
    pub label: Label,
    pub segments: Vec<Vec<u32>>,
}

impl DocExamples {
    pub fn from_corpus(corpus: &Corpus, vocab: &SubwordVocab, cfg: &SegmentConfig) -> Result<Vec<Self>, ClassifierError> {
        corpus.iter().map(|d| Self::new(d, vocab, cfg)).collect()
    }

    fn new(doc: &Document, vocab: &SubwordVocab, cfg: &SegmentConfig) -> Result<Self, ClassifierError> {
        let segments: Vec<Vec<u32>> = segment_text(&doc.id, &doc.text, vocab, cfg)
            .into_iter()
            .map(|s| s.active_ids().to_vec())
            .collect();
        if segments.is_empty() {
            return Err(ClassifierError::EmptyDocument(doc.id.clone()));
        }
        Ok(DocExamples {
            id: doc.id.clone(),
            label: doc.label,
            segments,
        })
    }

    fn predict(&self, model: &Model) -> Result<Prediction, ClassifierError> {
        let probs = self
            .segments
            .iter()
            .map(|ids| model.forward_ids(ids))
            .collect::<Result<Vec<_>, _>>()?;
        Prediction::from_segment_probs(self.id.clone(), probs)
    }
}

/// Segments the text, scores each segment in evaluation mode and
/// averages.
pub fn predict_text(doc_id: &str, text: &str, model: &Model, vocab: &SubwordVocab, cfg: &SegmentConfig) -> Result<Prediction, ClassifierError> {
    if model.vocab_size() != vocab.len() {
        return Err(ClassifierError::VocabMismatch);
    }
    let probs = segment_text(doc_id, text, vocab, cfg)
        .iter()
        .map(|s| model.forward(s))
        .collect::<Result<Vec<_>, _>>()?;
    Prediction::from_segment_probs(doc_id, probs)
}

pub fn predict(doc: &Document, model: &Model, vocab: &SubwordVocab, cfg: &SegmentConfig) -> Result<Prediction, ClassifierError> {
    predict_text(&doc.id, &doc.text, model, vocab, cfg)
}

/// Predicts every document and scores against the corpus labels.
pub fn evaluate(docs: &Corpus, model: &Model, vocab: &SubwordVocab, cfg: &SegmentConfig) -> Result<(Metrics, Vec<Prediction>), ClassifierError> {
    if docs.is_empty() {
        return Err(ClassifierError::EmptyCorpus("evaluation"));
    }
    let preds = docs
        .iter()
        .map(|d| predict(d, model, vocab, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let metrics = Metrics::from_predictions(preds.iter().zip(docs.iter().map(|d| d.label)))?;
    Ok((metrics, preds))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(id: &str, p: f64) -> Prediction {
        Prediction::from_segment_probs(id, vec![p]).unwrap()
    }

    #[test]
    fn aggregation_is_mean_with_ties_to_fake() {
        let p = Prediction::from_segment_probs("d", vec![0.9, 0.2, 0.4]).unwrap();
        assert!((p.prob_fake - 0.5).abs() < 1e-15);
        // 0.9 + 0.2 + 0.4 rounds to exactly 1.5 in binary.
        assert_eq!(p.prob_fake, 0.5);
        assert_eq!(p.label, Label::Fake);
        assert_eq!(pred("x", 0.49).label, Label::Real);
        assert!(matches!(
            Prediction::from_segment_probs("e", vec![]),
            Err(ClassifierError::EmptyDocument(_))
        ));
    }

    #[test]
    fn nineteen_of_twenty() {
        let preds: Vec<_> = (0..20).map(|i| pred(&format!("f{i}"), if i == 7 { 0.2 } else { 0.8 })).collect();
        let m = Metrics::from_predictions(preds.iter().map(|p| (p, Label::Fake))).unwrap();
        assert_eq!(m.accuracy, 0.95);
        assert_eq!(m.confusion, Confusion { tp: 19, fp: 0, tn: 0, fn_: 1 });
        assert_eq!(m.misclassified_ids, ["f7"]);
    }

    #[test]
    fn perfect_predictions_beat_constant_half() {
        let preds = [pred("a", 0.9), pred("b", 0.1)];
        let truth = [Label::Fake, Label::Real];
        let m = Metrics::from_predictions(preds.iter().zip(truth)).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert!(m.loss < std::f64::consts::LN_2);
        let halves = [pred("a", 0.5), pred("b", 0.5)];
        let h = Metrics::from_predictions(halves.iter().zip(truth)).unwrap();
        assert!((h.loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn empty_evaluation_is_an_error() {
        assert!(matches!(
            Metrics::from_predictions(std::iter::empty()),
            Err(ClassifierError::EmptyCorpus(_))
        ));
    }
}
