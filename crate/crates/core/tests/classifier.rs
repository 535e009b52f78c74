mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{labelled_corpus, ClassVocab, DocShape};
use taug::classifier::{evaluate, predict_text, train, ModelConfig, TrainConfig};
use taug::corpus::{Corpus, Document, Label, Split};
use taug::segment::{segment_text, SegmentConfig, SubwordVocab};

fn model_config(seed: u64) -> ModelConfig {
    ModelConfig {
        seed,
        ..Default::default()
    }
}

const SEPARABLE: DocShape = DocShape {
    min_words: 20,
    max_words: 40,
    class_share: (0.3, 0.5),
    leak: 0.0,
};

fn separable(seed: u64) -> (Corpus, Corpus, SubwordVocab) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = ClassVocab::new(40, 30);
    let train_set = labelled_corpus(&mut rng, &vocab, 40, Split::Train, "t", &SEPARABLE);
    let val = labelled_corpus(&mut rng, &vocab, 10, Split::Train, "v", &SEPARABLE);
    let sub = SubwordVocab::build_from_documents(train_set.iter(), 10_000);
    (train_set, val, sub)
}

fn flip(corpus: &Corpus) -> Corpus {
    let docs = corpus
        .iter()
        .map(|d| Document {
            label: d.label.flipped(),
            ..d.clone()
        })
        .collect();
    Corpus::new(docs, "flipped").unwrap()
}

#[test]
fn separable_corpus_is_learned() {
    let (t, v, sub) = separable(1);
    let tcfg = TrainConfig {
        epochs: 10,
        patience: 10,
        batch_size: 8,
    };
    let (model, report) = train(&t, &v, &sub, &SegmentConfig::default(), &model_config(3), &tcfg).unwrap();
    assert!(report.final_metrics.general_accuracy >= 0.99, "{report:?}");
    let (m, _) = evaluate(&t, &model, &sub, &SegmentConfig::default()).unwrap();
    assert_eq!(m.accuracy, report.final_metrics.general_accuracy);
}

#[test]
fn training_is_bit_reproducible() {
    let (t, v, sub) = separable(2);
    let tcfg = TrainConfig {
        epochs: 4,
        patience: 2,
        batch_size: 16,
    };
    let run = || train(&t, &v, &sub, &SegmentConfig::default(), &model_config(9), &tcfg).unwrap();
    let (m1, r1) = run();
    let (m2, r2) = run();
    assert_eq!(r1.to_json(), r2.to_json());
    assert_eq!(r1, r2);
    assert_eq!(m1, m2);
}

#[test]
fn report_invariants_hold() {
    let (t, v, sub) = separable(5);
    let tcfg = TrainConfig {
        epochs: 6,
        patience: 2,
        batch_size: 16,
    };
    let (_, r) = train(&t, &v, &sub, &SegmentConfig::default(), &model_config(4), &tcfg).unwrap();
    let best = r.per_epoch[r.best_epoch - 1].val_acc;
    assert!(r.per_epoch.iter().all(|e| e.val_acc <= best));
    // First epoch reaching the maximum.
    assert!(r.per_epoch[..r.best_epoch - 1].iter().all(|e| e.val_acc < best));
    if r.stopped_early {
        assert_eq!(r.epochs_run(), r.best_epoch + tcfg.patience);
    }
    assert_eq!(r.running_loss.len(), r.epochs_run());
}

#[test]
fn flipping_training_labels_flips_predictions() {
    let (t, v, sub) = separable(7);
    let tcfg = TrainConfig {
        epochs: 8,
        patience: 8,
        batch_size: 8,
    };
    let scfg = SegmentConfig::default();
    let (m, _) = train(&t, &v, &sub, &scfg, &model_config(21), &tcfg).unwrap();
    let (mf, _) = train(&flip(&t), &flip(&v), &sub, &scfg, &model_config(21), &tcfg).unwrap();
    let (_, p) = evaluate(&v, &m, &sub, &scfg).unwrap();
    let (_, pf) = evaluate(&v, &mf, &sub, &scfg).unwrap();
    for (a, b) in p.iter().zip(&pf) {
        assert_eq!(a.label, b.label.flipped(), "{} {} {}", a.doc_id, a.prob_fake, b.prob_fake);
    }
}

#[test]
fn aggregation_matches_segments() {
    let (t, v, sub) = separable(11);
    let tcfg = TrainConfig {
        epochs: 2,
        patience: 1,
        batch_size: 16,
    };
    let scfg = SegmentConfig::default();
    let (model, _) = train(&t, &v, &sub, &scfg, &model_config(1), &tcfg).unwrap();

    let short = &t.documents()[0].text;
    let segs = segment_text("s", short, &sub, &scfg);
    assert_eq!(segs.len(), 1);
    let p = predict_text("s", short, &model, &sub, &scfg).unwrap();
    assert_eq!(p.prob_fake, model.forward(&segs[0]).unwrap());

    // Doubled text whose two windows are identical.
    let n = taug::segment::document_words(short).len();
    let exact = SegmentConfig::new(n, 0, n + 2).unwrap();
    let doubled = format!("{short} {short}");
    let once = predict_text("d", short, &model, &sub, &exact).unwrap();
    let twice = predict_text("d", &doubled, &model, &sub, &exact).unwrap();
    assert_eq!(twice.segment_probs.len(), 2);
    assert_eq!(twice.segment_probs[0], twice.segment_probs[1]);
    assert_eq!(twice.label, once.label);

    let long: Vec<&str> = t.iter().take(12).map(|d| d.text.as_str()).collect();
    let p = predict_text("l", &long.join(" "), &model, &sub, &scfg).unwrap();
    assert!(p.segment_probs.len() > 1);
    let mean = p.segment_probs.iter().sum::<f64>() / p.segment_probs.len() as f64;
    assert_eq!(p.prob_fake, mean);
    assert_eq!(p.label == Label::Fake, p.prob_fake >= 0.5);
}

#[test]
fn empty_corpora_are_rejected() {
    let (t, _, sub) = separable(3);
    let empty = Corpus::empty("none");
    let scfg = SegmentConfig::default();
    let tcfg = TrainConfig::default();
    assert!(train(&empty, &t, &sub, &scfg, &model_config(0), &tcfg).is_err());
    assert!(train(&t, &empty, &sub, &scfg, &model_config(0), &tcfg).is_err());
}
