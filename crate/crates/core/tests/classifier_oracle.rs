use std::sync::LazyLock;

use dialog_engine::dialog::{predict_ted, train_ted, DialogTracker, PolicyConfig, TedModel, TurnState, ACTION_LISTEN};
use dialog_engine::nlu::{IntentModel, NluConfig, PatternSet, SoftmaxRegression, SparseVector, TrainParams};
use dialog_engine::training_data::{Story, StoryStep, TrainingExample};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense reference: mean cross-entropy + 0.5 * l2 * |W|^2 and its gradient.
fn dense_loss_grad(w: &[Vec<f64>], b: &[f64], data: &[(Vec<f64>, usize)], l2: f64) -> (f64, Vec<Vec<f64>>, Vec<f64>) {
    let (c, d) = (w.len(), w[0].len());
    let mut gw = vec![vec![0.0; d]; c];
    let mut gb = vec![0.0; c];
    let mut loss = 0.0;
    for (x, y) in data {
        let s: Vec<f64> = (0..c)
            .map(|k| b[k] + (0..d).map(|j| w[k][j] * x[j]).sum::<f64>())
            .collect();
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = s.iter().map(|v| (v - m).exp()).sum();
        let p: Vec<f64> = s.iter().map(|v| (v - m).exp() / z).collect();
        loss -= p[*y].ln();
        for k in 0..c {
            let delta = p[k] - if k == *y { 1.0 } else { 0.0 };
            gb[k] += delta / data.len() as f64;
            for j in 0..d {
                gw[k][j] += delta * x[j] / data.len() as f64;
            }
        }
    }
    loss /= data.len() as f64;
    for k in 0..c {
        for j in 0..d {
            loss += 0.5 * l2 * w[k][j] * w[k][j];
            gw[k][j] += l2 * w[k][j];
        }
    }
    (loss, gw, gb)
}

fn dense(x: &SparseVector) -> Vec<f64> {
    (0..x.dimension()).map(|i| x.get(i)).collect()
}

fn disjoint_corpus() -> Vec<TrainingExample> {
    let greet = ["salam", "assalam dost", "aoa", "adaab arz"];
    let fee = ["fees kitni", "kharcha batao", "rupay kitne", "fees structure"];
    greet
        .iter()
        .map(|t| TrainingExample::new(*t, "greet"))
        .chain(fee.iter().map(|t| TrainingExample::new(*t, "fee")))
        .collect()
}

#[test]
fn library_gradient_matches_dense_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..20 {
        let (c, d) = (rng.random_range(2..5), rng.random_range(1..7));
        let data: Vec<(SparseVector, usize)> = (0..rng.random_range(1..6))
            .map(|_| {
                let mut pairs: Vec<(usize, f64)> = Vec::new();
                for j in 0..d {
                    if rng.random_bool(0.6) {
                        pairs.push((j, rng.random_range(-2.0..2.0)));
                    }
                }
                (SparseVector::from_pairs(d, pairs), rng.random_range(0..c))
            })
            .collect();
        let mut model = SoftmaxRegression::initialize(c, d, trial);
        for i in 0..model.parameter_count() {
            model.set_parameter(i, rng.random_range(-1.0..1.0));
        }
        let w: Vec<Vec<f64>> = (0..c)
            .map(|k| (0..d).map(|j| model.parameter(k * d + j)).collect())
            .collect();
        let b: Vec<f64> = (0..c).map(|k| model.parameter(c * d + k)).collect();
        let dd: Vec<(Vec<f64>, usize)> = data.iter().map(|(x, y)| (dense(x), *y)).collect();
        let (ref_loss, gw, gb) = dense_loss_grad(&w, &b, &dd, 0.01);
        let (loss, grad) = model.loss_and_gradient(&data, 0.01);
        assert!((loss - ref_loss).abs() < 1e-12);
        let expected: Vec<f64> = gw.into_iter().flatten().chain(gb).collect();
        for (a, e) in grad.flat().iter().zip(&expected) {
            assert!((a - e).abs() < 1e-12, "trial {trial}");
        }
    }
}

#[test]
fn predictions_match_converged_reference() {
    let corpus = disjoint_corpus();
    let model = IntentModel::train(&corpus, PatternSet::empty(), &NluConfig::default()).unwrap();

    // Reference: plain gradient descent without regularization, run until
    // the training loss is below 1e-6.
    let labels = &model.labels;
    let data: Vec<(Vec<f64>, usize)> = corpus
        .iter()
        .map(|e| {
            let y = labels.iter().position(|l| *l == e.intent).unwrap();
            (dense(&model.featurizer.featurize(&e.text)), y)
        })
        .collect();
    let (c, d) = (labels.len(), data[0].0.len());
    let mut w = vec![vec![0.0; d]; c];
    let mut b = vec![0.0; c];
    let mut loss = f64::INFINITY;
    for _ in 0..200_000 {
        let (l, gw, gb) = dense_loss_grad(&w, &b, &data, 0.0);
        loss = l;
        if loss < 1e-6 {
            break;
        }
        for k in 0..c {
            b[k] -= 2.0 * gb[k];
            for j in 0..d {
                w[k][j] -= 2.0 * gw[k][j];
            }
        }
    }
    assert!(loss < 1e-6, "reference did not converge: {loss}");

    for (e, (x, y)) in corpus.iter().zip(&data) {
        let scores: Vec<f64> = (0..c)
            .map(|k| b[k] + (0..d).map(|j| w[k][j] * x[j]).sum::<f64>())
            .collect();
        let reference = (0..c).max_by(|&i, &j| scores[i].total_cmp(&scores[j])).unwrap();
        assert_eq!(reference, *y);
        let ranking = model.rank(&e.text);
        assert_eq!(ranking[0].name, labels[reference], "{:?}", e.text);
        assert!(ranking[0].confidence > 0.9, "{:?}: {}", e.text, ranking[0].confidence);
    }
}

#[test]
fn duplicated_corpus_gives_same_decisions() {
    let corpus = disjoint_corpus();
    let doubled: Vec<TrainingExample> = corpus.iter().flat_map(|e| [e.clone(), e.clone()]).collect();
    let a = IntentModel::train(&corpus, PatternSet::empty(), &NluConfig::default()).unwrap();
    let b = IntentModel::train(&doubled, PatternSet::empty(), &NluConfig::default()).unwrap();
    let probes = [
        "salam",
        "fees",
        "aoa bhai",
        "kitni fees",
        "adaab",
        "rupay",
        "kharcha kya",
        "assalam",
        "dost",
        "structure",
        "sa",
        "fe",
        "batao na",
        "arz hai",
        "kitne paise",
        "salam fees",
        "aoa kharcha",
        "x",
        "assalam rupay",
        "dost fees",
    ];
    for p in probes {
        assert_eq!(a.rank(p)[0].name, b.rank(p)[0].name, "{p:?}");
    }
}

fn fee_stories() -> Vec<Story> {
    let mut stories = Vec::new();
    for i in 0..5 {
        stories.push(Story::new(
            format!("fee {i}"),
            vec![
                StoryStep::new("greet", &["utter_greet"]),
                StoryStep::new("ask_fee", &["utter_fee"]),
            ],
        ));
    }
    stories.push(Story::new(
        "fee direct",
        vec![StoryStep::new("ask_fee", &["utter_fee"])],
    ));
    stories.push(Story::new("bye", vec![StoryStep::new("goodbye", &["utter_goodbye"])]));
    stories
}

#[test]
fn ted_ranks_repeated_pattern_first() {
    let model = train_ted(&fee_stories(), 3, &TrainParams::default()).unwrap();
    for turns in [
        vec![TurnState::new("ask_fee", &[])],
        vec![
            TurnState::new("greet", &["utter_greet"]),
            TurnState::new("ask_fee", &[]),
        ],
    ] {
        let t = DialogTracker::from_turns("c", &turns);
        // brute force over every action except the masked listen
        let probs = model.action_probabilities(&t).unwrap();
        let best = (0..model.actions.len())
            .filter(|&i| model.actions[i] != ACTION_LISTEN)
            .max_by(|&i, &j| probs[i].total_cmp(&probs[j]))
            .unwrap();
        assert_eq!(model.actions[best], "utter_fee");
        let d = predict_ted(&model, &t, &PolicyConfig::default()).unwrap().unwrap();
        assert_eq!(d.action, "utter_fee");
        assert!(d.confidence >= 0.35);
    }
}

#[test]
fn ted_uniform_scores_abstain() {
    let mut model: TedModel = train_ted(&fee_stories(), 3, &TrainParams::default()).unwrap();
    for i in 0..model.ranker.parameter_count() {
        model.ranker.set_parameter(i, 0.0);
    }
    let t = DialogTracker::from_turns("c", &[TurnState::new("ask_fee", &[])]);
    assert!(predict_ted(&model, &t, &PolicyConfig::default()).unwrap().is_none());
}

static MODEL: LazyLock<IntentModel> =
    LazyLock::new(|| IntentModel::train(&disjoint_corpus(), PatternSet::empty(), &NluConfig::default()).unwrap());

proptest! {
    #[test]
    fn confidences_normalized(text in "\\PC{0,30}") {
        let r = MODEL.rank(&text);
        let sum: f64 = r.iter().map(|c| c.confidence).sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(r.windows(2).all(|w| w[0].confidence >= w[1].confidence));
        prop_assert!(r[0].confidence >= 0.5 - 1e-12);
    }
}
