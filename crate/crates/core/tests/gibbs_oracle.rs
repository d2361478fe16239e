use std::collections::BTreeSet;

use dialog_engine::intent_miner::{
    dominant_topics, export_intent_draft, fit_lda, mean_pairwise_distance, preprocess_corpus, token_share, top_terms,
    topic_distance_matrix, Corpus, GibbsSampler, LdaParams, PreprocessOptions,
};
use dialog_engine::training_data::parse_nlu_markdown;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference sampler: recounts everything from the assignment vector for
/// every single token instead of maintaining incremental counts.
fn oracle_assignments(
    docs: &[Vec<usize>],
    v: usize,
    k: usize,
    alpha: f64,
    beta: f64,
    iters: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z: Vec<Vec<usize>> = docs
        .iter()
        .map(|d| d.iter().map(|_| rng.random_range(0..k)).collect())
        .collect();
    for _ in 0..iters {
        for d in 0..docs.len() {
            for i in 0..docs[d].len() {
                let w = docs[d][i];
                let mut ndk = vec![0u32; k];
                let mut nkw = vec![0u32; k];
                let mut nk = vec![0u32; k];
                for (dd, doc) in docs.iter().enumerate() {
                    for (ii, &ww) in doc.iter().enumerate() {
                        if dd == d && ii == i {
                            continue;
                        }
                        let t = z[dd][ii];
                        nk[t] += 1;
                        if dd == d {
                            ndk[t] += 1;
                        }
                        if ww == w {
                            nkw[t] += 1;
                        }
                    }
                }
                let vb = v as f64 * beta;
                let mut cum = Vec::with_capacity(k);
                let mut total = 0.0;
                for t in 0..k {
                    total += (ndk[t] as f64 + alpha) * (nkw[t] as f64 + beta) / (nk[t] as f64 + vb);
                    cum.push(total);
                }
                let u = rng.random::<f64>() * total;
                z[d][i] = cum.iter().position(|&c| u < c).unwrap_or(k - 1);
            }
        }
    }
    z
}

fn disjoint_corpus() -> Corpus {
    let docs = [
        "aaa bbb ccc aaa bbb ccc",
        "bbb ccc aaa ccc aaa bbb",
        "ccc aaa bbb bbb ccc aaa",
        "xxx yyy zzz xxx yyy zzz",
        "yyy zzz xxx zzz xxx yyy",
        "zzz xxx yyy yyy zzz xxx",
    ];
    preprocess_corpus(&docs, &BTreeSet::new(), &PreprocessOptions::default()).unwrap()
}

fn doc_tokens(c: &Corpus) -> Vec<Vec<usize>> {
    c.docs.iter().map(|d| d.tokens.clone()).collect()
}

#[test]
fn sampler_matches_oracle_on_disjoint_corpus() {
    let c = disjoint_corpus();
    for seed in [1, 42, 99] {
        let p = LdaParams {
            k: 2,
            alpha: 0.5,
            beta: 0.01,
            iterations: 30,
            seed,
        };
        let m = fit_lda(&c, &p).unwrap();
        assert_eq!(
            m.assignments,
            oracle_assignments(&doc_tokens(&c), 6, 2, 0.5, 0.01, 30, seed)
        );
        assert!(m.counts_consistent(&c));
    }
}

#[test]
fn disjoint_vocabularies_recovered() {
    let c = disjoint_corpus();
    let m = fit_lda(
        &c,
        &LdaParams {
            k: 2,
            alpha: 0.5,
            beta: 0.01,
            iterations: 500,
            seed: 42,
        },
    )
    .unwrap();
    let a: BTreeSet<String> = ["aaa", "bbb", "ccc"].map(String::from).into();
    let x: BTreeSet<String> = ["xxx", "yyy", "zzz"].map(String::from).into();
    let t0: BTreeSet<String> = top_terms(&m, 0, 3).unwrap().into_iter().collect();
    let t1: BTreeSet<String> = top_terms(&m, 1, 3).unwrap().into_iter().collect();
    assert!((t0 == a && t1 == x) || (t0 == x && t1 == a), "{t0:?} {t1:?}");

    let dominant = dominant_topics(&m);
    assert!(dominant[..3].iter().all(|&t| t == dominant[0]));
    assert!(dominant[3..].iter().all(|&t| t == dominant[3]));
    assert_ne!(dominant[0], dominant[3]);

    let draft = export_intent_draft(&m, &c, "topic").unwrap();
    let doc = parse_nlu_markdown(&draft).unwrap();
    assert_eq!(doc.intents().len(), 2);
    for intent in doc.intents() {
        let texts: Vec<&str> = doc
            .examples
            .iter()
            .filter(|e| e.intent == intent)
            .map(|e| e.text.as_str())
            .collect();
        assert_eq!(texts.len(), 3);
        let first_vocab = texts[0].contains("aaa");
        assert!(texts.iter().all(|t| t.contains("aaa") == first_vocab));
    }
}

#[test]
fn degenerate_single_word_corpus() {
    let docs = ["aaa aaa", "aaa aaa aaa", "aaa aaa"];
    let c = preprocess_corpus(&docs, &BTreeSet::new(), &PreprocessOptions::default()).unwrap();
    let m = fit_lda(
        &c,
        &LdaParams {
            k: 2,
            alpha: 0.5,
            beta: 0.01,
            iterations: 50,
            seed: 42,
        },
    )
    .unwrap();
    let d = topic_distance_matrix(&m);
    assert_eq!(d[0][1], 0.0);
    assert!((m.perplexity(&c) - 1.0).abs() < 1e-9);
}

#[test]
fn fewer_topics_are_further_apart() {
    let c = disjoint_corpus();
    let dist = |k| {
        let m = fit_lda(
            &c,
            &LdaParams {
                k,
                alpha: 0.5,
                beta: 0.01,
                iterations: 500,
                seed: 42,
            },
        )
        .unwrap();
        mean_pairwise_distance(&topic_distance_matrix(&m))
    };
    assert!(dist(2) > dist(6));
}

#[test]
fn counts_consistent_after_every_sweep() {
    let c = disjoint_corpus();
    let mut s = GibbsSampler::new(
        &c,
        LdaParams {
            k: 3,
            alpha: 0.1,
            beta: 0.01,
            iterations: 40,
            seed: 5,
        },
    )
    .unwrap();
    assert!(s.model().counts_consistent(&c));
    for _ in 0..40 {
        s.sweep();
        assert!(s.model().counts_consistent(&c));
    }
}

fn random_corpus() -> impl Strategy<Value = Vec<Vec<usize>>> {
    proptest::collection::vec(proptest::collection::vec(0usize..5, 3..8), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_corpora_match_oracle(docs in random_corpus(), k in 2usize..4, seed in 0u64..1000) {
        let texts: Vec<String> = docs
            .iter()
            .map(|d| d.iter().map(|w| format!("w{w}")).collect::<Vec<_>>().join(" "))
            .collect();
        let opts = PreprocessOptions { min_tokens: 1, max_tokens: 100 };
        let c = preprocess_corpus(&texts, &BTreeSet::new(), &opts).unwrap();
        let p = LdaParams { k, alpha: 0.3, beta: 0.05, iterations: 5, seed };
        let m = fit_lda(&c, &p).unwrap();
        let expected = oracle_assignments(&doc_tokens(&c), c.vocabulary_size(), k, 0.3, 0.05, 5, seed);
        prop_assert_eq!(&m.assignments, &expected);
        prop_assert!(m.counts_consistent(&c));
        let share: f64 = token_share(&m).iter().sum();
        prop_assert!((share - 1.0).abs() < 1e-9);
    }
}
