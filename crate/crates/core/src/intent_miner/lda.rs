//! Collapsed Gibbs sampling for LDA.
//!
//! Seed protocol (fixed, so runs are reproducible): a `ChaCha8Rng` seeded
//! with `seed` first draws every token's initial topic with
//! `random_range(0..k)` in document-then-token order. Each sweep then
//! visits tokens in the same order; for each token it removes the token from
//! the counts, forms the unnormalized weights
//! `(n_dk + alpha) * (n_kw + beta) / (n_k + V * beta)` for k = 0..K,
//! draws `u = random::<f64>() * Σ weights` and takes the first topic whose
//! running sum exceeds `u`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::preprocess::Corpus;
use super::MinerError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaParams {
    /// `alpha = 50 / K`, `beta = 0.01`, 1000 sweeps.
    pub fn with_defaults(k: usize, seed: u64) -> Self {
        Self {
            k,
            alpha: 50.0 / k as f64,
            beta: 0.01,
            iterations: 1000,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    /// `K × V`.
    pub topic_word_counts: Vec<Vec<u32>>,
    /// `D × K`.
    pub doc_topic_counts: Vec<Vec<u32>>,
    pub topic_totals: Vec<u32>,
    /// Per document, per token.
    pub assignments: Vec<Vec<usize>>,
    pub vocabulary: Vec<String>,
    pub seed: u64,
    pub iterations: usize,
}

/// Count matrices rebuilt from assignments alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RebuiltCounts {
    pub topic_word: Vec<Vec<u32>>,
    pub doc_topic: Vec<Vec<u32>>,
    pub topic_totals: Vec<u32>,
}

impl TopicModel {
    pub fn vocabulary_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn total_tokens(&self) -> usize {
        self.assignments.iter().map(Vec::len).sum()
    }

    /// Smoothed `p(w | k)`.
    pub fn topic_word_distribution(&self, topic: usize) -> Vec<f64> {
        let v = self.vocabulary_size() as f64;
        let denom = self.topic_totals[topic] as f64 + v * self.beta;
        self.topic_word_counts[topic]
            .iter()
            .map(|&c| (c as f64 + self.beta) / denom)
            .collect()
    }

    /// Smoothed `p(k | d)`.
    pub fn doc_topic_distribution(&self, doc: usize) -> Vec<f64> {
        let n = self.assignments[doc].len() as f64;
        let denom = n + self.k as f64 * self.alpha;
        self.doc_topic_counts[doc]
            .iter()
            .map(|&c| (c as f64 + self.alpha) / denom)
            .collect()
    }

    pub fn rebuild_counts(&self, corpus: &Corpus) -> RebuiltCounts {
        let v = self.vocabulary_size();
        let mut topic_word = vec![vec![0u32; v]; self.k];
        let mut doc_topic = vec![vec![0u32; self.k]; self.assignments.len()];
        let mut topic_totals = vec![0u32; self.k];
        for (d, doc) in corpus.docs.iter().enumerate() {
            for (&w, &z) in doc.tokens.iter().zip(&self.assignments[d]) {
                topic_word[z][w] += 1;
                doc_topic[d][z] += 1;
                topic_totals[z] += 1;
            }
        }
        RebuiltCounts {
            topic_word,
            doc_topic,
            topic_totals,
        }
    }

    /// Whether the stored count matrices agree exactly with the assignments.
    pub fn counts_consistent(&self, corpus: &Corpus) -> bool {
        let r = self.rebuild_counts(corpus);
        r.topic_word == self.topic_word_counts
            && r.doc_topic == self.doc_topic_counts
            && r.topic_totals == self.topic_totals
    }

    /// `exp(-Σ log p(w|d) / N)` with `p(w|d) = Σ_k θ_dk φ_kw`.
    pub fn perplexity(&self, corpus: &Corpus) -> f64 {
        let phi: Vec<Vec<f64>> = (0..self.k).map(|t| self.topic_word_distribution(t)).collect();
        let mut log_lik = 0.0;
        let mut n = 0usize;
        for (d, doc) in corpus.docs.iter().enumerate() {
            let theta = self.doc_topic_distribution(d);
            for &w in &doc.tokens {
                let p: f64 = (0..self.k).map(|t| theta[t] * phi[t][w]).sum();
                log_lik += p.ln();
                n += 1;
            }
        }
        (-log_lik / n as f64).exp()
    }
}

/// Sampler state; [`fit_lda`] runs it to completion.
pub struct GibbsSampler<'a> {
    corpus: &'a Corpus,
    params: LdaParams,
    rng: ChaCha8Rng,
    model: TopicModel,
    weights: Vec<f64>,
    sweeps: usize,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(corpus: &'a Corpus, params: LdaParams) -> Result<Self, MinerError> {
        if params.k < 2 {
            return Err(MinerError::InvalidTopicCount(params.k));
        }
        if params.iterations == 0 {
            return Err(MinerError::InvalidParameter("iterations must be at least 1".into()));
        }
        if !(params.alpha > 0.0 && params.beta > 0.0) {
            return Err(MinerError::InvalidParameter("alpha and beta must be positive".into()));
        }
        if corpus.docs.is_empty() {
            return Err(MinerError::EmptyCorpus);
        }
        let total = corpus.token_count();
        if params.k > total {
            return Err(MinerError::TooManyTopics {
                k: params.k,
                tokens: total,
            });
        }
        let k = params.k;
        let v = corpus.vocabulary_size();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut model = TopicModel {
            k,
            alpha: params.alpha,
            beta: params.beta,
            topic_word_counts: vec![vec![0; v]; k],
            doc_topic_counts: vec![vec![0; k]; corpus.docs.len()],
            topic_totals: vec![0; k],
            assignments: Vec::with_capacity(corpus.docs.len()),
            vocabulary: corpus.vocabulary.clone(),
            seed: params.seed,
            iterations: 0,
        };
        for (d, doc) in corpus.docs.iter().enumerate() {
            let mut z_doc = Vec::with_capacity(doc.tokens.len());
            for &w in &doc.tokens {
                let z = rng.random_range(0..k);
                model.topic_word_counts[z][w] += 1;
                model.doc_topic_counts[d][z] += 1;
                model.topic_totals[z] += 1;
                z_doc.push(z);
            }
            model.assignments.push(z_doc);
        }
        Ok(Self {
            corpus,
            params,
            rng,
            model,
            weights: vec![0.0; k],
            sweeps: 0,
        })
    }

    /// One full pass over every token.
    pub fn sweep(&mut self) {
        let k = self.params.k;
        let v_beta = self.corpus.vocabulary_size() as f64 * self.params.beta;
        let (alpha, beta) = (self.params.alpha, self.params.beta);
        let m = &mut self.model;
        for (d, doc) in self.corpus.docs.iter().enumerate() {
            for (i, &w) in doc.tokens.iter().enumerate() {
                let old = m.assignments[d][i];
                m.topic_word_counts[old][w] -= 1;
                m.doc_topic_counts[d][old] -= 1;
                m.topic_totals[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (m.doc_topic_counts[d][t] as f64 + alpha) * (m.topic_word_counts[t][w] as f64 + beta)
                        / (m.topic_totals[t] as f64 + v_beta);
                    total += p;
                    self.weights[t] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.weights.iter().position(|&c| u < c).unwrap_or(k - 1);

                m.assignments[d][i] = new;
                m.topic_word_counts[new][w] += 1;
                m.doc_topic_counts[d][new] += 1;
                m.topic_totals[new] += 1;
            }
        }
        self.sweeps += 1;
        m.iterations = self.sweeps;
    }

    pub fn model(&self) -> &TopicModel {
        &self.model
    }

    pub fn into_model(self) -> TopicModel {
        self.model
    }
}

pub fn fit_lda(corpus: &Corpus, params: &LdaParams) -> Result<TopicModel, MinerError> {
    let mut sampler = GibbsSampler::new(corpus, *params)?;
    for _ in 0..params.iterations {
        sampler.sweep();
    }
    Ok(sampler.into_model())
}
