use serde::{Deserialize, Serialize};

use super::lda::{fit_lda, LdaParams, TopicModel};
use super::preprocess::Corpus;
use super::MinerError;

/// Terms ranked by `count + beta` (descending), ties lexicographic.
/// `n` larger than the vocabulary returns every term.
pub fn top_terms(model: &TopicModel, topic: usize, n: usize) -> Result<Vec<String>, MinerError> {
    if topic >= model.k {
        return Err(MinerError::TopicOutOfRange { topic, k: model.k });
    }
    let counts = &model.topic_word_counts[topic];
    let mut order: Vec<usize> = (0..model.vocabulary_size()).collect();
    order.sort_by(|&a, &b| {
        let wa = counts[a] as f64 + model.beta;
        let wb = counts[b] as f64 + model.beta;
        wb.total_cmp(&wa)
            .then_with(|| model.vocabulary[a].cmp(&model.vocabulary[b]))
    });
    Ok(order.into_iter().take(n).map(|i| model.vocabulary[i].clone()).collect())
}

/// Fraction of all tokens assigned to each topic.
pub fn token_share(model: &TopicModel) -> Vec<f64> {
    let total: u64 = model.topic_totals.iter().map(|&c| c as u64).sum();
    if total == 0 {
        return vec![0.0; model.k];
    }
    model.topic_totals.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Jensen–Shannon divergence in bits; lies in `[0, 1]`.
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut js = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            js += 0.5 * a * (a / m).log2();
        }
        if b > 0.0 {
            js += 0.5 * b * (b / m).log2();
        }
    }
    js.clamp(0.0, 1.0)
}

/// Pairwise JS divergence between smoothed topic-word distributions.
pub fn topic_distance_matrix(model: &TopicModel) -> Vec<Vec<f64>> {
    let dists: Vec<Vec<f64>> = (0..model.k).map(|t| model.topic_word_distribution(t)).collect();
    let mut out = vec![vec![0.0; model.k]; model.k];
    for i in 0..model.k {
        for j in (i + 1)..model.k {
            let d = js_divergence(&dists[i], &dists[j]);
            out[i][j] = d;
            out[j][i] = d;
        }
    }
    out
}

/// Mean of the strictly upper triangle; 0 for a single topic.
pub fn mean_pairwise_distance(matrix: &[Vec<f64>]) -> f64 {
    let k = matrix.len();
    if k < 2 {
        return 0.0;
    }
    let sum: f64 = matrix
        .iter()
        .enumerate()
        .map(|(i, row)| row[i + 1..].iter().sum::<f64>())
        .sum();
    sum / (k * (k - 1) / 2) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub topic: usize,
    pub top_terms: Vec<String>,
    pub token_share: f64,
}

pub fn summarize(model: &TopicModel, n_terms: usize) -> Vec<TopicSummary> {
    let shares = token_share(model);
    (0..model.k)
        .map(|t| TopicSummary {
            topic: t,
            top_terms: top_terms(model, t, n_terms).expect("topic in range"),
            token_share: shares[t],
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum AlphaRule {
    Fixed(f64),
    /// `alpha = c / K`.
    OverK(f64),
}

impl Default for AlphaRule {
    fn default() -> Self {
        AlphaRule::OverK(50.0)
    }
}

impl AlphaRule {
    pub fn alpha(&self, k: usize) -> f64 {
        match *self {
            AlphaRule::Fixed(a) => a,
            AlphaRule::OverK(c) => c / k as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub alpha: AlphaRule,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub n_terms: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            alpha: AlphaRule::default(),
            beta: 0.01,
            iterations: 1000,
            seed: 42,
            n_terms: 10,
        }
    }
}

impl SweepSettings {
    /// Each K gets its own seed, `seed + K`.
    pub fn params_for(&self, k: usize) -> LdaParams {
        LdaParams {
            k,
            alpha: self.alpha.alpha(k),
            beta: self.beta,
            iterations: self.iterations,
            seed: self.seed.wrapping_add(k as u64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepEntry {
    pub k: usize,
    pub alpha: f64,
    pub seed: u64,
    pub topics: Vec<TopicSummary>,
    pub mean_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepReport {
    pub beta: f64,
    pub iterations: usize,
    pub entries: Vec<KSweepEntry>,
}

/// Fits one model per K (concurrently) and reports topic summaries plus the
/// mean pairwise topic distance. Entries come back in ascending K order.
pub fn sweep_k(corpus: &Corpus, ks: &[usize], settings: &SweepSettings) -> Result<KSweepReport, MinerError> {
    if ks.is_empty() {
        return Err(MinerError::InvalidParameter("no K values given".into()));
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();

    let results: Vec<Result<KSweepEntry, MinerError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ks
            .iter()
            .map(|&k| {
                scope.spawn(move || {
                    let params = settings.params_for(k);
                    let model = fit_lda(corpus, &params)?;
                    Ok(KSweepEntry {
                        k,
                        alpha: params.alpha,
                        seed: params.seed,
                        topics: summarize(&model, settings.n_terms),
                        mean_distance: mean_pairwise_distance(&topic_distance_matrix(&model)),
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    Ok(KSweepReport {
        beta: settings.beta,
        iterations: settings.iterations,
        entries: results.into_iter().collect::<Result<_, _>>()?,
    })
}
