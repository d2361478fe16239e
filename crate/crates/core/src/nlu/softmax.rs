//! Multinomial logistic regression over sparse inputs, trained by
//! full-batch gradient descent on mean cross-entropy plus an L2 penalty on
//! the weights (the bias is not penalized).
//!
//! Shared by the intent classifier and the TED-lite action ranker.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::featurizer::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 300,
            l2: 1e-4,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SoftmaxError {
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("training set is empty")]
    Empty,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxRegression {
    classes: usize,
    dimension: usize,
    /// Row-major `classes × dimension`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradient {
    /// Flattened in the same order as [`SoftmaxRegression::parameter`].
    pub fn flat(&self) -> Vec<f64> {
        self.weights.iter().chain(&self.bias).copied().collect()
    }
}

pub(crate) fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

impl SoftmaxRegression {
    /// Small uniform weights in `[-0.01, 0.01)` drawn from `seed`; zero bias.
    pub fn initialize(classes: usize, dimension: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..classes * dimension)
            .map(|_| rng.random_range(-0.01..0.01))
            .collect();
        Self {
            classes,
            dimension,
            weights,
            bias: vec![0.0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn scores(&self, x: &SparseVector) -> Vec<f64> {
        (0..self.classes)
            .map(|c| {
                let row = &self.weights[c * self.dimension..(c + 1) * self.dimension];
                x.entries()
                    .iter()
                    .filter(|&&(i, _)| i < self.dimension)
                    .map(|&(i, v)| row[i] * v)
                    .sum::<f64>()
                    + self.bias[c]
            })
            .collect()
    }

    pub fn probabilities(&self, x: &SparseVector) -> Vec<f64> {
        let mut s = self.scores(x);
        softmax_in_place(&mut s);
        s
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn parameter(&self, i: usize) -> f64 {
        if i < self.weights.len() {
            self.weights[i]
        } else {
            self.bias[i - self.weights.len()]
        }
    }

    pub fn set_parameter(&mut self, i: usize, value: f64) {
        if i < self.weights.len() {
            self.weights[i] = value;
        } else {
            let j = i - self.weights.len();
            self.bias[j] = value;
        }
    }

    fn penalty(&self, l2: f64) -> f64 {
        0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn loss(&self, data: &[(SparseVector, usize)], l2: f64) -> f64 {
        let n = data.len() as f64;
        let ce: f64 = data.iter().map(|(x, y)| -self.probabilities(x)[*y].ln()).sum();
        ce / n + self.penalty(l2)
    }

    pub fn loss_and_gradient(&self, data: &[(SparseVector, usize)], l2: f64) -> (f64, Gradient) {
        let n = data.len() as f64;
        let mut gw: Vec<f64> = self.weights.iter().map(|w| l2 * w).collect();
        let mut gb = vec![0.0; self.classes];
        let mut ce = 0.0;
        for (x, y) in data {
            let p = self.probabilities(x);
            ce -= p[*y].ln();
            for c in 0..self.classes {
                let delta = (p[c] - if c == *y { 1.0 } else { 0.0 }) / n;
                gb[c] += delta;
                let row = &mut gw[c * self.dimension..(c + 1) * self.dimension];
                for &(i, v) in x.entries() {
                    if i < self.dimension {
                        row[i] += delta * v;
                    }
                }
            }
        }
        (ce / n + self.penalty(l2), Gradient { weights: gw, bias: gb })
    }

    fn step(&mut self, g: &Gradient, lr: f64) {
        for (w, d) in self.weights.iter_mut().zip(&g.weights) {
            *w -= lr * d;
        }
        for (b, d) in self.bias.iter_mut().zip(&g.bias) {
            *b -= lr * d;
        }
    }
}

/// Trains from seeded initial weights; returns the model and the loss at the
/// final parameters.
pub fn train_softmax(
    data: &[(SparseVector, usize)],
    classes: usize,
    dimension: usize,
    params: &TrainParams,
) -> Result<(SoftmaxRegression, f64), SoftmaxError> {
    if data.is_empty() {
        return Err(SoftmaxError::Empty);
    }
    if let Some((_, y)) = data.iter().find(|(_, y)| *y >= classes) {
        return Err(SoftmaxError::LabelOutOfRange { label: *y, classes });
    }
    let mut model = SoftmaxRegression::initialize(classes, dimension, params.seed);
    for epoch in 0..params.epochs {
        let (loss, grad) = model.loss_and_gradient(data, params.l2);
        if !loss.is_finite() {
            return Err(SoftmaxError::NonFiniteLoss { epoch });
        }
        model.step(&grad, params.learning_rate);
    }
    let final_loss = model.loss(data, params.l2);
    if !final_loss.is_finite() {
        return Err(SoftmaxError::NonFiniteLoss { epoch: params.epochs });
    }
    Ok((model, final_loss))
}
