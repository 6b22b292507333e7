//! Stagewise least-squares gradient boosting over histogram trees.
//!
//! `F₀ = mean(y)`; stage `m` fits a tree to the residuals `y − F_{m−1}` and
//! adds `learning_rate ×` its leaf values. Leaf values are
//! `soft(Σr, λ₁) / (count + λ₂)`, which reduces to the residual mean when both
//! penalties are zero.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, BinnedMatrix, GrowParams, RegressionTree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// Split every splittable node down to `max_depth`.
    Depthwise,
    /// Best-gain-first expansion until `max_leaves` leaves exist.
    Leafwise { max_leaves: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub growth: Growth,
    pub min_samples_leaf: usize,
    pub lambda_l1: f64,
    pub lambda_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl BoostedModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let s = self.trees.iter().fold(0.0, |s, t| s + t.predict(x));
        self.base + self.learning_rate * s
    }

    pub fn staged_predict(&self, x: &[f64], checkpoints: &[usize], out: &mut [f64]) {
        let mut s = 0.0;
        let mut c = 0;
        while c < checkpoints.len() && checkpoints[c] == 0 {
            out[c] = self.base;
            c += 1;
        }
        for (i, t) in self.trees.iter().enumerate() {
            s += t.predict(x);
            while c < checkpoints.len() && checkpoints[c] == i + 1 {
                out[c] = self.base + self.learning_rate * s;
                c += 1;
            }
        }
    }

    pub fn truncate(&mut self, n: usize) {
        self.trees.truncate(n);
    }
}

/// Trains the model and reports the training MSE after every stage
/// (index 0 is the constant model).
pub fn train_with_history(data: &BinnedMatrix, y: &[f64], params: &GbtParams) -> (BoostedModel, Vec<f64>) {
    let n = data.n_rows();
    let base = if n == 0 { 0.0 } else { y.iter().sum::<f64>() / n as f64 };
    let grow = GrowParams {
        max_depth: params.max_depth,
        min_samples_split: 2 * params.min_samples_leaf.max(1),
        min_samples_leaf: params.min_samples_leaf,
        max_leaves: match params.growth {
            Growth::Depthwise => None,
            Growth::Leafwise { max_leaves } => Some(max_leaves),
        },
        max_features: None,
        lambda_l1: params.lambda_l1,
        lambda_l2: params.lambda_l2,
    };
    let lr = params.learning_rate;
    let mut fitted = vec![base; n];
    let mut residual: Vec<f64> = y.iter().map(|v| v - base).collect();
    let mse = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64;
    let mut history = vec![mse(&residual)];
    let mut trees = Vec::with_capacity(params.n_estimators);
    for _ in 0..params.n_estimators {
        let grown = grow_tree::<ChaCha8Rng>(data, &residual, (0..n as u32).collect(), &grow, None);
        for (rows, value) in &grown.leaves {
            let step = lr * value;
            for &r in rows {
                fitted[r as usize] += step;
            }
        }
        for ((r, f), v) in residual.iter_mut().zip(&fitted).zip(y) {
            *r = v - f;
        }
        history.push(mse(&residual));
        trees.push(grown.tree);
    }
    (
        BoostedModel {
            base,
            learning_rate: lr,
            trees,
        },
        history,
    )
}

pub fn train(data: &BinnedMatrix, y: &[f64], params: &GbtParams) -> BoostedModel {
    train_with_history(data, y, params).0
}
