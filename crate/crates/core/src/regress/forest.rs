//! Random forest: bagged CART trees with per-split feature subsampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, BinnedMatrix, GrowParams, RegressionTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// ⌈√p⌉ candidates per split.
    Sqrt,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<RegressionTree>,
}

impl RandomForest {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let s = self.trees.iter().fold(0.0, |s, t| s + t.predict(x));
        s / self.trees.len() as f64
    }

    /// Mean of the first `k` trees at each checkpoint.
    pub fn staged_predict(&self, x: &[f64], checkpoints: &[usize], out: &mut [f64]) {
        let mut s = 0.0;
        let mut c = 0;
        for (i, t) in self.trees.iter().enumerate() {
            s += t.predict(x);
            while c < checkpoints.len() && checkpoints[c] == i + 1 {
                out[c] = s / (i + 1) as f64;
                c += 1;
            }
        }
    }

    pub fn truncate(&mut self, n: usize) {
        self.trees.truncate(n);
    }
}

/// RNG for tree `index`; independent of how many trees are grown, so a
/// forest's first `k` trees equal a `k`-tree forest with the same seed.
fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn train(data: &BinnedMatrix, y: &[f64], params: &ForestParams, seed: u64) -> RandomForest {
    let n = data.n_rows();
    let p = data.n_cols();
    let k = match params.max_features {
        MaxFeatures::Sqrt => (p as f64).sqrt().ceil() as usize,
        MaxFeatures::All => p,
    };
    let grow = GrowParams {
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        min_samples_leaf: params.min_samples_leaf,
        max_leaves: None,
        max_features: (k < p).then_some(k),
        lambda_l1: 0.0,
        lambda_l2: 0.0,
    };
    let trees = (0..params.n_estimators)
        .map(|i| {
            let mut rng = tree_rng(seed, i);
            let rows: Vec<u32> = if params.bootstrap {
                let mut r: Vec<u32> = (0..n).map(|_| rng.random_range(0..n) as u32).collect();
                r.sort_unstable();
                r
            } else {
                (0..n as u32).collect()
            };
            grow_tree(data, y, rows, &grow, Some(&mut rng)).tree
        })
        .collect();
    RandomForest { trees }
}
