//! Regression models with a shared train/predict interface.
//!
//! Five families are available: elastic net, CART, random forest and two
//! boosting flavours (leafwise with a leaf cap, depthwise). Every tree model
//! is grown by the histogram engine in [`tree`].

pub mod boost;
pub mod elastic_net;
pub mod forest;
pub mod tree;

mod bank;
mod grid;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::features::Target;
use crate::{Error, Result};

pub use bank::{train_bank, BankConfig, BankEntry, LeadTimeModelBank};
pub use boost::{BoostedModel, GbtParams, Growth};
pub use elastic_net::{Design, ElasticNetModel};
pub use forest::{ForestParams, MaxFeatures, RandomForest};
pub use grid::{grid_search, search, table_grid, GridScore, Metric, SearchResult};
pub use tree::{BinnedMatrix, RegressionTree, DEFAULT_MAX_BINS};

/// Forests use single-sample leaves; only `min_samples_split` is searched.
pub const FOREST_MIN_SAMPLES_LEAF: usize = 1;
/// The leafwise grid does not search the number of stages.
pub const LEAFWISE_N_ESTIMATORS: usize = 100;
pub const LEAFWISE_MIN_SAMPLES_LEAF: usize = 20;
pub const DEPTHWISE_MIN_SAMPLES_LEAF: usize = 1;
pub const DEPTHWISE_LAMBDA_L2: f64 = 1.0;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_cols,
                actual: data.len(),
            });
        }
        Ok(Matrix {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * p);
        for r in rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), p, data)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn select_rows(&self, idx: impl IntoIterator<Item = usize>) -> Matrix {
        let mut data = Vec::new();
        let mut n = 0;
        for i in idx {
            data.extend_from_slice(self.row(i));
            n += 1;
        }
        Matrix {
            n_rows: n,
            n_cols: self.n_cols,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ElasticNet,
    DecisionTree,
    RandomForest,
    /// LightGBM-style: leafwise growth with a leaf cap and L1 leaf penalty.
    GbtLeafwise,
    /// XGBoost-style: depthwise growth with an L2 leaf penalty.
    GbtDepthwise,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::ElasticNet,
        Family::DecisionTree,
        Family::RandomForest,
        Family::GbtLeafwise,
        Family::GbtDepthwise,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::ElasticNet => "elastic_net",
            Family::DecisionTree => "decision_tree",
            Family::RandomForest => "random_forest",
            Family::GbtLeafwise => "gbt_leafwise",
            Family::GbtDepthwise => "gbt_depthwise",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model family `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hyperparameters {
    ElasticNet {
        alpha: f64,
        l1_ratio: f64,
    },
    DecisionTree {
        max_depth: usize,
        min_samples_split: usize,
        min_samples_leaf: usize,
    },
    RandomForest {
        bootstrap: bool,
        n_estimators: usize,
        max_depth: usize,
        min_samples_split: usize,
    },
    GbtLeafwise {
        num_leaves: usize,
        max_depth: usize,
        learning_rate: f64,
        lambda_l1: f64,
    },
    GbtDepthwise {
        n_estimators: usize,
        max_depth: usize,
        learning_rate: f64,
    },
}

impl Hyperparameters {
    pub fn family(&self) -> Family {
        match self {
            Hyperparameters::ElasticNet { .. } => Family::ElasticNet,
            Hyperparameters::DecisionTree { .. } => Family::DecisionTree,
            Hyperparameters::RandomForest { .. } => Family::RandomForest,
            Hyperparameters::GbtLeafwise { .. } => Family::GbtLeafwise,
            Hyperparameters::GbtDepthwise { .. } => Family::GbtDepthwise,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let depth = |d: usize| {
            if d == 0 {
                Err(Error::invalid("max_depth must be ≥ 1"))
            } else {
                Ok(())
            }
        };
        let at_least = |name: &str, v: usize, min: usize| {
            if v < min {
                Err(Error::invalid(format!("{name} must be ≥ {min}, got {v}")))
            } else {
                Ok(())
            }
        };
        let rate = |lr: f64| {
            if lr.is_finite() && lr >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("learning_rate must be ≥ 0, got {lr}")))
            }
        };
        match *self {
            Hyperparameters::ElasticNet { alpha, l1_ratio } => {
                if !(alpha.is_finite() && alpha >= 0.0) {
                    return Err(Error::invalid(format!("alpha must be ≥ 0, got {alpha}")));
                }
                if !(0.0..=1.0).contains(&l1_ratio) {
                    return Err(Error::invalid(format!(
                        "l1_ratio must lie in [0, 1], got {l1_ratio}"
                    )));
                }
                Ok(())
            }
            Hyperparameters::DecisionTree {
                max_depth,
                min_samples_split,
                min_samples_leaf,
            } => {
                depth(max_depth)?;
                at_least("min_samples_split", min_samples_split, 2)?;
                at_least("min_samples_leaf", min_samples_leaf, 1)
            }
            Hyperparameters::RandomForest {
                n_estimators,
                max_depth,
                min_samples_split,
                ..
            } => {
                depth(max_depth)?;
                at_least("n_estimators", n_estimators, 1)?;
                at_least("min_samples_split", min_samples_split, 2)
            }
            Hyperparameters::GbtLeafwise {
                num_leaves,
                max_depth,
                learning_rate,
                lambda_l1,
            } => {
                depth(max_depth)?;
                at_least("num_leaves", num_leaves, 2)?;
                rate(learning_rate)?;
                if !(lambda_l1.is_finite() && lambda_l1 >= 0.0) {
                    return Err(Error::invalid(format!("lambda_l1 must be ≥ 0, got {lambda_l1}")));
                }
                Ok(())
            }
            Hyperparameters::GbtDepthwise {
                n_estimators,
                max_depth,
                learning_rate,
            } => {
                depth(max_depth)?;
                at_least("n_estimators", n_estimators, 1)?;
                rate(learning_rate)
            }
        }
    }

    /// Number of trees, for the families whose models are additive in trees.
    pub fn n_estimators(&self) -> Option<usize> {
        match *self {
            Hyperparameters::RandomForest { n_estimators, .. }
            | Hyperparameters::GbtDepthwise { n_estimators, .. } => Some(n_estimators),
            Hyperparameters::GbtLeafwise { .. } => Some(LEAFWISE_N_ESTIMATORS),
            _ => None,
        }
    }

    pub(crate) fn with_n_estimators(&self, n: usize) -> Hyperparameters {
        let mut h = self.clone();
        match &mut h {
            Hyperparameters::RandomForest { n_estimators, .. }
            | Hyperparameters::GbtDepthwise { n_estimators, .. } => *n_estimators = n,
            _ => {}
        }
        h
    }

    /// Settings that produce the same trained trees up to the number of
    /// stages compare equal here.
    pub(crate) fn training_key(&self) -> Hyperparameters {
        let mut h = self.with_n_estimators(0);
        if let Hyperparameters::GbtLeafwise {
            num_leaves,
            max_depth,
            ..
        } = &mut h
        {
            let cap = 1usize.checked_shl(*max_depth as u32).unwrap_or(usize::MAX);
            *num_leaves = (*num_leaves).min(cap);
        }
        h
    }

    /// Whether this point belongs to the standard search grid.
    pub fn in_table_grid(&self) -> bool {
        table_grid(self.family()).contains(self)
    }

    pub fn forest_params(&self) -> Option<ForestParams> {
        match *self {
            Hyperparameters::RandomForest {
                bootstrap,
                n_estimators,
                max_depth,
                min_samples_split,
            } => Some(ForestParams {
                n_estimators,
                max_depth,
                min_samples_split,
                min_samples_leaf: FOREST_MIN_SAMPLES_LEAF,
                bootstrap,
                max_features: MaxFeatures::Sqrt,
            }),
            _ => None,
        }
    }

    pub fn gbt_params(&self) -> Option<GbtParams> {
        match *self {
            Hyperparameters::GbtLeafwise {
                num_leaves,
                max_depth,
                learning_rate,
                lambda_l1,
            } => Some(GbtParams {
                n_estimators: LEAFWISE_N_ESTIMATORS,
                max_depth,
                learning_rate,
                growth: Growth::Leafwise {
                    max_leaves: num_leaves,
                },
                min_samples_leaf: LEAFWISE_MIN_SAMPLES_LEAF,
                lambda_l1,
                lambda_l2: 0.0,
            }),
            Hyperparameters::GbtDepthwise {
                n_estimators,
                max_depth,
                learning_rate,
            } => Some(GbtParams {
                n_estimators,
                max_depth,
                learning_rate,
                growth: Growth::Depthwise,
                min_samples_leaf: DEPTHWISE_MIN_SAMPLES_LEAF,
                lambda_l1: 0.0,
                lambda_l2: DEPTHWISE_LAMBDA_L2,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub family: Family,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
}

impl RegressorSpec {
    pub fn new(hyperparameters: Hyperparameters, seed: u64) -> Result<Self> {
        hyperparameters.validate()?;
        Ok(RegressorSpec {
            family: hyperparameters.family(),
            hyperparameters,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    ElasticNet(ElasticNetModel),
    Tree(RegressionTree),
    Forest(RandomForest),
    Boosted(BoostedModel),
}

impl Model {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Model::ElasticNet(m) => m.predict(x),
            Model::Tree(t) => t.predict(x),
            Model::Forest(f) => f.predict(x),
            Model::Boosted(b) => b.predict(x),
        }
    }

    /// Predictions of the model truncated to each checkpoint tree count
    /// (ascending); non-additive models repeat their single prediction.
    pub(crate) fn staged_predict(&self, x: &[f64], checkpoints: &[usize], out: &mut [f64]) {
        match self {
            Model::Forest(f) => f.staged_predict(x, checkpoints, out),
            Model::Boosted(b) => b.staged_predict(x, checkpoints, out),
            _ => out.fill(self.predict(x)),
        }
    }

    pub(crate) fn truncate(&mut self, n: usize) {
        match self {
            Model::Forest(f) => f.truncate(n),
            Model::Boosted(b) => b.truncate(n),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedRegressor {
    pub spec: RegressorSpec,
    pub feature_count: usize,
    pub rows_used: usize,
    /// Clamp predictions at zero (wind speed).
    pub nonnegative: bool,
    pub model: Model,
}

impl TrainedRegressor {
    pub fn family(&self) -> Family {
        self.spec.family
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_count {
            return Err(Error::DimensionMismatch {
                expected: self.feature_count,
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prediction input"));
        }
        Ok(self.finish(self.model.predict(x)))
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.rows().map(|r| self.predict(r)).collect()
    }

    pub(crate) fn finish(&self, v: f64) -> f64 {
        if self.nonnegative {
            v.max(0.0)
        } else {
            v
        }
    }

    pub fn with_nonnegative(mut self, nonnegative: bool) -> Self {
        self.nonnegative = nonnegative;
        self
    }
}

/// A training matrix with lazily built, shareable derived forms.
#[derive(Debug)]
pub struct Prepared {
    x: Matrix,
    max_bins: usize,
    binned: OnceLock<BinnedMatrix>,
    design: OnceLock<Design>,
}

impl Prepared {
    pub fn new(x: Matrix) -> Result<Self> {
        Prepared::with_max_bins(x, DEFAULT_MAX_BINS)
    }

    pub fn with_max_bins(x: Matrix, max_bins: usize) -> Result<Self> {
        if x.n_rows() == 0 {
            return Err(Error::Empty("training rows"));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("training features"));
        }
        Ok(Prepared {
            x,
            max_bins,
            binned: OnceLock::new(),
            design: OnceLock::new(),
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.x
    }

    pub fn binned(&self) -> &BinnedMatrix {
        self.binned
            .get_or_init(|| BinnedMatrix::new(&self.x, self.max_bins))
    }

    pub fn design(&self) -> &Design {
        self.design
            .get_or_init(|| Design::new(&self.x).expect("validated in Prepared::new"))
    }
}

fn check_targets(prepared: &Prepared, y: &[f64]) -> Result<()> {
    if y.len() != prepared.x.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: prepared.x.n_rows(),
            actual: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training targets"));
    }
    Ok(())
}

/// Trains `spec` on prepared data.
pub fn train_prepared(spec: &RegressorSpec, prepared: &Prepared, y: &[f64]) -> Result<TrainedRegressor> {
    spec.hyperparameters.validate()?;
    check_targets(prepared, y)?;
    let n = y.len();
    let model = match spec.hyperparameters {
        Hyperparameters::ElasticNet { alpha, l1_ratio } => {
            Model::ElasticNet(elastic_net::fit(prepared.design(), y, alpha, l1_ratio)?)
        }
        Hyperparameters::DecisionTree {
            max_depth,
            min_samples_split,
            min_samples_leaf,
        } => {
            let params = tree::GrowParams::cart(max_depth, min_samples_split, min_samples_leaf);
            let grown = tree::grow_tree::<rand_chacha::ChaCha8Rng>(
                prepared.binned(),
                y,
                (0..n as u32).collect(),
                &params,
                None,
            );
            Model::Tree(grown.tree)
        }
        Hyperparameters::RandomForest { .. } => {
            let params = spec.hyperparameters.forest_params().expect("forest");
            Model::Forest(forest::train(prepared.binned(), y, &params, spec.seed))
        }
        Hyperparameters::GbtLeafwise { .. } | Hyperparameters::GbtDepthwise { .. } => {
            let params = spec.hyperparameters.gbt_params().expect("boosting");
            Model::Boosted(boost::train(prepared.binned(), y, &params))
        }
    };
    Ok(TrainedRegressor {
        spec: spec.clone(),
        feature_count: prepared.x.n_cols(),
        rows_used: n,
        nonnegative: false,
        model,
    })
}

pub fn train(spec: &RegressorSpec, x: &Matrix, y: &[f64]) -> Result<TrainedRegressor> {
    spec.hyperparameters.validate()?;
    train_prepared(spec, &Prepared::new(x.clone())?, y)
}

pub fn train_elastic_net(x: &Matrix, y: &[f64], alpha: f64, l1_ratio: f64) -> Result<TrainedRegressor> {
    train(
        &RegressorSpec::new(Hyperparameters::ElasticNet { alpha, l1_ratio }, 0)?,
        x,
        y,
    )
}

pub fn train_cart(
    x: &Matrix,
    y: &[f64],
    max_depth: usize,
    min_samples_split: usize,
    min_samples_leaf: usize,
) -> Result<TrainedRegressor> {
    train(
        &RegressorSpec::new(
            Hyperparameters::DecisionTree {
                max_depth,
                min_samples_split,
                min_samples_leaf,
            },
            0,
        )?,
        x,
        y,
    )
}

/// Forest with explicit control over the fixed knobs (leaf size, feature
/// subsampling) that the hyperparameter grid leaves out.
pub fn train_forest(x: &Matrix, y: &[f64], params: &ForestParams, seed: u64) -> Result<TrainedRegressor> {
    let spec = RegressorSpec::new(
        Hyperparameters::RandomForest {
            bootstrap: params.bootstrap,
            n_estimators: params.n_estimators,
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
        },
        seed,
    )?;
    let prepared = Prepared::new(x.clone())?;
    check_targets(&prepared, y)?;
    let model = Model::Forest(forest::train(prepared.binned(), y, params, seed));
    Ok(TrainedRegressor {
        spec,
        feature_count: x.n_cols(),
        rows_used: y.len(),
        nonnegative: false,
        model,
    })
}

/// Boosting with explicit growth policy and leaf penalties.
pub fn train_gbt(x: &Matrix, y: &[f64], params: &GbtParams) -> Result<TrainedRegressor> {
    let hp = match params.growth {
        Growth::Depthwise => Hyperparameters::GbtDepthwise {
            n_estimators: params.n_estimators.max(1),
            max_depth: params.max_depth,
            learning_rate: params.learning_rate,
        },
        Growth::Leafwise { max_leaves } => Hyperparameters::GbtLeafwise {
            num_leaves: max_leaves,
            max_depth: params.max_depth,
            learning_rate: params.learning_rate,
            lambda_l1: params.lambda_l1,
        },
    };
    let spec = RegressorSpec::new(hp, 0)?;
    let prepared = Prepared::new(x.clone())?;
    check_targets(&prepared, y)?;
    let model = Model::Boosted(boost::train(prepared.binned(), y, params));
    Ok(TrainedRegressor {
        spec,
        feature_count: x.n_cols(),
        rows_used: y.len(),
        nonnegative: false,
        model,
    })
}

pub(crate) fn target_is_nonnegative(target: Target) -> bool {
    target == Target::Speed
}
