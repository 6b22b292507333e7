//! Hyperparameter grids and validation-set search.

use serde::{Deserialize, Serialize};

use super::{train_prepared, Family, Hyperparameters, Matrix, Prepared, RegressorSpec, TrainedRegressor};
use crate::features::{Dataset, Target};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Mae,
    Mse,
}

impl Metric {
    pub fn score(self, predicted: &[f64], actual: &[f64]) -> f64 {
        let n = actual.len().max(1) as f64;
        let it = predicted.iter().zip(actual);
        match self {
            Metric::Mae => it.map(|(p, a)| (p - a).abs()).sum::<f64>() / n,
            Metric::Mse => it.map(|(p, a)| (p - a).powi(2)).sum::<f64>() / n,
        }
    }
}

/// The standard search grid for a family, in enumeration order.
pub fn table_grid(family: Family) -> Vec<Hyperparameters> {
    let mut g = Vec::new();
    match family {
        Family::ElasticNet => {
            for alpha in [0.2, 0.4, 0.6, 0.8, 1.0] {
                for l1_ratio in [0.5, 0.7] {
                    g.push(Hyperparameters::ElasticNet { alpha, l1_ratio });
                }
            }
        }
        Family::DecisionTree => {
            for max_depth in 5..=10 {
                for min_samples_split in [3, 5, 7] {
                    for min_samples_leaf in [4, 6] {
                        g.push(Hyperparameters::DecisionTree {
                            max_depth,
                            min_samples_split,
                            min_samples_leaf,
                        });
                    }
                }
            }
        }
        Family::RandomForest => {
            for bootstrap in [true, false] {
                for n_estimators in [100, 150] {
                    for max_depth in [5, 6] {
                        for min_samples_split in [4, 6] {
                            g.push(Hyperparameters::RandomForest {
                                bootstrap,
                                n_estimators,
                                max_depth,
                                min_samples_split,
                            });
                        }
                    }
                }
            }
        }
        Family::GbtLeafwise => {
            for num_leaves in [31, 60] {
                for max_depth in [4, 6] {
                    for learning_rate in [0.1, 0.3] {
                        for lambda_l1 in [0.0, 1.0] {
                            g.push(Hyperparameters::GbtLeafwise {
                                num_leaves,
                                max_depth,
                                learning_rate,
                                lambda_l1,
                            });
                        }
                    }
                }
            }
        }
        Family::GbtDepthwise => {
            for n_estimators in [100, 150] {
                for max_depth in [4, 6] {
                    for learning_rate in [0.1, 0.3] {
                        g.push(Hyperparameters::GbtDepthwise {
                            n_estimators,
                            max_depth,
                            learning_rate,
                        });
                    }
                }
            }
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub hyperparameters: Hyperparameters,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best: RegressorSpec,
    pub model: TrainedRegressor,
    /// Validation score of every grid point, in grid order.
    pub scores: Vec<GridScore>,
}

impl SearchResult {
    pub fn best_score(&self) -> f64 {
        self.scores
            .iter()
            .find(|s| s.hyperparameters == self.best.hyperparameters)
            .map_or(f64::NAN, |s| s.score)
    }
}

/// Trains every grid point on `train`, scores it on the validation rows and
/// returns the argmin (first in grid order on ties).
///
/// Points that differ only in the number of trees share one fit: the model
/// is trained with the largest count and evaluated at each prefix. Leafwise
/// points whose leaf cap exceeds what the depth allows are fitted once.
pub fn search(
    grid: &[Hyperparameters],
    train: &Prepared,
    y_train: &[f64],
    validation: &Matrix,
    y_validation: &[f64],
    nonnegative: bool,
    metric: Metric,
    seed: u64,
) -> Result<SearchResult> {
    if grid.is_empty() {
        return Err(Error::Empty("hyperparameter grid"));
    }
    if validation.n_rows() == 0 || validation.n_rows() != y_validation.len() {
        return Err(Error::invalid(format!(
            "validation set has {} rows and {} targets",
            validation.n_rows(),
            y_validation.len()
        )));
    }
    if validation.n_cols() != train.matrix().n_cols() {
        return Err(Error::DimensionMismatch {
            expected: train.matrix().n_cols(),
            actual: validation.n_cols(),
        });
    }
    for h in grid {
        h.validate()?;
    }

    // group grid points by the fit they need
    let mut groups: Vec<(Hyperparameters, Vec<usize>)> = Vec::new();
    for (i, h) in grid.iter().enumerate() {
        let key = h.training_key();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(i),
            None => groups.push((key, vec![i])),
        }
    }

    let mut scores = vec![f64::NAN; grid.len()];
    let mut best: Option<(usize, TrainedRegressor)> = None;
    let mut buf = Vec::new();
    for (_, members) in &groups {
        let counts: Vec<usize> = members
            .iter()
            .map(|&i| grid[i].n_estimators().unwrap_or(0))
            .collect();
        let max_n = counts.iter().copied().max().unwrap_or(0);
        let lead = &grid[members[0]];
        let hp = if lead.n_estimators().is_some() {
            lead.with_n_estimators(max_n)
        } else {
            lead.clone()
        };
        let spec = RegressorSpec::new(hp, seed)?;
        let model = train_prepared(&spec, train, y_train)?.with_nonnegative(nonnegative);

        let mut checkpoints = counts.clone();
        checkpoints.sort_unstable();
        checkpoints.dedup();
        let mut preds = vec![Vec::with_capacity(validation.n_rows()); checkpoints.len()];
        buf.resize(checkpoints.len(), 0.0);
        for row in validation.rows() {
            model.model.staged_predict(row, &checkpoints, &mut buf);
            for (p, &v) in preds.iter_mut().zip(&buf) {
                p.push(model.finish(v));
            }
        }
        for (&i, &c) in members.iter().zip(&counts) {
            let k = checkpoints.binary_search(&c).expect("checkpoint present");
            scores[i] = metric.score(&preds[k], y_validation);
        }
        let group_best = members
            .iter()
            .copied()
            .fold(None::<usize>, |acc, i| match acc {
                Some(a) if scores[a] <= scores[i] => Some(a),
                _ => Some(i),
            })
            .expect("non-empty group");
        let better = match &best {
            None => true,
            Some((b, _)) => {
                scores[group_best] < scores[*b] || (scores[group_best] == scores[*b] && group_best < *b)
            }
        };
        if better {
            best = Some((group_best, model));
        }
    }

    let (idx, mut model) = best.expect("non-empty grid");
    let chosen = grid[idx].clone();
    if let Some(n) = chosen.n_estimators() {
        model.model.truncate(n);
    }
    model.spec = RegressorSpec::new(chosen, seed)?;
    Ok(SearchResult {
        best: model.spec.clone(),
        model,
        scores: grid
            .iter()
            .zip(scores)
            .map(|(h, score)| GridScore {
                hyperparameters: h.clone(),
                score,
            })
            .collect(),
    })
}

/// Searches the standard grid of `family` for one target.
pub fn grid_search(
    family: Family,
    train: &Dataset,
    validation: &Dataset,
    target: Target,
    metric: Metric,
    seed: u64,
) -> Result<(RegressorSpec, TrainedRegressor)> {
    if train.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    let prepared = Prepared::new(train.matrix())?;
    let r = search(
        &table_grid(family),
        &prepared,
        &train.targets(target),
        &validation.matrix(),
        &validation.targets(target),
        super::target_is_nonnegative(target),
        metric,
        seed,
    )?;
    Ok((r.best, r.model))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(table_grid(Family::ElasticNet).len(), 10);
        assert_eq!(table_grid(Family::DecisionTree).len(), 36);
        assert_eq!(table_grid(Family::RandomForest).len(), 16);
        assert_eq!(table_grid(Family::GbtLeafwise).len(), 16);
        assert_eq!(table_grid(Family::GbtDepthwise).len(), 8);
        for f in Family::ALL {
            assert!(table_grid(f).iter().all(|h| h.family() == f && h.validate().is_ok()));
        }
    }

    #[test]
    fn metric_values() {
        assert_eq!(Metric::Mae.score(&[1.0, 2.0], &[0.0, 4.0]), 1.5);
        assert_eq!(Metric::Mse.score(&[1.0, 2.0], &[0.0, 4.0]), 2.5);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let x = Matrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        let p = Prepared::new(x.clone()).unwrap();
        assert!(matches!(
            search(&[], &p, &[0.0, 1.0], &x, &[0.0, 1.0], false, Metric::Mae, 0),
            Err(Error::Empty(_))
        ));
    }
}
