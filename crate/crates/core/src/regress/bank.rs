//! One grid-searched model per (lead time, target) for a family.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{search, table_grid, target_is_nonnegative, Family, Hyperparameters, Metric, Prepared, TrainedRegressor};
use crate::features::{Splits, Target};
use crate::ingest::decode_direction;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub lead_time: u32,
    pub target: Target,
    pub validation_score: f64,
    pub model: TrainedRegressor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadTimeModelBank {
    pub family: Family,
    pub metric: Metric,
    /// Sorted by (lead_time, target).
    pub entries: Vec<BankEntry>,
}

impl LeadTimeModelBank {
    pub fn lead_times(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.entries.iter().map(|e| e.lead_time).collect();
        v.dedup();
        v
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, lead_time: u32, target: Target) -> Option<&TrainedRegressor> {
        self.entries
            .binary_search_by(|e| (e.lead_time, e.target).cmp(&(lead_time, target)))
            .ok()
            .map(|i| &self.entries[i].model)
    }

    pub fn predict(&self, lead_time: u32, target: Target, x: &[f64]) -> Result<f64> {
        self.get(lead_time, target)
            .ok_or_else(|| Error::MissingLead {
                lead: lead_time,
                detail: format!("{} bank has no {} model", self.family, target.name()),
            })?
            .predict(x)
    }

    /// Speed, cos and sin predictions for one feature row.
    pub fn predict_all(&self, lead_time: u32, x: &[f64]) -> Result<[f64; 3]> {
        Ok([
            self.predict(lead_time, Target::Speed, x)?,
            self.predict(lead_time, Target::DirCos, x)?,
            self.predict(lead_time, Target::DirSin, x)?,
        ])
    }

    /// Folds another bank of the same family in; entries for a lead time
    /// already present are replaced.
    pub fn merge(&mut self, other: LeadTimeModelBank) -> Result<()> {
        if other.family != self.family {
            return Err(Error::invalid(format!(
                "cannot merge a {} bank into a {} bank",
                other.family, self.family
            )));
        }
        let incoming = other.lead_times();
        self.entries.retain(|e| !incoming.contains(&e.lead_time));
        self.entries.extend(other.entries);
        self.entries.sort_by_key(|e| (e.lead_time, e.target));
        Ok(())
    }

    /// Predicted (speed, direction in degrees).
    pub fn predict_wind(&self, lead_time: u32, x: &[f64]) -> Result<(f64, f64)> {
        let [s, c, si] = self.predict_all(lead_time, x)?;
        Ok((s, decode_direction(c, si)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankConfig {
    pub metric: Metric,
    pub seed: u64,
    /// Replaces the standard grid (for quick runs).
    pub grid: Option<Vec<Hyperparameters>>,
    pub max_bins: usize,
}

impl Default for BankConfig {
    fn default() -> Self {
        BankConfig {
            metric: Metric::Mae,
            seed: 0,
            grid: None,
            max_bins: super::DEFAULT_MAX_BINS,
        }
    }
}

/// Grid-searches every (lead, target) pair independently.
pub fn train_bank(
    splits: &BTreeMap<u32, Splits>,
    lead_times: &[u32],
    family: Family,
    config: &BankConfig,
) -> Result<LeadTimeModelBank> {
    let grid = match &config.grid {
        Some(g) => {
            if let Some(h) = g.iter().find(|h| h.family() != family) {
                return Err(Error::invalid(format!(
                    "grid point for {} passed to a {} bank",
                    h.family(),
                    family
                )));
            }
            g.clone()
        }
        None => table_grid(family),
    };
    let mut leads = lead_times.to_vec();
    leads.sort_unstable();
    leads.dedup();
    let mut entries = Vec::with_capacity(leads.len() * 3);
    for lead in leads {
        let s = splits.get(&lead).ok_or_else(|| Error::MissingLead {
            lead,
            detail: "no dataset for this lead time".into(),
        })?;
        if s.train.is_empty() || s.validation.is_empty() {
            return Err(Error::MissingLead {
                lead,
                detail: format!(
                    "train has {} rows, validation has {}",
                    s.train.len(),
                    s.validation.len()
                ),
            });
        }
        let prepared = Prepared::with_max_bins(s.train.matrix(), config.max_bins)?;
        let xv = s.validation.matrix();
        for target in Target::ALL {
            let r = search(
                &grid,
                &prepared,
                &s.train.targets(target),
                &xv,
                &s.validation.targets(target),
                target_is_nonnegative(target),
                config.metric,
                config.seed,
            )?;
            log::debug!(
                "{family} lead {lead} {}: {:?} score {:.4}",
                target.name(),
                r.best.hyperparameters,
                r.best_score()
            );
            entries.push(BankEntry {
                lead_time: lead,
                target,
                validation_score: r.best_score(),
                model: r.model,
            });
        }
    }
    Ok(LeadTimeModelBank {
        family,
        metric: config.metric,
        entries,
    })
}
