//! Stacked ensemble over the per-family banks and the official baseline.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::features::{Dataset, Target, OFFICIAL_DIR_COS, OFFICIAL_DIR_SIN, OFFICIAL_SPEED};
use crate::ingest::decode_direction;
use crate::policy::contiguous_folds;
use crate::regress::elastic_net::{self, Design, ElasticNetModel};
use crate::regress::{Family, LeadTimeModelBank, Matrix};
use crate::{Error, Result};

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Member {
    ElasticNet,
    DecisionTree,
    RandomForest,
    GbtLeafwise,
    GbtDepthwise,
    OfficialBaseline,
}

impl Member {
    pub const ALL: [Member; 6] = [
        Member::ElasticNet,
        Member::DecisionTree,
        Member::RandomForest,
        Member::GbtLeafwise,
        Member::GbtDepthwise,
        Member::OfficialBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Member::ElasticNet => "elastic_net",
            Member::DecisionTree => "decision_tree",
            Member::RandomForest => "random_forest",
            Member::GbtLeafwise => "gbt_leafwise",
            Member::GbtDepthwise => "gbt_depthwise",
            Member::OfficialBaseline => "official_baseline",
        }
    }

    pub fn family(self) -> Option<Family> {
        match self {
            Member::ElasticNet => Some(Family::ElasticNet),
            Member::DecisionTree => Some(Family::DecisionTree),
            Member::RandomForest => Some(Family::RandomForest),
            Member::GbtLeafwise => Some(Family::GbtLeafwise),
            Member::GbtDepthwise => Some(Family::GbtDepthwise),
            Member::OfficialBaseline => None,
        }
    }

    pub fn of_family(family: Family) -> Member {
        match family {
            Family::ElasticNet => Member::ElasticNet,
            Family::DecisionTree => Member::DecisionTree,
            Family::RandomForest => Member::RandomForest,
            Family::GbtLeafwise => Member::GbtLeafwise,
            Family::GbtDepthwise => Member::GbtDepthwise,
        }
    }
}

impl fmt::Display for Member {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Member {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Member::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown ensemble member `{s}`")))
    }
}

/// Names of the flattened member features: member-major, then target.
pub fn member_feature_names(members: &[Member]) -> Vec<String> {
    members
        .iter()
        .flat_map(|m| Target::ALL.iter().map(move |t| format!("{}_{}", m.as_str(), t.name())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberPredictionRow {
    pub base_time: DateTime<Utc>,
    pub lead_time: u32,
    /// Speed, cos, sin per member, in the owning table's member order.
    pub predictions: Vec<[f64; 3]>,
    pub actual: [f64; 3],
}

impl MemberPredictionRow {
    /// Flattened member-major feature vector (the policy input).
    pub fn features(&self) -> Vec<f64> {
        self.predictions.iter().flatten().copied().collect()
    }
}

/// Member predictions for one lead time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberPredictions {
    pub lead_time: u32,
    pub members: Vec<Member>,
    pub rows: Vec<MemberPredictionRow>,
}

impl MemberPredictions {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn feature_matrix(&self) -> Matrix {
        let width = self.members.len() * 3;
        let mut data = Vec::with_capacity(self.rows.len() * width);
        for r in &self.rows {
            data.extend(r.features());
        }
        Matrix::new(self.rows.len(), width, data).expect("uniform rows")
    }

    /// One target's member columns.
    pub fn target_matrix(&self, target: Target) -> Matrix {
        let m = self.members.len();
        let mut data = Vec::with_capacity(self.rows.len() * m);
        for r in &self.rows {
            data.extend(r.predictions.iter().map(|p| p[target.index()]));
        }
        Matrix::new(self.rows.len(), m, data).expect("uniform rows")
    }

    pub fn actual(&self, target: Target) -> Vec<f64> {
        self.rows.iter().map(|r| r.actual[target.index()]).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["base_time".to_string(), "lead_time".to_string()];
        header.extend(member_feature_names(&self.members));
        header.extend(Target::ALL.iter().map(|t| format!("actual_{}", t.name())));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![crate::ingest::format_time(r.base_time), r.lead_time.to_string()];
            rec.extend(r.features().iter().map(|v| v.to_string()));
            rec.extend(r.actual.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Runs every bank (and optionally the official baseline) on each row.
pub fn collect_member_predictions(
    banks: &[&LeadTimeModelBank],
    include_baseline: bool,
    dataset: &Dataset,
) -> Result<MemberPredictions> {
    let lead = dataset.lead_time;
    let mut members: Vec<Member> = banks.iter().map(|b| Member::of_family(b.family)).collect();
    if include_baseline {
        members.push(Member::OfficialBaseline);
    }
    let mut rows = Vec::with_capacity(dataset.len());
    for row in &dataset.rows {
        let x = row.features.as_slice();
        let mut predictions = Vec::with_capacity(members.len());
        for bank in banks {
            let p = bank.predict_all(lead, x).map_err(|e| match e {
                Error::MissingLead { .. } => Error::MissingMember {
                    member: bank.family.to_string(),
                    lead,
                    time: crate::ingest::format_time(row.base_time),
                },
                other => other,
            })?;
            predictions.push(p);
        }
        if include_baseline {
            predictions.push(baseline_prediction(x));
        }
        rows.push(MemberPredictionRow {
            base_time: row.base_time,
            lead_time: lead,
            predictions,
            actual: row.targets,
        });
    }
    Ok(MemberPredictions {
        lead_time: lead,
        members,
        rows,
    })
}

/// Official forecast's speed and encoded direction from a feature row.
pub fn baseline_prediction(x: &[f64]) -> [f64; 3] {
    [x[OFFICIAL_SPEED], x[OFFICIAL_DIR_COS], x[OFFICIAL_DIR_SIN]]
}

/// (alpha, l1_ratio) candidates for the combiner, in search order.
pub fn ensemble_grid() -> Vec<(f64, f64)> {
    let mut g = Vec::new();
    for alpha in [0.2, 0.4, 0.6, 0.8, 1.0] {
        for l1_ratio in [0.0, 0.25, 0.5, 0.75, 1.0] {
            g.push((alpha, l1_ratio));
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub alpha: f64,
    pub l1_ratio: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Combiner {
    pub target: Target,
    pub alpha: f64,
    pub l1_ratio: f64,
    pub model: ElasticNetModel,
    pub cv: Vec<CvScore>,
}

impl Combiner {
    pub fn predict(&self, member_values: &[f64]) -> f64 {
        let v = self.model.predict(member_values);
        if self.target == Target::Speed {
            v.max(0.0)
        } else {
            v
        }
    }

    pub fn cv_mae(&self) -> f64 {
        self.cv
            .iter()
            .find(|c| c.alpha == self.alpha && c.l1_ratio == self.l1_ratio)
            .map_or(f64::NAN, |c| c.mae)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadStack {
    pub lead_time: u32,
    pub members: Vec<Member>,
    /// Speed, cos, sin combiners.
    pub combiners: Vec<Combiner>,
}

impl LeadStack {
    pub fn combiner(&self, target: Target) -> &Combiner {
        &self.combiners[target.index()]
    }

    /// Combined (speed, cos, sin).
    pub fn combine(&self, predictions: &[[f64; 3]]) -> Result<[f64; 3]> {
        if predictions.len() != self.members.len() {
            return Err(Error::DimensionMismatch {
                expected: self.members.len(),
                actual: predictions.len(),
            });
        }
        if predictions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("member predictions"));
        }
        let mut out = [0.0; 3];
        for t in Target::ALL {
            let col: Vec<f64> = predictions.iter().map(|p| p[t.index()]).collect();
            out[t.index()] = self.combiner(t).predict(&col);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedEnsemble {
    pub folds: usize,
    pub stacks: BTreeMap<u32, LeadStack>,
}

impl StackedEnsemble {
    pub fn lead(&self, lead_time: u32) -> Result<&LeadStack> {
        self.stacks.get(&lead_time).ok_or_else(|| Error::MissingLead {
            lead: lead_time,
            detail: "ensemble has no combiner for this lead time".into(),
        })
    }
}

fn clamp(target: Target, v: f64) -> f64 {
    if target == Target::Speed {
        v.max(0.0)
    } else {
        v
    }
}

/// Contiguous k-fold CV over `(alpha, l1_ratio)` pairs, then a refit on all
/// rows. Returns the chosen pair's combiner.
pub fn train_combiner(x: &Matrix, y: &[f64], target: Target, grid: &[(f64, f64)], k: usize) -> Result<Combiner> {
    if grid.is_empty() {
        return Err(Error::Empty("combiner grid"));
    }
    let n = x.n_rows();
    let folds = contiguous_folds(n, k)?;
    let full = Design::new(x)?;
    if full.kept().len() < x.n_cols() {
        log::warn!(
            "{}: dropping {} constant member column(s)",
            target.name(),
            x.n_cols() - full.kept().len()
        );
    }
    // designs per fold are reused across the grid
    let mut fold_data = Vec::with_capacity(folds.len());
    for &(a, b) in &folds {
        let idx: Vec<usize> = (0..a).chain(b..n).collect();
        let xt = x.select_rows(idx.iter().copied());
        let yt: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        fold_data.push((Design::new(&xt)?, yt, a, b));
    }
    let mut cv: Vec<CvScore> = Vec::with_capacity(grid.len());
    let mut best: Option<usize> = None;
    for &(alpha, l1_ratio) in grid {
        let mut abs_sum = 0.0;
        for (design, yt, a, b) in &fold_data {
            let m = elastic_net::fit(design, yt, alpha, l1_ratio)?;
            for i in *a..*b {
                abs_sum += (clamp(target, m.predict(x.row(i))) - y[i]).abs();
            }
        }
        let mae = abs_sum / n as f64;
        if best.is_none_or(|b: usize| mae < cv[b].mae) {
            best = Some(cv.len());
        }
        cv.push(CvScore { alpha, l1_ratio, mae });
    }
    let chosen: &CvScore = &cv[best.expect("non-empty grid")];
    let (alpha, l1_ratio) = (chosen.alpha, chosen.l1_ratio);
    let model = elastic_net::fit(&full, y, alpha, l1_ratio)?;
    Ok(Combiner {
        target,
        alpha,
        l1_ratio,
        model,
        cv,
    })
}

pub fn train_stacker(predictions: &MemberPredictions, k: usize) -> Result<LeadStack> {
    train_stacker_with_grid(predictions, k, &ensemble_grid())
}

pub fn train_stacker_with_grid(predictions: &MemberPredictions, k: usize, grid: &[(f64, f64)]) -> Result<LeadStack> {
    if predictions.len() < k {
        return Err(Error::invalid(format!(
            "lead {}: {} rows cannot be split into {k} folds",
            predictions.lead_time,
            predictions.len()
        )));
    }
    let combiners = Target::ALL
        .iter()
        .map(|&t| train_combiner(&predictions.target_matrix(t), &predictions.actual(t), t, grid, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(LeadStack {
        lead_time: predictions.lead_time,
        members: predictions.members.clone(),
        combiners,
    })
}

pub fn train_ensemble(predictions: &BTreeMap<u32, MemberPredictions>, k: usize) -> Result<StackedEnsemble> {
    let stacks = predictions
        .iter()
        .map(|(&lead, p)| Ok((lead, train_stacker(p, k)?)))
        .collect::<Result<_>>()?;
    Ok(StackedEnsemble { folds: k, stacks })
}

/// Combined forecast as (speed m/s, direction degrees).
pub fn predict_ensemble(stack: &LeadStack, predictions: &[[f64; 3]]) -> Result<(f64, f64)> {
    let [s, c, si] = stack.combine(predictions)?;
    Ok((s, decode_direction(c, si)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_stack() -> LeadStack {
        let comb = |target| Combiner {
            target,
            alpha: 0.0,
            l1_ratio: 0.0,
            model: ElasticNetModel {
                intercept: 0.0,
                coefficients: vec![1.0],
                standardized: vec![1.0],
                sweeps: 0,
                converged: true,
            },
            cv: vec![],
        };
        LeadStack {
            lead_time: 1,
            members: vec![Member::ElasticNet],
            combiners: Target::ALL.iter().map(|&t| comb(t)).collect(),
        }
    }

    #[test]
    fn identity_passes_through() {
        let s = identity_stack();
        let (speed, dir) = predict_ensemble(&s, &[[3.0, 0.3, 0.3]]).unwrap();
        assert_eq!(speed, 3.0);
        assert!((dir - 45.0).abs() < 1e-9);
        assert!(predict_ensemble(&s, &[[3.0, 0.0, 0.0]]).is_err());
        assert!(predict_ensemble(&s, &[]).is_err());
    }

    #[test]
    fn names_are_member_major() {
        let n = member_feature_names(&Member::ALL);
        assert_eq!(n.len(), 18);
        assert_eq!(n[0], "elastic_net_speed");
        assert_eq!(n[17], "official_baseline_dir_sin");
    }

    #[test]
    fn grid_shape() {
        let g = ensemble_grid();
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], (0.2, 0.0));
        assert_eq!(g[24], (1.0, 1.0));
    }
}
