//! Reward matrices and prescriptive policy trees (maintain vs reduce).
//!
//! Both actions' outcomes follow directly from the realized scenario, so
//! every row carries its full reward vector and a tree is scored by plain
//! summation. Trees are grown greedily (a split must strictly beat the best
//! constant action) and then refined by coordinate local search over each
//! internal node's (feature, threshold) with the subtrees held fixed.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::regress::Matrix;
use crate::scenario::Scenario;
use crate::{Error, Result};

/// Hourly cost of reduced production plus anti-odor injection (USD).
pub const REDUCE_COST: f64 = 2000.0;
pub const MIN_HEALTH_COST: f64 = 2000.0;
pub const MAX_HEALTH_COST: f64 = 18000.0;
/// Health costs of the trained what-if grid (total FN cost 4000..20000).
pub const HEALTH_COST_GRID: [f64; 5] = [2000.0, 4000.0, 8000.0, 13000.0, 18000.0];
pub const DEFAULT_DEPTH_GRID: [usize; 4] = [2, 3, 4, 5];
pub const DEFAULT_MIN_LEAF: usize = 20;
const MAX_LOCAL_SEARCH_PASSES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prescription {
    Maintain,
    Reduce,
}

impl Prescription {
    pub fn as_str(self) -> &'static str {
        match self {
            Prescription::Maintain => "maintain",
            Prescription::Reduce => "reduce",
        }
    }
}

/// Total cost of an hour at full production under a dangerous scenario.
pub fn false_negative_cost(health_cost: f64) -> f64 {
    REDUCE_COST + health_cost
}

pub fn check_health_cost(health_cost: f64) -> Result<()> {
    if (MIN_HEALTH_COST..=MAX_HEALTH_COST).contains(&health_cost) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "health cost must lie in [{MIN_HEALTH_COST}, {MAX_HEALTH_COST}], got {health_cost}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardMatrix {
    pub health_cost: f64,
    /// Per row: `[maintain, reduce]` rewards (USD, ≤ 0).
    pub rewards: Vec<[f64; 2]>,
}

impl RewardMatrix {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn reward(&self, row: usize, action: Prescription) -> f64 {
        self.rewards[row][action as usize]
    }
}

pub fn reward_for(actual: Scenario, action: Prescription, health_cost: f64) -> f64 {
    match action {
        Prescription::Reduce => -REDUCE_COST,
        Prescription::Maintain if actual.is_dangerous() => -false_negative_cost(health_cost),
        Prescription::Maintain => 0.0,
    }
}

pub fn build_reward_matrix(actual: &[Scenario], health_cost: f64) -> Result<RewardMatrix> {
    check_health_cost(health_cost)?;
    Ok(RewardMatrix {
        health_cost,
        rewards: actual
            .iter()
            .map(|&s| {
                [
                    reward_for(s, Prescription::Maintain, health_cost),
                    reward_for(s, Prescription::Reduce, health_cost),
                ]
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicyNode {
    Split {
        feature_index: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        action: Prescription,
        n_samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub feature_index: usize,
    pub feature: String,
    pub threshold: f64,
    pub value: f64,
    /// `value < threshold`
    pub went_left: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTree {
    pub health_cost: f64,
    pub n_features: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub nodes: Vec<PolicyNode>,
}

impl PolicyTree {
    fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                PolicyNode::Leaf { .. } => return i,
                PolicyNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => i = if x[feature_index] < threshold { left } else { right },
            }
        }
    }

    fn check_width(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[PolicyNode], i: usize) -> usize {
            match nodes[i] {
                PolicyNode::Leaf { .. } => 0,
                PolicyNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, PolicyNode::Leaf { .. }))
            .count()
    }

    /// Root-to-leaf trail with the names of the features tested.
    pub fn path(&self, x: &[f64], names: &[String]) -> Result<(Prescription, Vec<PathStep>)> {
        self.check_width(x)?;
        let mut steps = Vec::new();
        let mut i = 0;
        loop {
            match self.nodes[i] {
                PolicyNode::Leaf { action, .. } => return Ok((action, steps)),
                PolicyNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    let went_left = x[feature_index] < threshold;
                    steps.push(PathStep {
                        feature_index,
                        feature: names
                            .get(feature_index)
                            .cloned()
                            .unwrap_or_else(|| format!("x{feature_index}")),
                        threshold,
                        value: x[feature_index],
                        went_left,
                    });
                    i = if went_left { left } else { right };
                }
            }
        }
    }

    pub fn total_reward(&self, x: &Matrix, rewards: &RewardMatrix) -> Result<f64> {
        if x.n_rows() != rewards.len() {
            return Err(Error::DimensionMismatch {
                expected: rewards.len(),
                actual: x.n_rows(),
            });
        }
        x.rows()
            .enumerate()
            .map(|(i, r)| Ok(rewards.reward(i, prescribe(self, r)?)))
            .sum()
    }
}

pub fn prescribe(tree: &PolicyTree, x: &[f64]) -> Result<Prescription> {
    tree.check_width(x)?;
    match tree.nodes[tree.leaf_index(x)] {
        PolicyNode::Leaf { action, .. } => Ok(action),
        PolicyNode::Split { .. } => unreachable!("leaf_index returns a leaf"),
    }
}

/// Indented text rendering; the first child of a split is its `<` branch.
pub fn render_tree_text(tree: &PolicyTree, names: &[String]) -> String {
    fn walk(tree: &PolicyTree, names: &[String], i: usize, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        match &tree.nodes[i] {
            PolicyNode::Leaf { action, n_samples } => {
                let _ = writeln!(out, "{pad}Prescribe {} (n={n_samples})", action.as_str());
            }
            PolicyNode::Split {
                feature_index,
                threshold,
                left,
                right,
            } => {
                let name = names
                    .get(*feature_index)
                    .cloned()
                    .unwrap_or_else(|| format!("x{feature_index}"));
                let _ = writeln!(out, "{pad}{name} < {threshold:.4}");
                walk(tree, names, *left, depth + 1, out);
                walk(tree, names, *right, depth + 1, out);
            }
        }
    }
    let mut out = String::new();
    walk(tree, names, 0, 0, &mut out);
    out
}

/// Per-feature row orderings by value, shared by every node.
struct Sorted {
    order: Vec<Vec<u32>>,
}

impl Sorted {
    fn new(x: &Matrix) -> Self {
        let order = (0..x.n_cols())
            .map(|j| {
                let mut idx: Vec<u32> = (0..x.n_rows() as u32).collect();
                idx.sort_by(|&a, &b| x.get(a as usize, j).total_cmp(&x.get(b as usize, j)));
                idx
            })
            .collect();
        Sorted { order }
    }
}

struct Trainer<'a> {
    x: &'a Matrix,
    rewards: &'a RewardMatrix,
    sorted: Sorted,
    max_depth: usize,
    min_leaf: usize,
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Trainer<'_> {
    fn advantage(&self, i: usize) -> f64 {
        let r = self.rewards.rewards[i];
        r[1] - r[0]
    }

    fn best_action(&self, rows: &[u32]) -> (Prescription, f64) {
        let (m, r) = rows.iter().fold((0.0, 0.0), |(m, r), &i| {
            let g = self.rewards.rewards[i as usize];
            (m + g[0], r + g[1])
        });
        if r > m {
            (Prescription::Reduce, r)
        } else {
            (Prescription::Maintain, m)
        }
    }

    /// Sweeps every feature over `rows` (marked in `mask`), scoring a split
    /// by `left(prefix) + right(suffix)` where the callback accumulates
    /// per-row contributions moved from right to left.
    fn sweep<F>(&self, rows: &[u32], mask: &[bool], mut score: F) -> Option<Candidate>
    where
        F: FnMut(SweepEvent) -> Option<f64>,
    {
        let n = rows.len();
        let mut best: Option<Candidate> = None;
        for (f, order) in self.sorted.order.iter().enumerate() {
            score(SweepEvent::Reset);
            let mut moved = 0usize;
            let mut prev: Option<f64> = None;
            for &i in order.iter().filter(|&&i| mask[i as usize]) {
                let v = self.x.get(i as usize, f);
                if let Some(p) = prev {
                    if v > p && moved >= self.min_leaf && n - moved >= self.min_leaf {
                        if let Some(s) = score(SweepEvent::Evaluate) {
                            if best.is_none_or(|b| s > b.score) {
                                best = Some(Candidate {
                                    feature: f,
                                    threshold: p + (v - p) / 2.0,
                                    score: s,
                                });
                            }
                        }
                    }
                }
                score(SweepEvent::Move(i as usize));
                moved += 1;
                prev = Some(v);
            }
        }
        best
    }

    fn greedy(&self, nodes: &mut Vec<PolicyNode>, rows: Vec<u32>, depth: usize, mask: &mut [bool]) -> usize {
        let (action, _) = self.best_action(&rows);
        let idx = nodes.len();
        nodes.push(PolicyNode::Leaf {
            action,
            n_samples: rows.len(),
        });
        if depth >= self.max_depth || rows.len() < 2 * self.min_leaf {
            return idx;
        }
        let total: f64 = rows.iter().map(|&i| self.advantage(i as usize)).sum();
        let baseline = total.max(0.0);
        for &i in &rows {
            mask[i as usize] = true;
        }
        let mut left = 0.0;
        let best = self.sweep(&rows, mask, |ev| match ev {
            SweepEvent::Reset => {
                left = 0.0;
                None
            }
            SweepEvent::Move(i) => {
                left += self.advantage(i);
                None
            }
            SweepEvent::Evaluate => Some(left.max(0.0) + (total - left).max(0.0)),
        });
        for &i in &rows {
            mask[i as usize] = false;
        }
        let Some(c) = best.filter(|c| c.score > baseline) else {
            return idx;
        };
        let (l, r): (Vec<u32>, Vec<u32>) = rows
            .iter()
            .partition(|&&i| self.x.get(i as usize, c.feature) < c.threshold);
        let li = self.greedy(nodes, l, depth + 1, mask);
        let ri = self.greedy(nodes, r, depth + 1, mask);
        nodes[idx] = PolicyNode::Split {
            feature_index: c.feature,
            threshold: c.threshold,
            left: li,
            right: ri,
        };
        idx
    }

    fn tree(&self, nodes: Vec<PolicyNode>) -> PolicyTree {
        PolicyTree {
            health_cost: self.rewards.health_cost,
            n_features: self.x.n_cols(),
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            nodes,
        }
    }

    /// Re-assigns leaf actions and counts from the rows now reaching them.
    fn refit_leaves(&self, tree: &mut PolicyTree) -> f64 {
        let mut sums = vec![[0.0f64; 2]; tree.nodes.len()];
        let mut counts = vec![0usize; tree.nodes.len()];
        for (i, r) in self.x.rows().enumerate() {
            let l = tree.leaf_index(r);
            sums[l][0] += self.rewards.rewards[i][0];
            sums[l][1] += self.rewards.rewards[i][1];
            counts[l] += 1;
        }
        let mut total = 0.0;
        for (k, node) in tree.nodes.iter_mut().enumerate() {
            if let PolicyNode::Leaf { action, n_samples } = node {
                let reduce = sums[k][1] > sums[k][0];
                *action = if reduce {
                    Prescription::Reduce
                } else {
                    Prescription::Maintain
                };
                *n_samples = counts[k];
                total += sums[k][reduce as usize];
            }
        }
        total
    }

    fn subtree_leaf(tree: &PolicyTree, mut i: usize, x: &[f64]) -> usize {
        loop {
            match tree.nodes[i] {
                PolicyNode::Leaf { .. } => return i,
                PolicyNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => i = if x[feature_index] < threshold { left } else { right },
            }
        }
    }

    /// One improving move at `node`, if any: rows reaching it are re-routed
    /// by a new (feature, threshold) into the unchanged subtrees.
    fn improve_node(&self, tree: &mut PolicyTree, node: usize, mask: &mut [bool]) -> bool {
        let PolicyNode::Split {
            feature_index,
            threshold,
            left,
            right,
        } = tree.nodes[node]
        else {
            return false;
        };
        // rows reaching this node
        let rows: Vec<u32> = (0..self.x.n_rows())
            .filter(|&i| {
                let r = self.x.row(i);
                let mut k = 0;
                loop {
                    if k == node {
                        return true;
                    }
                    match tree.nodes[k] {
                        PolicyNode::Leaf { .. } => return false,
                        PolicyNode::Split {
                            feature_index: f,
                            threshold: t,
                            left: l,
                            right: rr,
                        } => k = if r[f] < t { l } else { rr },
                    }
                }
            })
            .map(|i| i as u32)
            .collect();
        if rows.len() < 2 * self.min_leaf {
            return false;
        }
        let action = |leaf: usize| match tree.nodes[leaf] {
            PolicyNode::Leaf { action, .. } => action,
            _ => unreachable!(),
        };
        let n_nodes = tree.nodes.len();
        let mut via_left = vec![(0usize, 0.0f64); self.x.n_rows()];
        let mut via_right = vec![(0usize, 0.0f64); self.x.n_rows()];
        let mut right_total = 0.0;
        let mut current = 0.0;
        for &i in &rows {
            let r = self.x.row(i as usize);
            let ll = Self::subtree_leaf(tree, left, r);
            let rl = Self::subtree_leaf(tree, right, r);
            via_left[i as usize] = (ll, self.rewards.reward(i as usize, action(ll)));
            via_right[i as usize] = (rl, self.rewards.reward(i as usize, action(rl)));
            right_total += via_right[i as usize].1;
            current += if r[feature_index] < threshold {
                via_left[i as usize].1
            } else {
                via_right[i as usize].1
            };
            mask[i as usize] = true;
        }

        let min_leaf = self.min_leaf;
        let mut counts = vec![0usize; n_nodes];
        let mut short = 0usize;
        let mut gain = 0.0;
        let leaves_of = |root: usize| {
            let mut v = Vec::new();
            let mut stack = vec![root];
            while let Some(k) = stack.pop() {
                match tree.nodes[k] {
                    PolicyNode::Leaf { .. } => v.push(k),
                    PolicyNode::Split { left, right, .. } => {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
            v
        };
        let left_leaves = leaves_of(left);
        let right_leaves = leaves_of(right);
        let best = self.sweep(&rows, mask, |ev| match ev {
            SweepEvent::Reset => {
                counts.iter_mut().for_each(|c| *c = 0);
                for &i in &rows {
                    counts[via_right[i as usize].0] += 1;
                }
                short = left_leaves.len()
                    + right_leaves
                        .iter()
                        .filter(|&&k| counts[k] < min_leaf)
                        .count();
                gain = 0.0;
                None
            }
            SweepEvent::Move(i) => {
                let (ll, lr) = via_left[i];
                let (rl, rr) = via_right[i];
                gain += lr - rr;
                if counts[rl] == min_leaf {
                    short += 1;
                }
                counts[rl] -= 1;
                counts[ll] += 1;
                if counts[ll] == min_leaf {
                    short -= 1;
                }
                None
            }
            SweepEvent::Evaluate => (short == 0).then_some(right_total + gain),
        });
        for &i in &rows {
            mask[i as usize] = false;
        }
        match best {
            Some(c) if c.score > current + 1e-9 * (1.0 + current.abs()) => {
                tree.nodes[node] = PolicyNode::Split {
                    feature_index: c.feature,
                    threshold: c.threshold,
                    left,
                    right,
                };
                true
            }
            _ => false,
        }
    }

    fn local_search(&self, tree: &mut PolicyTree) {
        let mut mask = vec![false; self.x.n_rows()];
        let mut total = self.refit_leaves(tree);
        for _ in 0..MAX_LOCAL_SEARCH_PASSES {
            let mut improved = false;
            for node in 0..tree.nodes.len() {
                let before = tree.clone();
                if self.improve_node(tree, node, &mut mask) {
                    let t = self.refit_leaves(tree);
                    if t > total {
                        total = t;
                        improved = true;
                    } else {
                        *tree = before;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }
}

enum SweepEvent {
    Reset,
    Move(usize),
    Evaluate,
}

pub fn train_policy_tree(
    x: &Matrix,
    rewards: &RewardMatrix,
    max_depth: usize,
    min_leaf: usize,
) -> Result<PolicyTree> {
    if x.n_rows() == 0 {
        return Err(Error::Empty("policy training rows"));
    }
    if x.n_rows() != rewards.len() {
        return Err(Error::DimensionMismatch {
            expected: rewards.len(),
            actual: x.n_rows(),
        });
    }
    if max_depth == 0 {
        return Err(Error::invalid("max_depth must be ≥ 1"));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("policy features"));
    }
    let trainer = Trainer {
        x,
        rewards,
        sorted: Sorted::new(x),
        max_depth,
        min_leaf: min_leaf.max(1),
    };
    let mut nodes = Vec::new();
    let mut mask = vec![false; x.n_rows()];
    trainer.greedy(&mut nodes, (0..x.n_rows() as u32).collect(), 0, &mut mask);
    let mut tree = trainer.tree(nodes);
    if tree.nodes.len() > 1 {
        trainer.local_search(&mut tree);
    }
    Ok(tree)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningScore {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub mean_heldout_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedPolicy {
    pub tree: PolicyTree,
    pub scores: Vec<TuningScore>,
}

/// Contiguous-block fold boundaries `[start, end)`.
pub fn contiguous_folds(n: usize, k: usize) -> Result<Vec<(usize, usize)>> {
    if k < 2 {
        return Err(Error::invalid("fold count must be ≥ 2"));
    }
    if k > n {
        return Err(Error::invalid(format!("{k} folds requested for {n} rows")));
    }
    Ok((0..k).map(|j| (j * n / k, (j + 1) * n / k)).collect())
}

/// Picks (max_depth, min_leaf) by contiguous k-fold CV on mean held-out
/// reward (first in grid order on ties) and refits on all rows.
pub fn tune_policy_tree(
    x: &Matrix,
    rewards: &RewardMatrix,
    depth_grid: &[usize],
    min_leaf_grid: &[usize],
    k: usize,
) -> Result<TunedPolicy> {
    if depth_grid.is_empty() || min_leaf_grid.is_empty() {
        return Err(Error::Empty("policy tuning grid"));
    }
    let n = x.n_rows();
    let folds = contiguous_folds(n, k)?;
    let mut scores = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for &max_depth in depth_grid {
        for &min_leaf in min_leaf_grid {
            let mut sum = 0.0;
            for &(a, b) in &folds {
                let train_idx: Vec<usize> = (0..a).chain(b..n).collect();
                let xt = x.select_rows(train_idx.iter().copied());
                let rt = RewardMatrix {
                    health_cost: rewards.health_cost,
                    rewards: train_idx.iter().map(|&i| rewards.rewards[i]).collect(),
                };
                let tree = train_policy_tree(&xt, &rt, max_depth, min_leaf)?;
                for i in a..b {
                    sum += rewards.reward(i, prescribe(&tree, x.row(i))?);
                }
            }
            let mean = sum / folds.len() as f64;
            if best.is_none_or(|(_, b)| mean > b) {
                best = Some((scores.len(), mean));
            }
            scores.push(TuningScore {
                max_depth,
                min_leaf,
                mean_heldout_reward: mean,
            });
        }
    }
    let (i, _) = best.expect("non-empty grid");
    let tree = train_policy_tree(x, rewards, scores[i].max_depth, scores[i].min_leaf)?;
    Ok(TunedPolicy { tree, scores })
}

/// Index of the trained health cost nearest to `health_cost` (lower on ties).
pub fn nearest_health_cost(grid: &[f64], health_cost: f64) -> Option<usize> {
    grid.iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |acc, (i, &h)| {
            let d = (h - health_cost).abs();
            match acc {
                Some((_, bd)) if bd <= d => acc,
                _ => Some((i, d)),
            }
        })
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn reward_rows() {
        let m = build_reward_matrix(&[Scenario::S1, Scenario::S4, Scenario::S3b], 18000.0).unwrap();
        assert_eq!(m.rewards[0], [0.0, -2000.0]);
        assert_eq!(m.rewards[1], [-20000.0, -2000.0]);
        assert_eq!(m.rewards[2], [-20000.0, -2000.0]);
        assert!(build_reward_matrix(&[Scenario::S1], 1999.0).is_err());
        assert!(build_reward_matrix(&[Scenario::S1], 18001.0).is_err());
    }

    #[test]
    fn all_favorable_gives_a_maintain_leaf() {
        let x = Matrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let r = build_reward_matrix(&[Scenario::S1; 4], 10000.0).unwrap();
        let t = train_policy_tree(&x, &r, 3, 1).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(prescribe(&t, &[9.0]).unwrap(), Prescription::Maintain);
        assert_eq!(render_tree_text(&t, &names(1)), "Prescribe maintain (n=4)\n");
    }

    #[test]
    fn separable_stump() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let actual: Vec<Scenario> = xs
            .iter()
            .map(|&v| if v < 0.5 { Scenario::S4 } else { Scenario::S1 })
            .collect();
        let x = Matrix::new(10, 1, xs).unwrap();
        let r = build_reward_matrix(&actual, 10000.0).unwrap();
        let t = train_policy_tree(&x, &r, 1, 1).unwrap();
        assert_eq!(t.total_reward(&x, &r).unwrap(), -2000.0 * 5.0);
        assert_eq!(prescribe(&t, &[0.2]).unwrap(), Prescription::Reduce);
        assert_eq!(prescribe(&t, &[0.7]).unwrap(), Prescription::Maintain);
        let text = render_tree_text(&t, &names(1));
        assert_eq!(text, "f0 < 0.4500\n  Prescribe reduce (n=5)\n  Prescribe maintain (n=5)\n");
        assert!(prescribe(&t, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn folds_cover_rows_contiguously() {
        let f = contiguous_folds(11, 5).unwrap();
        assert_eq!(f.first().unwrap().0, 0);
        assert_eq!(f.last().unwrap().1, 11);
        assert!(f.windows(2).all(|w| w[0].1 == w[1].0));
        assert!(contiguous_folds(3, 5).is_err());
    }

    #[test]
    fn nearest_grid_point() {
        let g = HEALTH_COST_GRID;
        assert_eq!(nearest_health_cost(&g, 20000.0), Some(4));
        assert_eq!(nearest_health_cost(&g, 4100.0), Some(1));
        assert_eq!(nearest_health_cost(&g, 6000.0), Some(1));
        assert_eq!(nearest_health_cost(&[], 1.0), None);
    }
}
