//! Histogram-based regression tree grower shared by CART, random forest and
//! both boosting policies.
//!
//! Features are pre-binned once per training matrix: each column gets up to
//! `max_bins - 1` cut points placed at midpoints between distinct values, so
//! a column with few distinct values is binned exactly. A split "bin ≤ b"
//! corresponds to the raw-value rule `x < cuts[b]`, which is what prediction
//! uses.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;

pub const DEFAULT_MAX_BINS: usize = 255;
const STRIDE: usize = 256;

#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    n_rows: usize,
    n_cols: usize,
    bins: Vec<u8>,
    cuts: Vec<Vec<f64>>,
}

impl BinnedMatrix {
    pub fn new(x: &Matrix, max_bins: usize) -> Self {
        let max_bins = max_bins.clamp(2, STRIDE);
        let (n, p) = (x.n_rows(), x.n_cols());
        let mut cuts = Vec::with_capacity(p);
        let mut column = Vec::with_capacity(n);
        for j in 0..p {
            column.clear();
            column.extend((0..n).map(|i| x.get(i, j)));
            column.sort_by(|a, b| a.total_cmp(b));
            cuts.push(column_cuts(&column, max_bins));
        }
        let mut bins = vec![0u8; n * p];
        for i in 0..n {
            let row = x.row(i);
            for j in 0..p {
                bins[i * p + j] = bin_of(&cuts[j], row[j]);
            }
        }
        BinnedMatrix {
            n_rows: n,
            n_cols: p,
            bins,
            cuts,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn cuts(&self, feature: usize) -> &[f64] {
        &self.cuts[feature]
    }

    #[inline]
    fn row(&self, r: usize) -> &[u8] {
        &self.bins[r * self.n_cols..(r + 1) * self.n_cols]
    }
}

fn bin_of(cuts: &[f64], v: f64) -> u8 {
    cuts.partition_point(|&c| c <= v) as u8
}

/// Cut points for one sorted column.
fn column_cuts(sorted: &[f64], max_bins: usize) -> Vec<f64> {
    let mut uniques: Vec<f64> = Vec::new();
    for &v in sorted {
        if uniques.last() != Some(&v) {
            uniques.push(v);
        }
    }
    if uniques.len() <= max_bins {
        return uniques.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    }
    let n = sorted.len();
    let mut cuts = Vec::with_capacity(max_bins - 1);
    for k in 1..max_bins {
        let q = sorted[k * n / max_bins];
        // first unique >= q; cut just below it
        let u = uniques.partition_point(|&v| v < q);
        if u == 0 {
            continue;
        }
        let c = midpoint(uniques[u - 1], uniques[u]);
        if cuts.last().is_none_or(|&last| c > last) {
            cuts.push(c);
        }
    }
    cuts
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // guard against m == b from rounding so that `b` lands right of the cut
    if m >= b {
        a
    } else {
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
        n_samples: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn constant(value: f64, n_samples: usize) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf {
                value,
                n_samples: n_samples as u32,
            }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature as usize] < threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, left as usize).max(walk(nodes, right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Best-first expansion stops at this many leaves.
    pub max_leaves: Option<usize>,
    /// Features drawn per split; `None` considers every feature.
    pub max_features: Option<usize>,
    pub lambda_l1: f64,
    pub lambda_l2: f64,
}

impl GrowParams {
    pub fn cart(max_depth: usize, min_samples_split: usize, min_samples_leaf: usize) -> Self {
        GrowParams {
            max_depth,
            min_samples_split,
            min_samples_leaf,
            max_leaves: None,
            max_features: None,
            lambda_l1: 0.0,
            lambda_l2: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Bin {
    sum: f64,
    count: u32,
}

#[derive(Debug, Clone, Copy)]
struct SplitInfo {
    feature: usize,
    bin: u8,
    gain: f64,
}

struct Open {
    node: usize,
    rows: Vec<u32>,
    depth: usize,
    sum: f64,
    count: u32,
    hist: Option<Vec<Bin>>,
    best: Option<SplitInfo>,
}

/// Leaf rows produced by a grow call, used by boosting to update the
/// training predictions without re-traversing the tree.
pub struct GrownTree {
    pub tree: RegressionTree,
    pub leaves: Vec<(Vec<u32>, f64)>,
}

#[inline]
fn soft(sum: f64, l1: f64) -> f64 {
    if sum > l1 {
        sum - l1
    } else if sum < -l1 {
        sum + l1
    } else {
        0.0
    }
}

struct Grower<'a, R: Rng> {
    data: &'a BinnedMatrix,
    grad: &'a [f64],
    params: &'a GrowParams,
    rng: Option<&'a mut R>,
    subsample: bool,
}

impl<R: Rng> Grower<'_, R> {
    fn score(&self, sum: f64, count: u32) -> f64 {
        let s = soft(sum, self.params.lambda_l1);
        s * s / (count as f64 + self.params.lambda_l2)
    }

    fn leaf_value(&self, sum: f64, count: u32) -> f64 {
        soft(sum, self.params.lambda_l1) / (count as f64 + self.params.lambda_l2)
    }

    fn can_split(&self, count: u32, depth: usize) -> bool {
        let c = count as usize;
        depth < self.params.max_depth
            && c >= self.params.min_samples_split.max(2)
            && c >= 2 * self.params.min_samples_leaf.max(1)
    }

    fn build_hist(&self, rows: &[u32], features: &[usize]) -> Vec<Bin> {
        let p = self.data.n_cols;
        let mut hist = vec![Bin::default(); features.len() * STRIDE];
        if features.len() == p {
            for &r in rows {
                let g = self.grad[r as usize];
                let rb = self.data.row(r as usize);
                for (j, &b) in rb.iter().enumerate() {
                    let h = &mut hist[j * STRIDE + b as usize];
                    h.sum += g;
                    h.count += 1;
                }
            }
        } else {
            for &r in rows {
                let g = self.grad[r as usize];
                let rb = self.data.row(r as usize);
                for (k, &f) in features.iter().enumerate() {
                    let h = &mut hist[k * STRIDE + rb[f] as usize];
                    h.sum += g;
                    h.count += 1;
                }
            }
        }
        hist
    }

    fn best_split(&self, hist: &[Bin], features: &[usize], sum: f64, count: u32) -> Option<SplitInfo> {
        let parent = self.score(sum, count);
        let min_leaf = self.params.min_samples_leaf.max(1) as u32;
        let tol = 1e-10 * (1.0 + parent.abs());
        let mut best: Option<SplitInfo> = None;
        for (k, &f) in features.iter().enumerate() {
            let nb = self.data.cuts[f].len() + 1;
            let h = &hist[k * STRIDE..k * STRIDE + nb];
            let (mut ls, mut lc) = (0.0, 0u32);
            for (b, bin) in h.iter().enumerate().take(nb - 1) {
                ls += bin.sum;
                lc += bin.count;
                if lc < min_leaf {
                    continue;
                }
                let rc = count - lc;
                if rc < min_leaf {
                    break;
                }
                let gain = self.score(ls, lc) + self.score(sum - ls, rc) - parent;
                if gain > tol && best.is_none_or(|bst| gain > bst.gain) {
                    best = Some(SplitInfo {
                        feature: f,
                        bin: b as u8,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn features(&mut self) -> Vec<usize> {
        let p = self.data.n_cols;
        match (self.subsample, self.rng.as_deref_mut()) {
            (true, Some(rng)) => {
                let k = self.params.max_features.unwrap().clamp(1, p);
                let mut f = sample(rng, p, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    fn evaluate(&mut self, open: &mut Open) {
        if !self.can_split(open.count, open.depth) {
            open.hist = None;
            open.best = None;
            return;
        }
        let features = self.features();
        let hist = match open.hist.take() {
            Some(h) => h,
            None => self.build_hist(&open.rows, &features),
        };
        open.best = self.best_split(&hist, &features, open.sum, open.count);
        if open.best.is_some() && !self.subsample {
            open.hist = Some(hist);
        }
    }

    fn grow(mut self, rows: Vec<u32>) -> GrownTree {
        let sum: f64 = rows.iter().map(|&r| self.grad[r as usize]).sum();
        let count = rows.len() as u32;
        let mut nodes = vec![Node::Leaf {
            value: self.leaf_value(sum, count),
            n_samples: count,
        }];
        let mut root = Open {
            node: 0,
            rows,
            depth: 0,
            sum,
            count,
            hist: None,
            best: None,
        };
        self.evaluate(&mut root);

        let mut open: VecDeque<Open> = VecDeque::from([root]);
        let mut done: Vec<Open> = Vec::new();
        let max_leaves = self.params.max_leaves.unwrap_or(usize::MAX).max(1);
        loop {
            if open.len() + done.len() >= max_leaves {
                break;
            }
            // highest gain first; ties go to the earliest node
            let pick = open
                .iter()
                .enumerate()
                .filter_map(|(i, o)| o.best.map(|b| (i, o.node, b.gain)))
                .fold(None::<(usize, usize, f64)>, |acc, cur| match acc {
                    Some(a) if a.2 > cur.2 || (a.2 == cur.2 && a.1 < cur.1) => Some(a),
                    _ => Some(cur),
                });
            let Some((idx, _, _)) = pick else { break };
            let parent = open.remove(idx).unwrap();
            let split = parent.best.unwrap();
            let f = split.feature;
            let (mut lrows, mut rrows) = (Vec::new(), Vec::new());
            let (mut lsum, mut rsum) = (0.0, 0.0);
            for &r in &parent.rows {
                let g = self.grad[r as usize];
                if self.data.row(r as usize)[f] <= split.bin {
                    lrows.push(r);
                    lsum += g;
                } else {
                    rrows.push(r);
                    rsum += g;
                }
            }
            let (lc, rc) = (lrows.len() as u32, rrows.len() as u32);
            let (li, ri) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf {
                value: self.leaf_value(lsum, lc),
                n_samples: lc,
            });
            nodes.push(Node::Leaf {
                value: self.leaf_value(rsum, rc),
                n_samples: rc,
            });
            nodes[parent.node] = Node::Split {
                feature: f as u32,
                threshold: self.data.cuts[f][split.bin as usize],
                left: li as u32,
                right: ri as u32,
            };

            let depth = parent.depth + 1;
            let mut left = Open {
                node: li,
                rows: lrows,
                depth,
                sum: lsum,
                count: lc,
                hist: None,
                best: None,
            };
            let mut right = Open {
                node: ri,
                rows: rrows,
                depth,
                sum: rsum,
                count: rc,
                hist: None,
                best: None,
            };
            if let Some(mut phist) = parent.hist {
                let all: Vec<usize> = (0..self.data.n_cols).collect();
                let (small, large) = if lc <= rc {
                    (&mut left, &mut right)
                } else {
                    (&mut right, &mut left)
                };
                if self.can_split(small.count, depth) || self.can_split(large.count, depth) {
                    let shist = self.build_hist(&small.rows, &all);
                    for (p, s) in phist.iter_mut().zip(&shist) {
                        p.sum -= s.sum;
                        p.count -= s.count;
                    }
                    small.hist = Some(shist);
                    large.hist = Some(phist);
                }
            }
            self.evaluate(&mut left);
            self.evaluate(&mut right);
            for o in [left, right] {
                if o.best.is_some() {
                    open.push_back(o);
                } else {
                    done.push(o);
                }
            }
        }

        let leaves = open
            .into_iter()
            .chain(done)
            .map(|o| {
                let v = match nodes[o.node] {
                    Node::Leaf { value, .. } => value,
                    Node::Split { .. } => unreachable!("open node is a leaf"),
                };
                (o.rows, v)
            })
            .collect();
        GrownTree {
            tree: RegressionTree { nodes },
            leaves,
        }
    }
}

/// Grows one tree fitting `grad` (targets or residuals) over `rows`.
/// `rng` is required when `params.max_features` restricts the candidates.
pub fn grow_tree<R: Rng>(
    data: &BinnedMatrix,
    grad: &[f64],
    rows: Vec<u32>,
    params: &GrowParams,
    rng: Option<&mut R>,
) -> GrownTree {
    let subsample = params
        .max_features
        .is_some_and(|k| k < data.n_cols && rng.is_some());
    Grower {
        data,
        grad,
        params,
        rng,
        subsample,
    }
    .grow(rows)
}
