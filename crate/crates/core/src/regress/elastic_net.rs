//! Elastic net by cyclic coordinate descent on standardized features.
//!
//! Minimizes `(1/2n)·‖y − β₀ − Zβ‖² + α·(l1·‖β‖₁ + (1−l1)/2·‖β‖²)` where `Z`
//! holds the non-constant columns scaled to mean 0 and population sd 1. The
//! covariance form is used: `G = ZᵀZ/n` is computed once per design and can
//! be shared by every grid point and target trained on the same rows.

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::{Error, Result};

pub const TOLERANCE: f64 = 1e-6;
pub const MAX_SWEEPS: usize = 10_000;
const CONSTANT_SD: f64 = 1e-12;

/// Standardized training design.
#[derive(Debug, Clone)]
pub struct Design {
    n: usize,
    p: usize,
    means: Vec<f64>,
    scales: Vec<f64>,
    kept: Vec<usize>,
    /// Standardized kept columns, column-major (`kept.len() × n`).
    z: Vec<f64>,
    gram: Vec<f64>,
}

impl Design {
    pub fn new(x: &Matrix) -> Result<Self> {
        let (n, p) = (x.n_rows(), x.n_cols());
        if n == 0 {
            return Err(Error::Empty("elastic net training rows"));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("elastic net features"));
        }
        let mut means = vec![0.0; p];
        let mut scales = vec![0.0; p];
        for j in 0..p {
            let m = (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64;
            let var = (0..n).map(|i| (x.get(i, j) - m).powi(2)).sum::<f64>() / n as f64;
            means[j] = m;
            scales[j] = var.sqrt();
        }
        let kept: Vec<usize> = (0..p)
            .filter(|&j| scales[j] > CONSTANT_SD * (1.0 + means[j].abs()))
            .collect();
        let k = kept.len();
        let mut z = vec![0.0; k * n];
        for (c, &j) in kept.iter().enumerate() {
            let col = &mut z[c * n..(c + 1) * n];
            for (i, v) in col.iter_mut().enumerate() {
                *v = (x.get(i, j) - means[j]) / scales[j];
            }
        }
        let mut gram = vec![0.0; k * k];
        for a in 0..k {
            let za = &z[a * n..(a + 1) * n];
            for b in a..k {
                let zb = &z[b * n..(b + 1) * n];
                let g = za.iter().zip(zb).map(|(u, v)| u * v).sum::<f64>() / n as f64;
                gram[a * k + b] = g;
                gram[b * k + a] = g;
            }
        }
        Ok(Design {
            n,
            p,
            means,
            scales,
            kept,
            z,
            gram,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    /// Indices of the non-constant input columns.
    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    /// Standardized value of kept column `c` at row `i`.
    pub fn z(&self, i: usize, c: usize) -> f64 {
        self.z[c * self.n + i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetModel {
    pub intercept: f64,
    /// Raw-scale coefficients, one per input column (0 for dropped columns).
    pub coefficients: Vec<f64>,
    /// Coefficients in standardized coordinates, one per kept column.
    pub standardized: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

impl ElasticNetModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }
}

fn check_penalty(alpha: f64, l1_ratio: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be ≥ 0, got {alpha}")));
    }
    if !(0.0..=1.0).contains(&l1_ratio) {
        return Err(Error::invalid(format!(
            "l1_ratio must lie in [0, 1], got {l1_ratio}"
        )));
    }
    Ok(())
}

pub fn fit(design: &Design, y: &[f64], alpha: f64, l1_ratio: f64) -> Result<ElasticNetModel> {
    check_penalty(alpha, l1_ratio)?;
    if y.len() != design.n {
        return Err(Error::DimensionMismatch {
            expected: design.n,
            actual: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("elastic net targets"));
    }
    let n = design.n;
    let k = design.kept.len();
    let y_mean = y.iter().sum::<f64>() / n as f64;

    // q = Zᵀ(y − ȳ − Zβ)/n, kept current as β changes
    let mut q: Vec<f64> = (0..k)
        .map(|c| {
            let zc = &design.z[c * n..(c + 1) * n];
            zc.iter().zip(y).map(|(z, v)| z * (v - y_mean)).sum::<f64>() / n as f64
        })
        .collect();
    let mut beta = vec![0.0; k];
    let l1 = alpha * l1_ratio;
    let l2 = alpha * (1.0 - l1_ratio);
    let mut sweeps = 0;
    let mut converged = k == 0;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..k {
            let gjj = design.gram[j * k + j];
            let rho = q[j] + gjj * beta[j];
            let new = soft(rho, l1) / (gjj + l2);
            let delta = new - beta[j];
            if delta != 0.0 {
                beta[j] = new;
                let gj = &design.gram[j * k..(j + 1) * k];
                for (qi, g) in q.iter_mut().zip(gj) {
                    *qi -= delta * g;
                }
                max_change = max_change.max(delta.abs());
            }
        }
        converged = max_change < TOLERANCE;
    }

    let mut coefficients = vec![0.0; design.p];
    let mut intercept = y_mean;
    for (c, &j) in design.kept.iter().enumerate() {
        let b = beta[c] / design.scales[j];
        coefficients[j] = b;
        intercept -= b * design.means[j];
    }
    Ok(ElasticNetModel {
        intercept,
        coefficients,
        standardized: beta,
        sweeps,
        converged,
    })
}

pub fn train(x: &Matrix, y: &[f64], alpha: f64, l1_ratio: f64) -> Result<ElasticNetModel> {
    check_penalty(alpha, l1_ratio)?;
    fit(&Design::new(x)?, y, alpha, l1_ratio)
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}
