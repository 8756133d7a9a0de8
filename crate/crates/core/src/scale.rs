//! Data-driven scale estimation.
//!
//! Every hyper-parameter of the selectors is derived from the data itself,
//! per class and per embedding:
//!
//! * `rho_k(x)` — mean distance from `x` to its k nearest neighbours
//!   (self excluded), giving the kNN density estimate `f_k(x) = k / rho_k(x)`;
//! * `alpha = median(f_k) / median(f_1)` — the embedding weight. The ratio
//!   cancels any global scale factor, so embeddings from heterogeneous
//!   backbones become comparable;
//! * `beta = alpha_supervised / alpha_self_supervised` — reported, never
//!   clamped;
//! * `sigma` — RBF bandwidth via the median heuristic (median pairwise
//!   distance);
//! * `delta` — ball radius: per-point median distance to the k nearest
//!   neighbours, then the median over points;
//! * `k` — the memory-aware ratio `round(n_class / budget_class)`, clamped
//!   into `[1, n-1]`.
//!
//! Medians are computed by a full deterministic sort; an even-length median
//! is the mean of the two central order statistics.

use serde::{Deserialize, Serialize};

use crate::embedding::DistanceMatrix;
use crate::error::{Error, Result};

/// Floor applied to `rho` values before division, so exact duplicate points
/// produce a large-but-finite density instead of an infinite one.
pub const RHO_FLOOR: f64 = 1e-12;

/// All scale quantities for one (embedding, class) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleProfile {
    pub sigma: f64,
    pub delta: f64,
    pub alpha: f64,
    pub k_used: usize,
    pub embedding_name: String,
    pub class_label: i64,
}

/// Per-point kNN radius and density.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    /// Mean distance from each point to its k nearest neighbours.
    pub rho_k: Vec<f64>,
    /// `k / rho_k`, with the duplicate floor applied to `rho_k` first.
    pub f_hat: Vec<f64>,
    pub k: usize,
}

/// Median of a slice; even length averages the two central order statistics.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Degenerate("median of an empty list".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

/// kNN density estimate for every point of one class.
pub fn knn_density(dist: &DistanceMatrix, k: usize) -> Result<DensityEstimate> {
    if dist.n() < 2 {
        return Err(Error::Degenerate(
            "kNN density needs at least 2 points in the class".into(),
        ));
    }
    let lists = crate::embedding::knn(dist, k)?;
    let mut rho_k = Vec::with_capacity(dist.n());
    let mut f_hat = Vec::with_capacity(dist.n());
    for (i, neighbours) in lists.iter().enumerate() {
        let mut sum = 0.0;
        for &j in neighbours {
            sum += dist.get(i, j);
        }
        let rho = sum / k as f64;
        rho_k.push(rho);
        f_hat.push(k as f64 / rho.max(RHO_FLOOR));
    }
    Ok(DensityEstimate { rho_k, f_hat, k })
}

/// Embedding weight `alpha = median(f_k) / median(f_1)`.
pub fn embedding_weight(dist: &DistanceMatrix, k: usize) -> Result<f64> {
    let dk = knn_density(dist, k)?;
    let d1 = knn_density(dist, 1)?;
    Ok(median(&dk.f_hat)? / median(&d1.f_hat)?)
}

/// Ratio of two embedding weights. No clamping: a value below 1 is allowed
/// and simply reported.
pub fn beta_ratio(alpha_supervised: f64, alpha_self_supervised: f64) -> Result<f64> {
    if !(alpha_supervised > 0.0) || !(alpha_self_supervised > 0.0) {
        return Err(Error::Domain(format!(
            "beta needs positive weights, got {alpha_supervised} and {alpha_self_supervised}"
        )));
    }
    Ok(alpha_supervised / alpha_self_supervised)
}

/// Median-heuristic RBF bandwidth: the median of all pairwise distances.
pub fn median_heuristic_sigma(dist: &DistanceMatrix) -> Result<f64> {
    if dist.n() < 2 {
        return Err(Error::Degenerate(
            "median-heuristic sigma needs at least 2 points".into(),
        ));
    }
    median(&dist.upper_triangle())
}

/// Ball radius: per-point median distance to the k nearest neighbours,
/// then the median of those per-point radii.
pub fn delta_from_knn(dist: &DistanceMatrix, k: usize) -> Result<f64> {
    if dist.n() < 2 {
        return Err(Error::Degenerate(
            "delta estimation needs at least 2 points".into(),
        ));
    }
    let lists = crate::embedding::knn(dist, k)?;
    let mut radii = Vec::with_capacity(dist.n());
    for (i, neighbours) in lists.iter().enumerate() {
        let ds: Vec<f64> = neighbours.iter().map(|&j| dist.get(i, j)).collect();
        radii.push(median(&ds)?);
    }
    median(&radii)
}

/// Memory-aware neighbourhood size `k = round(n_class / budget_class)`,
/// rounded half away from zero and clamped into `[1, n_class - 1]`.
pub fn memory_aware_k(n_class: usize, budget_class: usize) -> Result<usize> {
    if n_class < 2 {
        return Err(Error::Degenerate(format!(
            "memory-aware k needs n_class >= 2, got {n_class}"
        )));
    }
    if budget_class == 0 {
        return Err(Error::Budget("budget_class must be >= 1".into()));
    }
    let raw = (n_class as f64 / budget_class as f64).round() as usize;
    Ok(raw.clamp(1, n_class - 1))
}
