//! Coverage machinery: delta-ball graphs, kernels, and the weighted
//! multi-embedding coverage functional
//!
//! ```text
//! F(L) = sum_m  alpha_m * | union_{x in L} B_delta_m(x) |
//! ```
//!
//! The ground set is the *disjoint union* of one copy of the points per
//! embedding: a point can be covered in one embedding and still uncovered in
//! another, and [`CoverageState`] tracks one uncovered mask per embedding.
//! `F` is non-negative, normalized, monotone and submodular, which is what
//! the greedy selector's (1 - 1/e) guarantee rests on;
//! [`check_submodularity`] probes those inequalities on random inclusion
//! triples.
//!
//! Ball membership uses an inclusive boundary (`dist <= delta`), so every
//! point always covers at least itself.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ndarray::Array2;

use crate::embedding::DistanceMatrix;
use crate::error::{Error, Result};

/// Per-point delta-ball membership lists over one embedding.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    /// `balls[i]` = sorted indices j with `dist(i, j) <= delta` (i included).
    balls: Vec<Vec<usize>>,
    delta: f64,
    embedding_name: String,
}

impl NeighborGraph {
    pub fn balls(&self) -> &[Vec<usize>] {
        &self.balls
    }

    pub fn ball(&self, i: usize) -> &[usize] {
        &self.balls[i]
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn embedding_name(&self) -> &str {
        &self.embedding_name
    }

    pub fn n(&self) -> usize {
        self.balls.len()
    }
}

/// Symmetric similarity matrix: a single RBF kernel (unit diagonal) or a
/// weighted combination (diagonal = sum of the weights).
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    values: Array2<f64>,
    /// Diagonal value: 1 for a plain RBF kernel, `sum(alpha)` for a combined
    /// kernel.
    diagonal: f64,
}

impl KernelMatrix {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn diagonal(&self) -> f64 {
        self.diagonal
    }
}

/// Uncovered masks per embedding (the disjoint-union ground set) plus the
/// embedding weights. One selection run owns one state.
#[derive(Debug, Clone)]
pub struct CoverageState {
    /// `uncovered[m][i]` — is point i still uncovered in embedding m?
    uncovered: Vec<Vec<bool>>,
    weights: Vec<f64>,
}

impl CoverageState {
    pub fn new(n: usize, weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Domain(format!(
                "coverage weights must be positive, got {weights:?}"
            )));
        }
        Ok(CoverageState {
            uncovered: vec![vec![true; n]; weights.len()],
            weights: weights.to_vec(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weighted count of still-uncovered ball members of candidate `x`.
    pub fn marginal_gain(&self, graphs: &[NeighborGraph], x: usize) -> f64 {
        let mut gain = 0.0;
        for (m, graph) in graphs.iter().enumerate() {
            let count = graph
                .ball(x)
                .iter()
                .filter(|&&j| self.uncovered[m][j])
                .count();
            gain += self.weights[m] * count as f64;
        }
        gain
    }

    /// Mark every ball member of `x` covered, in every embedding.
    pub fn cover(&mut self, graphs: &[NeighborGraph], x: usize) {
        for (m, graph) in graphs.iter().enumerate() {
            for &j in graph.ball(x) {
                self.uncovered[m][j] = false;
            }
        }
    }
}

/// Materialize the delta-ball graph of one embedding: inclusive boundary,
/// self always a member.
pub fn build_ball_graph(dist: &DistanceMatrix, delta: f64) -> Result<NeighborGraph> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta must be > 0, got {delta}")));
    }
    let n = dist.n();
    let balls = (0..n)
        .into_par_iter()
        .map(|i| (0..n).filter(|&j| dist.get(i, j) <= delta).collect())
        .collect();
    Ok(NeighborGraph {
        balls,
        delta,
        embedding_name: String::new(),
    })
}

/// Same as [`build_ball_graph`] with an embedding name recorded for reports.
pub fn build_ball_graph_named(
    dist: &DistanceMatrix,
    delta: f64,
    embedding_name: &str,
) -> Result<NeighborGraph> {
    let mut graph = build_ball_graph(dist, delta)?;
    graph.embedding_name = embedding_name.to_string();
    Ok(graph)
}

/// Evaluate `F(selected)` from scratch.
///
/// Index outside the pool is a domain error. Weighted counts are summed in
/// embedding order so repeated evaluations are bit-identical.
pub fn coverage_value(
    selected: &[usize],
    graphs: &[NeighborGraph],
    weights: &[f64],
) -> Result<f64> {
    if graphs.len() != weights.len() {
        return Err(Error::Structure(format!(
            "{} graphs but {} weights",
            graphs.len(),
            weights.len()
        )));
    }
    let mut total = 0.0;
    for (graph, &alpha) in graphs.iter().zip(weights) {
        let n = graph.n();
        let mut covered = vec![false; n];
        for &x in selected {
            if x >= n {
                return Err(Error::Domain(format!(
                    "selected index {x} outside pool of size {n}"
                )));
            }
            for &j in graph.ball(x) {
                covered[j] = true;
            }
        }
        let count = covered.iter().filter(|&&c| c).count();
        total += alpha * count as f64;
    }
    Ok(total)
}

/// RBF kernel on a precomputed distance matrix:
/// `K[i][j] = exp(-dist[i][j]^2 / (2 sigma^2))`.
///
/// The exponent consumes whatever distance the pipeline uses (cosine by
/// default), matching a bandwidth that was itself estimated on those
/// distances.
pub fn rbf_kernel_matrix(dist: &DistanceMatrix, sigma: f64) -> Result<KernelMatrix> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!(
            "rbf kernel needs sigma > 0, got {sigma} (all points identical?)"
        )));
    }
    let n = dist.n();
    let denom = 2.0 * sigma * sigma;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        let d = dist.get(i, j);
                        (-(d * d) / denom).exp()
                    }
                })
                .collect()
        })
        .collect();
    let mut values = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            values[(i, j)] = v;
        }
    }
    Ok(KernelMatrix {
        values,
        diagonal: 1.0,
    })
}

/// Elementwise weighted sum of kernels: `K = sum_m alpha_m K_m`.
pub fn combined_kernel(kernels: &[KernelMatrix], weights: &[f64]) -> Result<KernelMatrix> {
    if kernels.is_empty() || kernels.len() != weights.len() {
        return Err(Error::Structure(format!(
            "{} kernels but {} weights",
            kernels.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::Domain(format!(
            "kernel weights must be positive, got {weights:?}"
        )));
    }
    let n = kernels[0].n();
    for k in kernels {
        if k.n() != n {
            return Err(Error::Structure(format!(
                "kernel dimension mismatch: {} vs {n}",
                k.n()
            )));
        }
    }
    let mut values = Array2::zeros((n, n));
    let mut diagonal = 0.0;
    for (kernel, &alpha) in kernels.iter().zip(weights) {
        values.scaled_add(alpha, kernel.values());
        diagonal += alpha * kernel.diagonal;
    }
    Ok(KernelMatrix { values, diagonal })
}

/// One sampled violation of monotonicity or diminishing returns.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SubmodularityCounterexample {
    pub set_a: Vec<usize>,
    pub set_b: Vec<usize>,
    pub candidate: usize,
    pub gain_a: f64,
    pub gain_b: f64,
    pub value_a: f64,
    pub value_b: f64,
    pub kind: String,
}

/// Outcome of a randomized submodularity/monotonicity probe.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SubmodularityReport {
    pub trials: usize,
    pub monotonicity_violations: usize,
    pub submodularity_violations: usize,
    pub counterexample: Option<SubmodularityCounterexample>,
    pub passed: bool,
}

/// Comparison slack for the submodularity probe; coverage values are
/// integer counts scaled by alpha, so any genuine violation is far larger.
pub const SUBMODULARITY_TOL: f64 = 1e-9;

/// Sample `trials` random triples `(A subset of B, x not in B)` and check
/// `F(A + x) - F(A) >= F(B + x) - F(B)` and `F(A) <= F(B)`.
pub fn check_submodularity(
    graphs: &[NeighborGraph],
    weights: &[f64],
    trials: usize,
    seed: u64,
) -> Result<SubmodularityReport> {
    if graphs.is_empty() || graphs.len() != weights.len() {
        return Err(Error::Structure(format!(
            "{} graphs but {} weights",
            graphs.len(),
            weights.len()
        )));
    }
    let n = graphs[0].n();
    if n < 2 {
        return Err(Error::Degenerate(
            "submodularity probe needs at least 2 points".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SubmodularityReport {
        trials,
        monotonicity_violations: 0,
        submodularity_violations: 0,
        counterexample: None,
        passed: true,
    };
    for _ in 0..trials {
        // B is a random proper subset so that some x outside B exists;
        // A is a random subset of B.
        let mut b: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        if b.len() == n {
            b.remove(rng.random_range(0..b.len()));
        }
        let a: Vec<usize> = b.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        let outside: Vec<usize> = (0..n).filter(|i| !b.contains(i)).collect();
        let x = outside[rng.random_range(0..outside.len())];

        let value_a = coverage_value(&a, graphs, weights)?;
        let value_b = coverage_value(&b, graphs, weights)?;
        let mut a_x = a.clone();
        a_x.push(x);
        let mut b_x = b.clone();
        b_x.push(x);
        let gain_a = coverage_value(&a_x, graphs, weights)? - value_a;
        let gain_b = coverage_value(&b_x, graphs, weights)? - value_b;

        let mono_bad = value_a > value_b + SUBMODULARITY_TOL;
        let sub_bad = gain_a < gain_b - SUBMODULARITY_TOL;
        if mono_bad {
            report.monotonicity_violations += 1;
        }
        if sub_bad {
            report.submodularity_violations += 1;
        }
        if (mono_bad || sub_bad) && report.counterexample.is_none() {
            report.counterexample = Some(SubmodularityCounterexample {
                set_a: a,
                set_b: b,
                candidate: x,
                gain_a,
                gain_b,
                value_a,
                value_b,
                kind: if sub_bad {
                    "diminishing-returns".into()
                } else {
                    "monotonicity".into()
                },
            });
        }
    }
    report.passed = report.monotonicity_violations == 0 && report.submodularity_violations == 0;
    Ok(report)
}
