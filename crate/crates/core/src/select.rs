//! Greedy exemplar selectors and baselines.
//!
//! Two coverage-driven selectors share the same shape: score every remaining
//! candidate, take the argmax (ties broken by lowest index), update state.
//!
//! * ProbCover-style: the score is the weighted count of still-uncovered
//!   delta-ball members across embeddings; covering is hard set removal.
//! * MaxHerding-style: the score is the average kernel-similarity headroom
//!   `G(x) = (1/n) sum_i max(K[i][x] - c_i, 0)` over a combined kernel, and
//!   the running state `c_i` keeps each point's best similarity to the
//!   selected set.
//!
//! Both objectives are monotone submodular, so greedy per-step gains are
//! non-increasing and the selection is a (1 - 1/e) approximation of the
//! optimum; [`brute_force_max_coverage`] provides the exact optimum on
//! instances small enough to enumerate.
//!
//! Baselines: classic herding (approximate the class mean in feature space)
//! and seeded uniform random sampling.

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coverage::{coverage_value, CoverageState, KernelMatrix, NeighborGraph};
use crate::embedding::EmbeddingView;
use crate::error::{Error, Result};
use crate::scale::ScaleProfile;

/// Selection strategy names as they appear in configs and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MersProbcover,
    MersMaxherding,
    Probcover,
    Maxherding,
    Herding,
    Random,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::MersProbcover => "mers-probcover",
            Method::MersMaxherding => "mers-maxherding",
            Method::Probcover => "probcover",
            Method::Maxherding => "maxherding",
            Method::Herding => "herding",
            Method::Random => "random",
        }
    }

    /// True for methods that consume several embeddings at once.
    pub fn is_multi(&self) -> bool {
        matches!(self, Method::MersProbcover | Method::MersMaxherding)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mers-probcover" => Ok(Method::MersProbcover),
            "mers-maxherding" => Ok(Method::MersMaxherding),
            "probcover" => Ok(Method::Probcover),
            "maxherding" => Ok(Method::Maxherding),
            "herding" => Ok(Method::Herding),
            "random" => Ok(Method::Random),
            other => Err(Error::Domain(format!("unknown method `{other}`"))),
        }
    }
}

/// Output of one selection run over one class pool.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    /// Chosen point indices, in selection order, no duplicates.
    pub chosen: Vec<usize>,
    /// Final objective: `F(chosen)` for coverage, mean max-similarity for
    /// herding-style methods, final mean-residual for the herding baseline.
    pub objective: f64,
    /// Marginal gain recorded at each step.
    pub per_step_gain: Vec<f64>,
    pub method: Method,
    /// Scale profiles used (filled in by the pipeline; empty for direct
    /// invocations).
    pub scales: Vec<ScaleProfile>,
    /// Set when the requested budget exceeded the pool and was clamped.
    pub clamped: bool,
}

impl SelectionResult {
    fn new(method: Method) -> Self {
        SelectionResult {
            chosen: Vec::new(),
            objective: 0.0,
            per_step_gain: Vec::new(),
            method,
            scales: Vec::new(),
            clamped: false,
        }
    }
}

/// Running MaxHerding state: per-point best similarity to the selected set.
#[derive(Debug, Clone)]
pub struct HerdingState {
    pub c: Vec<f64>,
}

impl HerdingState {
    pub fn new(n: usize) -> Self {
        HerdingState { c: vec![0.0; n] }
    }
}

fn check_budget(budget: usize, n: usize) -> Result<(usize, bool)> {
    if budget == 0 {
        return Err(Error::Budget("selection budget must be >= 1".into()));
    }
    Ok((budget.min(n), budget > n))
}

/// Deterministic argmax over candidate scores: highest gain wins, ties go to
/// the lowest index. `None` entries are non-candidates.
fn argmax(scores: &[Option<f64>]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, score) in scores.iter().enumerate() {
        if let Some(g) = score {
            match best {
                Some((_, bg)) if *g <= bg => {}
                _ => best = Some((i, *g)),
            }
        }
    }
    best
}

/// Greedy weighted multi-embedding coverage selection.
///
/// Each step picks the candidate covering the most still-uncovered weighted
/// ball members across all embeddings, then marks its balls covered in every
/// embedding. `objective` telescopes: it equals the sum of per-step gains
/// and `F(chosen)`.
pub fn greedy_probcover_multi(
    graphs: &[NeighborGraph],
    weights: &[f64],
    budget: usize,
) -> Result<SelectionResult> {
    greedy_probcover_inner(graphs, weights, budget, Method::MersProbcover)
}

/// Single-embedding specialization (weight 1); identical numerics to the
/// multi variant with M = 1.
pub fn greedy_probcover(graph: &NeighborGraph, budget: usize) -> Result<SelectionResult> {
    greedy_probcover_inner(
        std::slice::from_ref(graph),
        &[1.0],
        budget,
        Method::Probcover,
    )
}

fn greedy_probcover_inner(
    graphs: &[NeighborGraph],
    weights: &[f64],
    budget: usize,
    method: Method,
) -> Result<SelectionResult> {
    if graphs.is_empty() || graphs.len() != weights.len() {
        return Err(Error::Structure(format!(
            "{} graphs but {} weights",
            graphs.len(),
            weights.len()
        )));
    }
    let n = graphs[0].n();
    if graphs.iter().any(|g| g.n() != n) {
        return Err(Error::Structure(
            "all graphs must cover the same point set".into(),
        ));
    }
    let (budget, clamped) = check_budget(budget, n)?;

    let mut state = CoverageState::new(n, weights)?;
    let mut result = SelectionResult::new(method);
    result.clamped = clamped;
    let mut selected = vec![false; n];
    for _ in 0..budget {
        let scores: Vec<Option<f64>> = (0..n)
            .into_par_iter()
            .map(|x| {
                if selected[x] {
                    None
                } else {
                    Some(state.marginal_gain(graphs, x))
                }
            })
            .collect();
        let (best, gain) = argmax(&scores).expect("budget <= n leaves a candidate");
        selected[best] = true;
        state.cover(graphs, best);
        result.chosen.push(best);
        result.per_step_gain.push(gain);
        result.objective += gain;
    }
    Ok(result)
}

/// Greedy MaxHerding selection over a combined kernel.
///
/// State starts at `c = 0` for every invocation (selection is class-local
/// and episode-local). `objective` is the final `(1/n) sum_i c_i`, which
/// telescopes to the sum of per-step gains.
pub fn greedy_maxherding_multi(kernel: &KernelMatrix, budget: usize) -> Result<SelectionResult> {
    greedy_maxherding_inner(kernel, budget, Method::MersMaxherding)
}

/// Single-kernel specialization; identical numerics to the multi variant.
pub fn greedy_maxherding(kernel: &KernelMatrix, budget: usize) -> Result<SelectionResult> {
    greedy_maxherding_inner(kernel, budget, Method::Maxherding)
}

fn greedy_maxherding_inner(
    kernel: &KernelMatrix,
    budget: usize,
    method: Method,
) -> Result<SelectionResult> {
    let n = kernel.n();
    let (budget, clamped) = check_budget(budget, n)?;
    let mut state = HerdingState::new(n);
    let mut result = SelectionResult::new(method);
    result.clamped = clamped;
    let mut selected = vec![false; n];
    for _ in 0..budget {
        let scores: Vec<Option<f64>> = (0..n)
            .into_par_iter()
            .map(|x| {
                if selected[x] {
                    return None;
                }
                let mut acc = 0.0;
                for i in 0..n {
                    let headroom = kernel.get(i, x) - state.c[i];
                    if headroom > 0.0 {
                        acc += headroom;
                    }
                }
                Some(acc / n as f64)
            })
            .collect();
        let (best, gain) = argmax(&scores).expect("budget <= n leaves a candidate");
        selected[best] = true;
        for i in 0..n {
            let sim = kernel.get(i, best);
            if sim > state.c[i] {
                state.c[i] = sim;
            }
        }
        result.chosen.push(best);
        result.per_step_gain.push(gain);
    }
    result.objective = state.c.iter().sum::<f64>() / n as f64;
    Ok(result)
}

/// Classic herding baseline: iteratively add the point whose inclusion
/// brings the running selection mean closest to the class mean.
///
/// `per_step_gain` records the residual decrease per step (may be negative
/// once the mean cannot be approached further); `objective` is the final
/// residual norm, lower is better.
pub fn herding_baseline(view: &EmbeddingView, budget: usize) -> Result<SelectionResult> {
    let n = view.n();
    let d = view.dim();
    let (budget, clamped) = check_budget(budget, n)?;
    let mut mean = vec![0.0; d];
    for row in view.points().outer_iter() {
        for (m, v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    let mut result = SelectionResult::new(Method::Herding);
    result.clamped = clamped;
    let mut selected = vec![false; n];
    let mut sum = vec![0.0; d];
    let mut previous_residual = {
        // residual of the empty selection: distance from mean to origin-mean
        // convention is not meaningful, so start from ||mean|| (selection of
        // nothing approximates nothing).
        mean.iter().map(|v| v * v).sum::<f64>().sqrt()
    };
    for step in 0..budget {
        let count = (step + 1) as f64;
        let residuals: Vec<Option<f64>> = (0..n)
            .into_par_iter()
            .map(|x| {
                if selected[x] {
                    return None;
                }
                let row = view.row(x);
                let mut acc = 0.0;
                for j in 0..d {
                    let candidate_mean = (sum[j] + row[j]) / count;
                    let diff = mean[j] - candidate_mean;
                    acc += diff * diff;
                }
                Some(acc.sqrt())
            })
            .collect();
        // argmin residual, ties to lowest index
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in residuals.iter().enumerate() {
            if let Some(r) = r {
                match best {
                    Some((_, br)) if *r >= br => {}
                    _ => best = Some((i, *r)),
                }
            }
        }
        let (best, residual) = best.expect("budget <= n leaves a candidate");
        selected[best] = true;
        for (s, v) in sum.iter_mut().zip(view.row(best).iter()) {
            *s += v;
        }
        result.chosen.push(best);
        result.per_step_gain.push(previous_residual - residual);
        previous_residual = residual;
        result.objective = residual;
    }
    Ok(result)
}

/// Uniform sample without replacement, deterministic for a given seed.
pub fn random_baseline(n: usize, budget: usize, seed: u64) -> Result<SelectionResult> {
    let (budget, clamped) = check_budget(budget, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, n, budget).into_vec();
    Ok(SelectionResult {
        chosen,
        objective: 0.0,
        per_step_gain: Vec::new(),
        method: Method::Random,
        scales: Vec::new(),
        clamped,
    })
}

/// Cap on the number of subsets [`brute_force_max_coverage`] will enumerate.
pub const BRUTE_FORCE_GUARD: u128 = 1_000_000;

/// Exact maximizer of the coverage functional over all size-`budget`
/// subsets; the lexicographically smallest subset wins ties.
///
/// Refuses to run when `C(n, budget)` exceeds [`BRUTE_FORCE_GUARD`].
pub fn brute_force_max_coverage(
    graphs: &[NeighborGraph],
    weights: &[f64],
    budget: usize,
) -> Result<(Vec<usize>, f64)> {
    if graphs.is_empty() || graphs.len() != weights.len() {
        return Err(Error::Structure(format!(
            "{} graphs but {} weights",
            graphs.len(),
            weights.len()
        )));
    }
    let n = graphs[0].n();
    let budget = budget.min(n);
    if budget == 0 {
        return Err(Error::Budget("selection budget must be >= 1".into()));
    }
    let combos = binomial(n as u128, budget as u128);
    if combos > BRUTE_FORCE_GUARD {
        return Err(Error::Guard(format!(
            "C({n}, {budget}) = {combos} subsets exceeds the {BRUTE_FORCE_GUARD} cap"
        )));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for subset in (0..n).combinations(budget) {
        let value = coverage_value(&subset, graphs, weights)?;
        match &best {
            // strict improvement only: combinations() yields lexicographically
            // ascending subsets, so keeping the first max keeps the smallest.
            Some((_, bv)) if value <= *bv => {}
            _ => best = Some((subset, value)),
        }
    }
    Ok(best.expect("budget >= 1 and n >= 1"))
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
        if acc > BRUTE_FORCE_GUARD * 1000 {
            return u128::MAX;
        }
    }
    acc
}
