//! Per-class selection orchestration: estimate scales, build graphs or
//! kernels, dispatch the configured selector, map local indices back to
//! global point ids.
//!
//! Used by the CLI `select`/`bench` commands and by the replay buffer when
//! it (re)selects exemplars for a class. Classes are independent, so
//! [`select_pool`] fans out over them in parallel; results are collected in
//! label order and are identical for any thread count.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::coverage::{build_ball_graph_named, combined_kernel, rbf_kernel_matrix};
use crate::embedding::{pairwise_distances, DistanceMatrix, EmbeddingView, LabeledPool, Metric};
use crate::error::{Error, Result};
use crate::scale::{
    delta_from_knn, embedding_weight, median_heuristic_sigma, memory_aware_k, ScaleProfile,
};
use crate::select::{
    greedy_maxherding_multi, greedy_probcover_multi, herding_baseline, random_baseline, Method,
    SelectionResult,
};

/// Where the bandwidth's median heuristic draws its pairs from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaScope {
    /// Median pairwise distance within each class (default).
    Class,
    /// Median pairwise distance over the whole episode pool.
    Episode,
}

/// Auto-estimated or pinned scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamMode {
    Auto,
    Fixed(f64),
}

/// Neighbourhood size choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KMode {
    /// Memory-aware ratio `round(n_class / budget)`.
    Auto,
    Fixed(usize),
}

/// Embedding weight choice.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightsMode {
    /// Density-ratio weights per embedding.
    Auto,
    Explicit(Vec<f64>),
}

/// Everything a selection run needs besides the data and the budget.
#[derive(Debug, Clone)]
pub struct SelectorSettings {
    pub method: Method,
    pub metric: Metric,
    pub sigma_scope: SigmaScope,
    pub weights: WeightsMode,
    pub sigma: ParamMode,
    pub delta: ParamMode,
    pub k: KMode,
    pub seed: u64,
}

impl Default for SelectorSettings {
    fn default() -> Self {
        SelectorSettings {
            method: Method::MersProbcover,
            metric: Metric::Cosine,
            sigma_scope: SigmaScope::Class,
            weights: WeightsMode::Auto,
            sigma: ParamMode::Auto,
            delta: ParamMode::Auto,
            k: KMode::Auto,
            seed: 0,
        }
    }
}

/// One class's rows across all views, with their global ids.
#[derive(Debug, Clone)]
pub struct ClassData {
    pub label: i64,
    pub global_ids: Vec<u32>,
    pub views: Vec<EmbeddingView>,
}

impl ClassData {
    /// Slice a pool down to one class.
    pub fn from_pool(pool: &LabeledPool, label: i64, rows: &[usize]) -> Result<Self> {
        let views = pool
            .views()
            .iter()
            .map(|v| v.select_rows(rows))
            .collect::<Result<Vec<_>>>()?;
        let global_ids = views[0].ids().to_vec();
        Ok(ClassData {
            label,
            global_ids,
            views,
        })
    }

    pub fn n(&self) -> usize {
        self.global_ids.len()
    }
}

/// Outcome of selecting one class.
#[derive(Debug, Clone)]
pub struct ClassSelection {
    pub class_label: i64,
    pub budget: usize,
    /// Global ids of the chosen points, in selection order.
    pub chosen_ids: Vec<u32>,
    pub result: SelectionResult,
    pub warnings: Vec<String>,
}

/// Selection over every class of a pool.
#[derive(Debug)]
pub struct PoolSelection {
    pub classes: Vec<ClassSelection>,
    pub warnings: Vec<String>,
}

/// Derive a per-class (and optionally per-episode) RNG seed from the run
/// seed; splitmix64 finalizer over the mixed-in values.
pub fn mix_seed(seed: u64, label: i64, episode: u64) -> u64 {
    let mut z = seed
        ^ (label as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ episode.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Cap the global rayon pool; `None` leaves the default. Safe to call more
/// than once (later calls are ignored by rayon).
pub fn configure_thread_cap(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

/// Per-view episode-wide sigma (median pairwise distance over the whole
/// pool), for [`SigmaScope::Episode`].
pub fn episode_sigmas(pool: &LabeledPool, metric: Metric) -> Result<Vec<f64>> {
    pool.views()
        .iter()
        .map(|view| {
            let dist = pairwise_distances(view, metric)?;
            median_heuristic_sigma(&dist)
        })
        .collect()
}

struct ClassScales {
    profiles: Vec<ScaleProfile>,
    weights: Vec<f64>,
    warnings: Vec<String>,
}

fn compute_scales(
    class: &ClassData,
    dists: &[DistanceMatrix],
    budget: usize,
    settings: &SelectorSettings,
    episode_sigma: Option<&[f64]>,
) -> Result<ClassScales> {
    let n = class.n();
    let mut warnings = Vec::new();
    let k_used = match settings.k {
        KMode::Auto => memory_aware_k(n, budget.min(n).max(1))?,
        KMode::Fixed(k) => {
            let clamped = k.clamp(1, n - 1);
            if clamped != k {
                warnings.push(format!(
                    "class {}: k={k} clamped to {clamped} (class size {n})",
                    class.label
                ));
            }
            clamped
        }
    };

    let explicit_weights = match &settings.weights {
        WeightsMode::Auto => None,
        WeightsMode::Explicit(w) => {
            if w.len() != class.views.len() {
                return Err(Error::Structure(format!(
                    "{} explicit weights for {} embeddings",
                    w.len(),
                    class.views.len()
                )));
            }
            if w.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::Domain(format!(
                    "explicit weights must be positive, got {w:?}"
                )));
            }
            Some(w.clone())
        }
    };

    let mut profiles = Vec::with_capacity(class.views.len());
    let mut weights = Vec::with_capacity(class.views.len());
    for (m, (view, dist)) in class.views.iter().zip(dists).enumerate() {
        let sigma = match settings.sigma {
            ParamMode::Fixed(s) => s,
            ParamMode::Auto => match (settings.sigma_scope, episode_sigma) {
                (SigmaScope::Episode, Some(eps)) => eps[m],
                _ => median_heuristic_sigma(dist)?,
            },
        };
        let delta = match settings.delta {
            ParamMode::Fixed(d) => d,
            ParamMode::Auto => delta_from_knn(dist, k_used)?,
        };
        let alpha = match &explicit_weights {
            Some(w) => w[m],
            None => embedding_weight(dist, k_used)?,
        };
        weights.push(alpha);
        profiles.push(ScaleProfile {
            sigma,
            delta,
            alpha,
            k_used,
            embedding_name: view.name().to_string(),
            class_label: class.label,
        });
    }
    Ok(ClassScales {
        profiles,
        weights,
        warnings,
    })
}

/// Select exemplars for one class.
///
/// A zero budget yields an empty (flagged) selection; a one-point class is
/// taken verbatim since no scale can be estimated from it. Multi-embedding
/// methods use all views; single-embedding methods use the first view.
pub fn select_for_class(
    class: &ClassData,
    budget: usize,
    settings: &SelectorSettings,
    episode_sigma: Option<&[f64]>,
) -> Result<ClassSelection> {
    let n = class.n();
    if n == 0 {
        return Err(Error::Degenerate(format!("class {} is empty", class.label)));
    }
    let mut warnings = Vec::new();
    if budget == 0 {
        warnings.push(format!(
            "class {}: zero budget, nothing selected",
            class.label
        ));
        return Ok(ClassSelection {
            class_label: class.label,
            budget,
            chosen_ids: Vec::new(),
            result: SelectionResult {
                chosen: Vec::new(),
                objective: 0.0,
                per_step_gain: Vec::new(),
                method: settings.method,
                scales: Vec::new(),
                clamped: false,
            },
            warnings,
        });
    }
    if n == 1 {
        if budget > 1 {
            warnings.push(format!(
                "class {}: budget {budget} clamped to the single available point",
                class.label
            ));
        }
        return Ok(ClassSelection {
            class_label: class.label,
            budget,
            chosen_ids: vec![class.global_ids[0]],
            result: SelectionResult {
                chosen: vec![0],
                objective: 0.0,
                per_step_gain: Vec::new(),
                method: settings.method,
                scales: Vec::new(),
                clamped: budget > 1,
            },
            warnings,
        });
    }

    let dists = class
        .views
        .iter()
        .map(|v| pairwise_distances(v, settings.metric))
        .collect::<Result<Vec<_>>>()?;
    let scales = compute_scales(class, &dists, budget, settings, episode_sigma)?;
    warnings.extend(scales.warnings);

    // Single-embedding methods (and any method on a one-view pool) run with
    // weight 1: the coverage weight only matters across embeddings, and this
    // keeps a mers-* run on M=1 input bit-identical to the single method.
    let views_used = if settings.method.is_multi() {
        class.views.len()
    } else {
        1
    };
    let selector_weights: Vec<f64> = if views_used == 1 {
        vec![match &settings.weights {
            WeightsMode::Explicit(w) => w[0],
            WeightsMode::Auto => 1.0,
        }]
    } else {
        scales.weights.clone()
    };

    let mut result = match settings.method {
        Method::MersProbcover | Method::Probcover => {
            let graphs = dists[..views_used]
                .iter()
                .zip(&scales.profiles)
                .map(|(d, p)| build_ball_graph_named(d, p.delta, &p.embedding_name))
                .collect::<Result<Vec<_>>>()?;
            greedy_probcover_multi(&graphs, &selector_weights, budget)?
        }
        Method::MersMaxherding | Method::Maxherding => {
            let kernels = dists[..views_used]
                .iter()
                .zip(&scales.profiles)
                .map(|(d, p)| rbf_kernel_matrix(d, p.sigma))
                .collect::<Result<Vec<_>>>()?;
            let kernel = combined_kernel(&kernels, &selector_weights)?;
            greedy_maxherding_multi(&kernel, budget)?
        }
        Method::Herding => herding_baseline(&class.views[0], budget)?,
        Method::Random => random_baseline(n, budget, mix_seed(settings.seed, class.label, 0))?,
    };
    result.method = settings.method;
    if result.clamped {
        warnings.push(format!(
            "class {}: budget {budget} clamped to class size {n}",
            class.label
        ));
    }
    result.scales = scales.profiles;
    let chosen_ids = result
        .chosen
        .iter()
        .map(|&local| class.global_ids[local])
        .collect();
    Ok(ClassSelection {
        class_label: class.label,
        budget,
        chosen_ids,
        result,
        warnings,
    })
}

/// Run selection for every class of a (normalized) pool under per-class
/// budgets. Classes fan out in parallel; output order is label order.
pub fn select_pool(
    pool: &LabeledPool,
    budgets: &BTreeMap<i64, usize>,
    settings: &SelectorSettings,
) -> Result<PoolSelection> {
    let by_class = pool.class_rows();
    for label in by_class.keys() {
        if !budgets.contains_key(label) {
            return Err(Error::Structure(format!(
                "no budget entry for class {label}"
            )));
        }
    }
    let episode_sigma =
        if settings.sigma_scope == SigmaScope::Episode && settings.sigma == ParamMode::Auto {
            Some(episode_sigmas(pool, settings.metric)?)
        } else {
            None
        };
    let jobs: Vec<(i64, Vec<usize>)> = by_class.into_iter().collect();
    let selections: Vec<Result<ClassSelection>> = jobs
        .par_iter()
        .map(|(label, rows)| {
            let class = ClassData::from_pool(pool, *label, rows)?;
            select_for_class(&class, budgets[label], settings, episode_sigma.as_deref())
        })
        .collect();
    let mut classes = Vec::with_capacity(selections.len());
    let mut warnings = Vec::new();
    for sel in selections {
        let sel = sel?;
        warnings.extend(sel.warnings.clone());
        classes.push(sel);
    }
    Ok(PoolSelection { classes, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{two_view_gaussian_pool, TwoViewSpec};

    fn pool() -> LabeledPool {
        two_view_gaussian_pool(&TwoViewSpec {
            classes: 2,
            points_per_class: 12,
            dim: 6,
            seed: 5,
            ..Default::default()
        })
        .unwrap()
        .l2_normalize()
        .unwrap()
    }

    fn budgets(pool: &LabeledPool, b: usize) -> BTreeMap<i64, usize> {
        pool.class_rows().keys().map(|&l| (l, b)).collect()
    }

    #[test]
    fn select_pool_runs_all_methods() {
        let pool = pool();
        for method in [
            Method::MersProbcover,
            Method::MersMaxherding,
            Method::Probcover,
            Method::Maxherding,
            Method::Herding,
            Method::Random,
        ] {
            let settings = SelectorSettings {
                method,
                ..Default::default()
            };
            let out = select_pool(&pool, &budgets(&pool, 3), &settings).unwrap();
            assert_eq!(out.classes.len(), 2, "{method:?}");
            for class in &out.classes {
                assert_eq!(class.chosen_ids.len(), 3, "{method:?}");
            }
        }
    }

    #[test]
    fn mers_with_single_view_equals_single_method() {
        let pool = pool();
        let single_view =
            LabeledPool::new(vec![pool.views()[0].clone()], pool.labels().to_vec()).unwrap();
        let mers = select_pool(
            &single_view,
            &budgets(&single_view, 4),
            &SelectorSettings {
                method: Method::MersProbcover,
                ..Default::default()
            },
        )
        .unwrap();
        let plain = select_pool(
            &single_view,
            &budgets(&single_view, 4),
            &SelectorSettings {
                method: Method::Probcover,
                ..Default::default()
            },
        )
        .unwrap();
        for (a, b) in mers.classes.iter().zip(&plain.classes) {
            assert_eq!(a.chosen_ids, b.chosen_ids);
            assert_eq!(a.result.objective, b.result.objective);
            assert_eq!(a.result.per_step_gain, b.result.per_step_gain);
        }
    }

    #[test]
    fn zero_budget_class_is_flagged_not_dropped() {
        let pool = pool();
        let mut budget_map = budgets(&pool, 3);
        *budget_map.get_mut(&1).unwrap() = 0;
        let out = select_pool(&pool, &budget_map, &SelectorSettings::default()).unwrap();
        assert_eq!(out.classes.len(), 2);
        assert!(out.classes[1].chosen_ids.is_empty());
        assert!(out.warnings.iter().any(|w| w.contains("zero budget")));
    }

    #[test]
    fn explicit_overrides_are_used() {
        let pool = pool();
        let settings = SelectorSettings {
            method: Method::MersMaxherding,
            weights: WeightsMode::Explicit(vec![1.0, 2.0]),
            sigma: ParamMode::Fixed(0.4),
            delta: ParamMode::Fixed(0.3),
            k: KMode::Fixed(5),
            ..Default::default()
        };
        let out = select_pool(&pool, &budgets(&pool, 2), &settings).unwrap();
        for class in &out.classes {
            for (m, profile) in class.result.scales.iter().enumerate() {
                assert_eq!(profile.sigma, 0.4);
                assert_eq!(profile.delta, 0.3);
                assert_eq!(profile.alpha, [1.0, 2.0][m]);
                assert_eq!(profile.k_used, 5);
            }
        }
    }

    #[test]
    fn deterministic_across_repeat_runs() {
        let pool = pool();
        let settings = SelectorSettings {
            method: Method::Random,
            seed: 123,
            ..Default::default()
        };
        let a = select_pool(&pool, &budgets(&pool, 5), &settings).unwrap();
        let b = select_pool(&pool, &budgets(&pool, 5), &settings).unwrap();
        for (x, y) in a.classes.iter().zip(&b.classes) {
            assert_eq!(x.chosen_ids, y.chosen_ids);
        }
    }

    #[test]
    fn episode_sigma_is_shared_across_classes() {
        let pool = pool();
        let settings = SelectorSettings {
            method: Method::MersMaxherding,
            sigma_scope: SigmaScope::Episode,
            ..Default::default()
        };
        let out = select_pool(&pool, &budgets(&pool, 2), &settings).unwrap();
        let s00 = out.classes[0].result.scales[0].sigma;
        let s10 = out.classes[1].result.scales[0].sigma;
        assert_eq!(s00, s10);
        let class_scope = select_pool(
            &pool,
            &budgets(&pool, 2),
            &SelectorSettings {
                method: Method::MersMaxherding,
                ..Default::default()
            },
        )
        .unwrap();
        assert_ne!(class_scope.classes[0].result.scales[0].sigma, s00);
    }
}
