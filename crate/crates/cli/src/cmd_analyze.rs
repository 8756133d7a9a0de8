use std::process::ExitCode;

use mers_core::embedding::pairwise_distances;
use mers_core::error::{Error, Result};
use mers_core::pipeline::{episode_sigmas, ClassData, KMode, SigmaScope};
use mers_core::scale::{
    beta_ratio, delta_from_knn, embedding_weight, median_heuristic_sigma, memory_aware_k,
    ScaleProfile,
};

use crate::io::{load_pool, to_json_bytes, write_atomic};
use crate::report::{AnalyzeReport, BetaReport, ANALYZE_SCHEMA};
use crate::{parse_format, parse_k, parse_metric, parse_sigma_scope, AnalyzeArgs};

pub fn run(args: AnalyzeArgs) -> Result<ExitCode> {
    let metric = parse_metric(&args.input.metric)?;
    let sigma_scope = parse_sigma_scope(&args.input.sigma_scope)?;
    let format = parse_format(&args.input.format)?;
    let k_mode = parse_k(&args.input.k)?;
    if k_mode == KMode::Auto && args.budget_per_class.is_none() {
        return Err(Error::Budget(
            "--k auto needs --budget-per-class to derive the memory-aware k; \
             pass one of them"
                .into(),
        ));
    }

    let pool = load_pool(&args.input.embeddings, &args.input.labels, format)?;
    let shared_sigma = if sigma_scope == SigmaScope::Episode {
        Some(episode_sigmas(&pool, metric)?)
    } else {
        None
    };

    let mut profiles: Vec<ScaleProfile> = Vec::new();
    let mut betas = Vec::new();
    for (label, rows) in pool.class_rows() {
        let class = ClassData::from_pool(&pool, label, &rows)?;
        let n = class.n();
        if n < 2 {
            eprintln!("warning: class {label} has a single point; no scales to estimate");
            continue;
        }
        let k = match k_mode {
            KMode::Fixed(k) => {
                let clamped = k.clamp(1, n - 1);
                if clamped != k {
                    eprintln!(
                        "warning: class {label}: k={k} clamped to {clamped} (class size {n})"
                    );
                }
                clamped
            }
            KMode::Auto => memory_aware_k(n, args.budget_per_class.unwrap())?,
        };
        let mut alphas = Vec::new();
        for (m, view) in class.views.iter().enumerate() {
            let dist = pairwise_distances(view, metric)?;
            let sigma = match &shared_sigma {
                Some(eps) => eps[m],
                None => median_heuristic_sigma(&dist)?,
            };
            let delta = delta_from_knn(&dist, k)?;
            let alpha = embedding_weight(&dist, k)?;
            alphas.push((view.name().to_string(), alpha));
            profiles.push(ScaleProfile {
                sigma,
                delta,
                alpha,
                k_used: k,
                embedding_name: view.name().to_string(),
                class_label: label,
            });
        }
        for i in 0..alphas.len() {
            for j in (i + 1)..alphas.len() {
                betas.push(BetaReport {
                    class_label: label,
                    numerator: alphas[i].0.clone(),
                    denominator: alphas[j].0.clone(),
                    beta: beta_ratio(alphas[i].1, alphas[j].1)?,
                });
            }
        }
    }

    let report = AnalyzeReport {
        schema: ANALYZE_SCHEMA,
        metric: metric.as_str().to_string(),
        sigma_scope: if sigma_scope == SigmaScope::Class {
            "class".to_string()
        } else {
            "episode".to_string()
        },
        profiles,
        betas,
    };
    let bytes = to_json_bytes(&report)?;
    match &args.out {
        Some(path) => write_atomic(path, &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(ExitCode::SUCCESS)
}
