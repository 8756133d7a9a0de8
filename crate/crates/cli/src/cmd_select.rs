use std::process::ExitCode;

use mers_core::buffer::per_class_budget;
use mers_core::error::{Error, Result};
use mers_core::pipeline::{select_pool, SelectorSettings};

use crate::io::{load_pool, parse_embedding_arg, to_json_bytes, write_atomic};
use crate::report::{
    BetaReport, BudgetSpec, ClassReport, EmbeddingRef, SelectReport, SELECT_SCHEMA,
};
use crate::{
    parse_format, parse_k, parse_method, parse_metric, parse_param, parse_sigma_scope,
    parse_weights, print_warnings, SelectArgs,
};

pub fn run(args: SelectArgs) -> Result<ExitCode> {
    let method = parse_method(&args.method)?;
    let metric = parse_metric(&args.input.metric)?;
    let sigma_scope = parse_sigma_scope(&args.input.sigma_scope)?;
    let format = parse_format(&args.input.format)?;
    let settings = SelectorSettings {
        method,
        metric,
        sigma_scope,
        weights: parse_weights(&args.weights)?,
        sigma: parse_param(&args.sigma, "sigma")?,
        delta: parse_param(&args.delta, "delta")?,
        k: parse_k(&args.input.k)?,
        seed: args.seed,
    };

    let pool = load_pool(&args.input.embeddings, &args.input.labels, format)?;
    if method.is_multi() && pool.views().len() == 1 {
        eprintln!(
            "note: {} with a single embedding degenerates to the single-embedding method",
            method.as_str()
        );
    }
    let class_labels: Vec<i64> = pool.class_rows().keys().copied().collect();

    let (budget_spec, budgets, budget_warnings) = match (args.budget, args.budget_per_class) {
        (Some(total), None) => {
            let (budgets, warnings) = per_class_budget(total, &class_labels)?;
            (
                BudgetSpec {
                    mode: "total",
                    value: total,
                },
                budgets,
                warnings,
            )
        }
        (None, Some(per_class)) => {
            if per_class == 0 {
                return Err(Error::Budget("--budget-per-class must be >= 1".into()));
            }
            (
                BudgetSpec {
                    mode: "per_class",
                    value: per_class,
                },
                class_labels.iter().map(|&l| (l, per_class)).collect(),
                Vec::new(),
            )
        }
        _ => {
            return Err(Error::Budget(
                "exactly one of --budget or --budget-per-class is required".into(),
            ))
        }
    };
    print_warnings(&budget_warnings);

    let selection = select_pool(&pool, &budgets, &settings)?;
    print_warnings(&selection.warnings);

    let report = SelectReport {
        schema: SELECT_SCHEMA,
        method,
        metric: metric.as_str().to_string(),
        sigma_scope: if sigma_scope == mers_core::pipeline::SigmaScope::Class {
            "class".to_string()
        } else {
            "episode".to_string()
        },
        seed: args.seed,
        budget: budget_spec,
        embeddings: args
            .input
            .embeddings
            .iter()
            .enumerate()
            .map(|(i, arg)| {
                let (path, name) = parse_embedding_arg(arg, i);
                EmbeddingRef {
                    name,
                    path: path.display().to_string(),
                }
            })
            .collect(),
        labels: args.input.labels.display().to_string(),
        classes: selection
            .classes
            .into_iter()
            .map(|class| {
                let scales = class.result.scales;
                let mut betas = Vec::new();
                for i in 0..scales.len() {
                    for j in (i + 1)..scales.len() {
                        betas.push(BetaReport {
                            class_label: class.class_label,
                            numerator: scales[i].embedding_name.clone(),
                            denominator: scales[j].embedding_name.clone(),
                            beta: scales[i].alpha / scales[j].alpha,
                        });
                    }
                }
                ClassReport {
                    class_label: class.class_label,
                    budget: class.budget,
                    clamped: class.result.clamped,
                    chosen_ids: class.chosen_ids,
                    objective: class.result.objective,
                    per_step_gain: class.result.per_step_gain,
                    scales,
                    betas,
                }
            })
            .collect(),
    };
    write_atomic(&args.out, &to_json_bytes(&report)?)?;
    Ok(ExitCode::SUCCESS)
}
