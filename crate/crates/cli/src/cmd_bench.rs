//! Synthetic benchmark: two Gaussian views per class (one anisotropic, one
//! isotropic), all selection methods at the same budget, weighted coverage
//! under a shared yardstick, and a kernel-build timing sweep that exposes
//! the quadratic cost trend.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Args;

use mers_core::coverage::{build_ball_graph, coverage_value, rbf_kernel_matrix, NeighborGraph};
use mers_core::embedding::pairwise_distances;
use mers_core::error::{Error, Result};
use mers_core::pipeline::{select_pool, ClassData, SelectorSettings};
use mers_core::scale::{delta_from_knn, embedding_weight, median_heuristic_sigma, memory_aware_k};
use mers_core::select::{brute_force_max_coverage, Method};
use mers_core::synthetic::{two_view_gaussian_pool, uniform_sphere_cloud, TwoViewSpec};

use crate::io::write_atomic;
use crate::{parse_metric, print_warnings};

#[derive(Args)]
pub struct BenchArgs {
    /// Number of synthetic classes
    #[arg(long, default_value_t = 3)]
    classes: usize,

    /// Points per class
    #[arg(long = "per-class", default_value_t = 60)]
    per_class: usize,

    /// Feature dimension of both views
    #[arg(long, default_value_t = 8)]
    dim: usize,

    /// Stretched axes of the anisotropic (supervised-like) view
    #[arg(long, default_value_t = 2)]
    m: usize,

    /// Variance of the stretched axes
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,

    /// Variance of the compressed axes
    #[arg(long, default_value_t = 0.2)]
    beta: f64,

    /// Global variance scale of the anisotropic view
    #[arg(long = "sigma-sl", default_value_t = 1.0)]
    sigma_sl: f64,

    /// Variance of the isotropic (self-supervised-like) view
    #[arg(long = "sigma-ssl", default_value_t = 1.0)]
    sigma_ssl: f64,

    /// Class-center norm before normalization
    #[arg(long = "center-scale", default_value_t = 4.0)]
    center_scale: f64,

    /// Per-class selection budget
    #[arg(long = "budget-per-class", default_value_t = 5)]
    budget_per_class: usize,

    #[arg(long, default_value = "cosine")]
    metric: String,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

struct Yardstick {
    graphs: Vec<NeighborGraph>,
    weights: Vec<f64>,
    id_to_local: BTreeMap<u32, usize>,
}

pub fn run(args: BenchArgs) -> Result<ExitCode> {
    let metric = parse_metric(&args.metric)?;
    if args.budget_per_class == 0 {
        return Err(Error::Budget("--budget-per-class must be >= 1".into()));
    }
    if args.m == 0 || args.m >= args.dim {
        return Err(Error::Domain(format!(
            "--m must be in [1, dim-1], got {} with dim {}",
            args.m, args.dim
        )));
    }
    let spec = TwoViewSpec {
        classes: args.classes,
        points_per_class: args.per_class,
        dim: args.dim,
        m: args.m,
        alpha: args.alpha,
        beta: args.beta,
        sigma_sl: args.sigma_sl,
        sigma_ssl: args.sigma_ssl,
        center_scale: args.center_scale,
        first_label: 0,
        seed: args.seed,
    };
    let pool = two_view_gaussian_pool(&spec)?.l2_normalize()?;
    let budgets: BTreeMap<i64, usize> = pool
        .class_rows()
        .keys()
        .map(|&l| (l, args.budget_per_class))
        .collect();

    // shared coverage yardstick: auto-scaled delta-ball graphs per class
    let mut yardsticks: BTreeMap<i64, Yardstick> = BTreeMap::new();
    for (label, rows) in pool.class_rows() {
        let class = ClassData::from_pool(&pool, label, &rows)?;
        let k = memory_aware_k(class.n(), args.budget_per_class.min(class.n()))?;
        let mut graphs = Vec::new();
        let mut weights = Vec::new();
        for view in &class.views {
            let dist = pairwise_distances(view, metric)?;
            let delta = delta_from_knn(&dist, k)?;
            graphs.push(build_ball_graph(&dist, delta)?);
            weights.push(embedding_weight(&dist, k)?);
        }
        let id_to_local = class
            .global_ids
            .iter()
            .enumerate()
            .map(|(local, &id)| (id, local))
            .collect();
        yardsticks.insert(
            label,
            Yardstick {
                graphs,
                weights,
                id_to_local,
            },
        );
    }

    // exact optimum when every class is small enough to enumerate
    let opt_total: Option<f64> = {
        let mut total = 0.0;
        let mut feasible = true;
        for yardstick in yardsticks.values() {
            match brute_force_max_coverage(
                &yardstick.graphs,
                &yardstick.weights,
                args.budget_per_class,
            ) {
                Ok((_, opt)) => total += opt,
                Err(Error::Guard(_)) => {
                    feasible = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        feasible.then_some(total)
    };

    let methods = [
        Method::MersProbcover,
        Method::MersMaxherding,
        Method::Probcover,
        Method::Maxherding,
        Method::Herding,
        Method::Random,
    ];
    let mut rows: Vec<String> = Vec::new();
    let mut reference_sets: BTreeMap<i64, Vec<u32>> = BTreeMap::new();
    for method in methods {
        let settings = SelectorSettings {
            method,
            metric,
            seed: args.seed,
            ..Default::default()
        };
        let start = Instant::now();
        let selection = select_pool(&pool, &budgets, &settings)?;
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        print_warnings(&selection.warnings);

        let mut coverage_f = 0.0;
        let mut own_objective = 0.0;
        for class in &selection.classes {
            let yardstick = &yardsticks[&class.class_label];
            let local: Vec<usize> = class
                .chosen_ids
                .iter()
                .map(|id| yardstick.id_to_local[id])
                .collect();
            coverage_f += coverage_value(&local, &yardstick.graphs, &yardstick.weights)?;
            own_objective += class.result.objective;
        }

        let overlap = if method == Method::MersProbcover {
            for class in &selection.classes {
                reference_sets.insert(class.class_label, class.chosen_ids.clone());
            }
            1.0
        } else {
            let mut intersection = 0usize;
            let mut union = 0usize;
            for class in &selection.classes {
                let reference = &reference_sets[&class.class_label];
                let chosen: std::collections::BTreeSet<u32> =
                    class.chosen_ids.iter().copied().collect();
                let reference: std::collections::BTreeSet<u32> =
                    reference.iter().copied().collect();
                intersection += chosen.intersection(&reference).count();
                union += chosen.union(&reference).count();
            }
            intersection as f64 / union.max(1) as f64
        };

        let (opt_f, ratio) = match opt_total {
            Some(opt) => (format!("{opt}"), format!("{}", coverage_f / opt)),
            None => (String::new(), String::new()),
        };
        rows.push(format!(
            "method,{},{coverage_f},{own_objective},{runtime_ms:.3},{overlap:.4},{opt_f},{ratio},,,",
            method.as_str()
        ));
    }

    // kernel-build timing sweep: distances + RBF kernel are the O(n^2 d)
    // stage; doubling n should roughly quadruple the time (report-only)
    let mut previous_ms: Option<f64> = None;
    for factor in [1usize, 2, 4] {
        let n = args.per_class * factor;
        let cloud = uniform_sphere_cloud(n, args.dim, args.seed ^ 0xbe7c)?;
        let start = Instant::now();
        let dist = pairwise_distances(&cloud, metric)?;
        let sigma = median_heuristic_sigma(&dist)?;
        let _ = rbf_kernel_matrix(&dist, sigma.max(1e-9))?;
        let build_ms = start.elapsed().as_secs_f64() * 1e3;
        let ratio = match previous_ms {
            Some(prev) if prev > 0.0 => format!("{:.2}", build_ms / prev),
            _ => String::new(),
        };
        previous_ms = Some(build_ms);
        rows.push(format!("scaling,,,,,,,,{n},{build_ms:.3},{ratio}"));
    }

    let mut csv = String::from(
        "kind,method,total_coverage_f,own_objective,runtime_ms,\
         overlap_jaccard_vs_mers_probcover,opt_f,f_over_opt,n,kernel_build_ms,quadratic_ratio\n",
    );
    for row in rows {
        csv.push_str(&row);
        csv.push('\n');
    }
    write_atomic(&args.out, csv.as_bytes())?;
    Ok(ExitCode::SUCCESS)
}
