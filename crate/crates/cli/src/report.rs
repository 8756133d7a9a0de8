//! JSON report schemas. Field order is fixed by the struct definitions and
//! floats serialize via serde_json's shortest round-trip form, so identical
//! runs produce byte-identical files.

use mers_core::scale::ScaleProfile;
use mers_core::select::Method;
use serde::Serialize;

pub const SELECT_SCHEMA: &str = "mers-report/1";
pub const ANALYZE_SCHEMA: &str = "mers-analyze/1";
pub const THEORY_SCHEMA: &str = "mers-theory/1";
pub const METRICS_SCHEMA: &str = "mers-metrics/1";

#[derive(Serialize)]
pub struct EmbeddingRef {
    pub name: String,
    pub path: String,
}

#[derive(Serialize)]
pub struct BudgetSpec {
    pub mode: &'static str,
    pub value: usize,
}

#[derive(Serialize)]
pub struct ClassReport {
    pub class_label: i64,
    pub budget: usize,
    pub clamped: bool,
    pub chosen_ids: Vec<u32>,
    pub objective: f64,
    pub per_step_gain: Vec<f64>,
    pub scales: Vec<ScaleProfile>,
    /// Weight ratios per embedding pair; empty for single-view runs.
    pub betas: Vec<BetaReport>,
}

#[derive(Serialize)]
pub struct SelectReport {
    pub schema: &'static str,
    pub method: Method,
    pub metric: String,
    pub sigma_scope: String,
    pub seed: u64,
    pub budget: BudgetSpec,
    pub embeddings: Vec<EmbeddingRef>,
    pub labels: String,
    pub classes: Vec<ClassReport>,
}

#[derive(Serialize)]
pub struct BetaReport {
    pub class_label: i64,
    pub numerator: String,
    pub denominator: String,
    pub beta: f64,
}

#[derive(Serialize)]
pub struct AnalyzeReport {
    pub schema: &'static str,
    pub metric: String,
    pub sigma_scope: String,
    pub profiles: Vec<ScaleProfile>,
    pub betas: Vec<BetaReport>,
}

#[derive(Serialize)]
pub struct MetricsReport {
    pub schema: &'static str,
    pub tasks: usize,
    pub faa: f64,
    pub aaa: f64,
    pub forgetting: Option<f64>,
    pub stability: Option<f64>,
}

// ---- theory report ---------------------------------------------------------

#[derive(Serialize)]
pub struct LemmaCheck {
    pub case: String,
    pub draws: usize,
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Serialize)]
pub struct MonteCarloCheck {
    pub case: String,
    pub samples: usize,
    pub closed_form: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub passed: bool,
}

#[derive(Serialize)]
pub struct SmallBetaEntry {
    pub sigma: f64,
    pub dim: usize,
    pub beta0: Option<f64>,
    pub ratios: Vec<f64>,
    pub ratios_increase: bool,
    pub passed: bool,
}

#[derive(Serialize)]
pub struct RiskGapEntry {
    pub seed: u64,
    pub perturbation: String,
    pub pi1: f64,
    pub kl: f64,
    pub bound: f64,
    pub risk_train: f64,
    pub risk_test: f64,
    pub gap: f64,
    pub stderr_combined: f64,
    pub within_bound: bool,
    pub bound_ssl: f64,
    pub bound_sl: f64,
    pub ssl_bound_tighter: bool,
}

#[derive(Serialize)]
pub struct TheoryReport {
    pub schema: &'static str,
    pub seed: u64,
    pub lemma_checks: Vec<LemmaCheck>,
    pub monte_carlo_checks: Vec<MonteCarloCheck>,
    pub amgm: mers_core::theory::AmgmReport,
    pub small_beta: Vec<SmallBetaEntry>,
    pub risk_gap: Vec<RiskGapEntry>,
    pub passed: bool,
}
