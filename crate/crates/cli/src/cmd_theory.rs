//! Numeric verification battery for the Gaussian theory: closed forms vs
//! the generic KL on explicit matrices, Monte-Carlo agreement, the AM-GM
//! anisotropy inequality on a grid, the small-beta dominance scan, and
//! seeded risk-gap experiments against the Pinsker bound.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use mers_core::error::Result;
use mers_core::theory::risk::{
    empirical_risk_gap, risk_gap_bound, ClassConditional, ClassifierRule, RiskGapSetup,
};
use mers_core::theory::{
    equal_volume_alpha, kl_closed_form, kl_gaussian, monte_carlo_kl, random_lemma_instance,
    random_spd, random_spd_unit_det, scan_small_beta, verify_amgm, AmgmGridSpec, KlCase,
    SmallBetaScan, StructuredGaussian,
};

use crate::io::{to_json_bytes, write_atomic};
use crate::report::{
    LemmaCheck, MonteCarloCheck, RiskGapEntry, SmallBetaEntry, TheoryReport, THEORY_SCHEMA,
};

#[derive(Args)]
pub struct TheoryArgs {
    /// Random parameter draws per closed-form case
    #[arg(long, default_value_t = 100)]
    draws: usize,

    /// Monte-Carlo samples per KL estimate
    #[arg(long = "mc-samples", default_value_t = 200_000)]
    mc_samples: usize,

    /// Random base covariances for the small-beta scan
    #[arg(long, default_value_t = 10)]
    scans: usize,

    /// Seeded risk-gap experiments
    #[arg(long = "risk-experiments", default_value_t = 20)]
    risk_experiments: usize,

    /// Monte-Carlo samples per risk estimate
    #[arg(long = "risk-samples", default_value_t = 20_000)]
    risk_samples: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Report path (JSON); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

pub const LEMMA_TOL: f64 = 1e-10;

pub fn run(args: TheoryArgs) -> Result<ExitCode> {
    let cases = [KlCase::Ssl1, KlCase::Ssl2, KlCase::SlI1, KlCase::SlI2];

    // closed forms vs generic KL on explicit covariances
    let mut lemma_checks = Vec::new();
    for case in cases {
        let mut max_abs_error: f64 = 0.0;
        for draw in 0..args.draws {
            let params =
                random_lemma_instance(args.seed ^ ((draw as u64) << 8 | case as u64), case)?;
            let closed = kl_closed_form(&params, case)?;
            let target = params.target_covariance(case)?;
            let generic = kl_gaussian(params.base(), &target)?;
            max_abs_error = max_abs_error.max((closed - generic).abs());
        }
        lemma_checks.push(LemmaCheck {
            case: case.as_str().to_string(),
            draws: args.draws,
            max_abs_error,
            tolerance: LEMMA_TOL,
            passed: max_abs_error <= LEMMA_TOL,
        });
    }

    // closed forms vs Monte-Carlo
    let mut monte_carlo_checks = Vec::new();
    for case in cases {
        let params = random_lemma_instance(args.seed ^ (0xAB00 | case as u64), case)?;
        let closed = kl_closed_form(&params, case)?;
        let target = params.target_covariance(case)?;
        let (estimate, stderr) =
            monte_carlo_kl(params.base(), &target, args.mc_samples, args.seed ^ 0xCD00)?;
        monte_carlo_checks.push(MonteCarloCheck {
            case: case.as_str().to_string(),
            samples: args.mc_samples,
            closed_form: closed,
            estimate,
            stderr,
            passed: (estimate - closed).abs() <= 3.0 * stderr,
        });
    }

    // anisotropy dominance on a grid
    let amgm = verify_amgm(
        &AmgmGridSpec {
            dims: vec![2, 3, 4, 6, 8, 12, 16],
            sigmas: vec![0.3, 0.5, 1.0, 1.7],
            betas: vec![0.05, 0.1, 0.3, 0.5, 1.0, 1.7, 2.4],
        },
        1e-12,
    )?;

    // small-beta dominance threshold per random base
    let mut small_beta = Vec::new();
    for scan_index in 0..args.scans {
        let scan_seed = args.seed ^ 0x5BEA ^ (scan_index as u64) << 16;
        let mut rng = ChaCha8Rng::seed_from_u64(scan_seed);
        let n = rng.random_range(2..=6);
        let base = random_spd_unit_det(n, (0.3, 3.0), scan_seed ^ 0x99)?;
        let sigma = rng.random_range(0.5..2.0);
        let scan = SmallBetaScan {
            base,
            sigma,
            m: rng.random_range(1..n),
            betas_desc: vec![0.5, 0.25, 0.1, 0.01, 1e-3, 1e-4],
        };
        let report = scan_small_beta(&scan)?;
        let ratios: Vec<f64> = report
            .samples
            .iter()
            .filter(|s| s.beta <= 0.1)
            .map(|s| s.ratio)
            .collect();
        let ratios_increase = ratios.windows(2).all(|w| w[1] > w[0]);
        small_beta.push(SmallBetaEntry {
            sigma,
            dim: n,
            beta0: report.beta0,
            ratios,
            ratios_increase,
            passed: report.passed && ratios_increase,
        });
    }

    // risk-gap experiments under matched perturbations
    let mut risk_gap = Vec::new();
    for experiment in 0..args.risk_experiments {
        let exp_seed = args.seed ^ 0x415C ^ (experiment as u64) << 24;
        let mut rng = ChaCha8Rng::seed_from_u64(exp_seed);
        let n = rng.random_range(1..=3);
        let base = random_spd(n, (0.5, 1.5), exp_seed ^ 0x77);
        let sigma = rng.random_range(0.4..0.9);
        let pi1 = rng.random_range(0.3..0.7);

        // matched perturbation pair under equal volume
        let ssl = StructuredGaussian::ssl_only(base.clone(), sigma)?;
        let kl_ssl = kl_closed_form(&ssl, KlCase::Ssl1)?;
        let (kl_sl, sl_cov) = if n >= 2 {
            let m = rng.random_range(1..n);
            let beta = rng.random_range(0.05..0.5) * sigma;
            let alpha = equal_volume_alpha(beta, m, n, sigma, None)?.alpha;
            let params = StructuredGaussian::new(base.clone(), sigma, alpha, beta, m)?;
            (
                kl_closed_form(&params, KlCase::SlI1)?,
                Some(params.target_covariance(KlCase::SlI1)?),
            )
        } else {
            (kl_ssl, None)
        };
        let bound_ssl = risk_gap_bound(pi1, kl_ssl)?;
        let bound_sl = risk_gap_bound(pi1, kl_sl)?;

        // evaluate the gap under the ssl perturbation and, in dimension
        // >= 2, under the sl perturbation too
        let mut mean = DVector::zeros(n);
        for v in mean.iter_mut() {
            *v = rng.random_range(1.0..2.5);
        }
        let other = ClassConditional::new(mean, DMatrix::identity(n, n))?;
        let mut perturbations = vec![("ssl1".to_string(), &base * sigma)];
        if let Some(cov) = sl_cov {
            perturbations.push(("sl_i1".to_string(), cov));
        }
        for (name, train_cov) in perturbations {
            let setup = RiskGapSetup {
                priors: vec![pi1, 1.0 - pi1],
                class1_train_cov: train_cov,
                class1_test_cov: base.clone(),
                others: vec![other.clone()],
            };
            let outcome = empirical_risk_gap(
                &setup,
                &ClassifierRule::LikelihoodRatio,
                args.risk_samples,
                exp_seed ^ 0xEE,
            )?;
            risk_gap.push(RiskGapEntry {
                seed: exp_seed,
                perturbation: name,
                pi1,
                kl: outcome.kl,
                bound: outcome.bound,
                risk_train: outcome.risk_train,
                risk_test: outcome.risk_test,
                gap: outcome.gap,
                stderr_combined: outcome.stderr_combined,
                within_bound: outcome.within_bound,
                bound_ssl,
                bound_sl,
                ssl_bound_tighter: bound_ssl <= bound_sl + 1e-12,
            });
        }
    }

    let passed = lemma_checks.iter().all(|c| c.passed)
        && monte_carlo_checks.iter().all(|c| c.passed)
        && amgm.passed
        && small_beta.iter().all(|c| c.passed)
        && risk_gap
            .iter()
            .all(|c| c.within_bound && c.ssl_bound_tighter);
    let report = TheoryReport {
        schema: THEORY_SCHEMA,
        seed: args.seed,
        lemma_checks,
        monte_carlo_checks,
        amgm,
        small_beta,
        risk_gap,
        passed,
    };
    let bytes = to_json_bytes(&report)?;
    match &args.out {
        Some(path) => write_atomic(path, &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    if passed {
        eprintln!("theory checks: all passed");
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("theory checks: FAILURES present, see report");
        Ok(ExitCode::from(1))
    }
}
