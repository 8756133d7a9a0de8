//! Train/test risk-gap experiments.
//!
//! Setting: a K-class Gaussian mixture where only class 1's conditional
//! differs between train and test (its training data comes from a replay
//! buffer selected under a distorted embedding; everything else is fresh).
//! For any fixed classifier `h`,
//!
//! ```text
//! |R_test(h) - R_train(h)| <= pi1 * TV(te_1, tr_1)
//!                          <= pi1 * sqrt(KL(te_1 || tr_1) / 2)
//! ```
//!
//! The experiments here estimate both risks by Monte Carlo under the exact
//! likelihood-ratio classifier (or a supplied linear rule) and check the
//! measured gap against the closed-form bound.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::theory::{check_spd, kl_gaussian};

/// One class-conditional Gaussian: mean plus covariance.
#[derive(Debug, Clone)]
pub struct ClassConditional {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl ClassConditional {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        check_spd(&cov, "class covariance")?;
        if mean.len() != cov.nrows() {
            return Err(Error::Structure(format!(
                "mean has {} entries for a {}x{} covariance",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        Ok(ClassConditional { mean, cov })
    }
}

/// The shifted-class experiment: class 1 (index 0 here) is mean-zero and has
/// different train/test covariances; the remaining classes are shared.
#[derive(Debug, Clone)]
pub struct RiskGapSetup {
    /// Class priors; `priors[0]` is the shifted class. Must sum to 1.
    pub priors: Vec<f64>,
    /// Train-side covariance of the shifted class (mean 0).
    pub class1_train_cov: DMatrix<f64>,
    /// Test-side covariance of the shifted class (mean 0).
    pub class1_test_cov: DMatrix<f64>,
    /// Conditionals of the unshifted classes, shared between train and test.
    pub others: Vec<ClassConditional>,
}

impl RiskGapSetup {
    pub fn validate(&self) -> Result<()> {
        if self.priors.len() != self.others.len() + 1 {
            return Err(Error::Structure(format!(
                "{} priors for {} classes",
                self.priors.len(),
                self.others.len() + 1
            )));
        }
        if self.priors.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Domain("priors must be positive".into()));
        }
        let total: f64 = self.priors.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("priors sum to {total}, not 1")));
        }
        check_spd(&self.class1_train_cov, "class1 train covariance")?;
        check_spd(&self.class1_test_cov, "class1 test covariance")?;
        let dim = self.class1_train_cov.nrows();
        if self.class1_test_cov.nrows() != dim || self.others.iter().any(|c| c.cov.nrows() != dim) {
            return Err(Error::Structure(
                "all class conditionals must share one dimension".into(),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.class1_train_cov.nrows()
    }
}

/// The classifier evaluated on both mixtures. The bound holds for any fixed
/// rule; the likelihood-ratio rule w.r.t. the training mixture is the
/// parameter-free default.
#[derive(Debug, Clone)]
pub enum ClassifierRule {
    LikelihoodRatio,
    /// Two-class linear rule: predict class 0 iff `w'x + b > 0`.
    Linear {
        weights: DVector<f64>,
        bias: f64,
    },
}

/// Measured risks, gap and bound for one experiment.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RiskGapOutcome {
    pub risk_train: f64,
    pub risk_test: f64,
    pub gap: f64,
    pub kl: f64,
    pub bound: f64,
    pub stderr_train: f64,
    pub stderr_test: f64,
    pub stderr_combined: f64,
    /// `gap <= bound + 3 * stderr_combined`.
    pub within_bound: bool,
}

/// Pinsker-style bound `pi1 * sqrt(kl / 2)`.
pub fn risk_gap_bound(pi1: f64, kl: f64) -> Result<f64> {
    if !(pi1 > 0.0 && pi1 <= 1.0) {
        return Err(Error::Domain(format!("pi1 must be in (0, 1], got {pi1}")));
    }
    if kl < 0.0 {
        return Err(Error::Domain(format!("kl must be >= 0, got {kl}")));
    }
    Ok(pi1 * (kl / 2.0).sqrt())
}

struct GaussianSampler {
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    half_logdet: f64,
}

impl GaussianSampler {
    fn new(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::Domain("covariance is not positive-definite".into()))?;
        let half_logdet = {
            let l = chol.l();
            let mut acc = 0.0;
            for i in 0..l.nrows() {
                acc += l[(i, i)].ln();
            }
            acc
        };
        Ok(GaussianSampler {
            mean,
            chol,
            half_logdet,
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng, z: &mut DVector<f64>) -> DVector<f64> {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        &self.mean + self.chol.l() * &*z
    }

    /// Log density up to the shared `-(n/2) ln 2 pi` constant.
    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let centered = x - &self.mean;
        let quad = centered.dot(&self.chol.solve(&centered));
        -0.5 * quad - self.half_logdet
    }
}

fn classify(
    rule: &ClassifierRule,
    train_classes: &[GaussianSampler],
    priors: &[f64],
    x: &DVector<f64>,
) -> usize {
    match rule {
        ClassifierRule::LikelihoodRatio => {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (y, sampler) in train_classes.iter().enumerate() {
                let score = priors[y].ln() + sampler.log_density(x);
                if score > best_score {
                    best_score = score;
                    best = y;
                }
            }
            best
        }
        ClassifierRule::Linear { weights, bias } => {
            if weights.dot(x) + bias > 0.0 {
                0
            } else {
                1
            }
        }
    }
}

/// Run one seeded risk-gap experiment with `samples` draws per mixture.
pub fn empirical_risk_gap(
    setup: &RiskGapSetup,
    rule: &ClassifierRule,
    samples: usize,
    seed: u64,
) -> Result<RiskGapOutcome> {
    setup.validate()?;
    if samples == 0 {
        return Err(Error::Domain("samples must be >= 1".into()));
    }
    if matches!(rule, ClassifierRule::Linear { .. }) && setup.others.len() != 1 {
        return Err(Error::Structure(
            "the linear rule only applies to two-class setups".into(),
        ));
    }
    let dim = setup.dim();
    let zero_mean = DVector::zeros(dim);

    let mut train_classes = vec![GaussianSampler::new(
        zero_mean.clone(),
        &setup.class1_train_cov,
    )?];
    let mut test_classes = vec![GaussianSampler::new(
        zero_mean.clone(),
        &setup.class1_test_cov,
    )?];
    for other in &setup.others {
        train_classes.push(GaussianSampler::new(other.mean.clone(), &other.cov)?);
        test_classes.push(GaussianSampler::new(other.mean.clone(), &other.cov)?);
    }

    let kl = kl_gaussian(&setup.class1_test_cov, &setup.class1_train_cov)?;
    let bound = risk_gap_bound(setup.priors[0], kl)?;

    let measure = |classes: &[GaussianSampler], stream: u64| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut z = DVector::zeros(dim);
        let mut errors = 0usize;
        for _ in 0..samples {
            let u: f64 = rng.random();
            let mut y = 0usize;
            let mut acc = 0.0;
            for (idx, &p) in setup.priors.iter().enumerate() {
                acc += p;
                if u < acc {
                    y = idx;
                    break;
                }
                y = idx;
            }
            let x = classes[y].sample(&mut rng, &mut z);
            if classify(rule, &train_classes, &setup.priors, &x) != y {
                errors += 1;
            }
        }
        errors as f64 / samples as f64
    };

    let risk_train = measure(&train_classes, 0);
    let risk_test = measure(&test_classes, 1);
    let stderr = |r: f64| (r * (1.0 - r) / samples as f64).sqrt();
    let stderr_train = stderr(risk_train);
    let stderr_test = stderr(risk_test);
    let stderr_combined = (stderr_train * stderr_train + stderr_test * stderr_test).sqrt();
    let gap = (risk_test - risk_train).abs();
    Ok(RiskGapOutcome {
        risk_train,
        risk_test,
        gap,
        kl,
        bound,
        stderr_train,
        stderr_test,
        stderr_combined,
        within_bound: gap <= bound + 3.0 * stderr_combined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class_setup(train_cov: DMatrix<f64>, test_cov: DMatrix<f64>) -> RiskGapSetup {
        let dim = train_cov.nrows();
        let mean2 = DVector::from_element(dim, 2.0);
        RiskGapSetup {
            priors: vec![0.5, 0.5],
            class1_train_cov: train_cov,
            class1_test_cov: test_cov,
            others: vec![ClassConditional::new(mean2, DMatrix::identity(dim, dim)).unwrap()],
        }
    }

    #[test]
    fn bound_values() {
        assert_eq!(risk_gap_bound(0.5, 0.0).unwrap(), 0.0);
        let b = risk_gap_bound(0.5, 0.3068528194400547).unwrap();
        assert!((b - 0.19584841697089828).abs() <= 1e-15, "{b}");
        assert_eq!(risk_gap_bound(1.0, 2.0).unwrap(), 1.0);
        assert!(risk_gap_bound(0.5, -0.1).is_err());
        assert!(risk_gap_bound(0.0, 1.0).is_err());
    }

    #[test]
    fn identity_perturbation_has_zero_bound_and_tiny_gap() {
        let eye = DMatrix::identity(1, 1);
        let setup = two_class_setup(eye.clone(), eye);
        let outcome =
            empirical_risk_gap(&setup, &ClassifierRule::LikelihoodRatio, 50_000, 3).unwrap();
        assert_eq!(outcome.bound, 0.0);
        assert!(outcome.within_bound, "{outcome:?}");
    }

    #[test]
    fn ssl1_style_shift_respects_bound() {
        let eye = DMatrix::identity(1, 1);
        let setup = two_class_setup(&eye * 0.5, eye);
        let outcome =
            empirical_risk_gap(&setup, &ClassifierRule::LikelihoodRatio, 100_000, 9).unwrap();
        // 1-D, sigma=0.5: KL = (1/0.5 - 1 + ln 0.5)/2
        let expected_kl = 0.5 * (2.0 - 1.0 + 0.5f64.ln());
        assert!((outcome.kl - expected_kl).abs() <= 1e-12);
        assert!(outcome.within_bound, "{outcome:?}");
    }

    #[test]
    fn linear_rule_also_bounded() {
        let eye = DMatrix::identity(2, 2);
        let setup = RiskGapSetup {
            priors: vec![0.4, 0.6],
            class1_train_cov: &eye * 0.6,
            class1_test_cov: eye.clone(),
            others: vec![
                ClassConditional::new(DVector::from_vec(vec![1.5, 1.5]), eye.clone()).unwrap(),
            ],
        };
        let rule = ClassifierRule::Linear {
            weights: DVector::from_vec(vec![-1.0, -1.0]),
            bias: 1.5,
        };
        let outcome = empirical_risk_gap(&setup, &rule, 50_000, 17).unwrap();
        assert!(outcome.within_bound, "{outcome:?}");
    }

    #[test]
    fn deterministic_given_seed() {
        let eye = DMatrix::identity(1, 1);
        let setup = two_class_setup(&eye * 0.7, eye);
        let a = empirical_risk_gap(&setup, &ClassifierRule::LikelihoodRatio, 20_000, 4).unwrap();
        let b = empirical_risk_gap(&setup, &ClassifierRule::LikelihoodRatio, 20_000, 4).unwrap();
        assert_eq!(a.risk_train, b.risk_train);
        assert_eq!(a.risk_test, b.risk_test);
    }

    #[test]
    fn rejects_bad_priors() {
        let eye = DMatrix::identity(1, 1);
        let mut setup = two_class_setup(eye.clone(), eye);
        setup.priors = vec![0.9, 0.3];
        assert!(empirical_risk_gap(&setup, &ClassifierRule::LikelihoodRatio, 10_000, 0).is_err());
    }
}
