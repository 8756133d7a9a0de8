//! Seeded synthetic data for benchmarks and tests: Gaussian class clouds in
//! two views (one anisotropic "supervised-like", one isotropic
//! "self-supervised-like"), micro-clustered clouds, and uniform sphere
//! clouds.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::embedding::{EmbeddingView, LabeledPool};
use crate::error::Result;

/// Parameters of the two-view Gaussian generator.
///
/// Every class gets a random unit-direction center scaled by `center_scale`
/// in both views; around it, the supervised-like view draws from a diagonal
/// anisotropic Gaussian (`alpha` variance on the first `m` axes, `beta` on
/// the rest) and the self-supervised-like view from an isotropic Gaussian
/// with variance `sigma_ssl`.
#[derive(Debug, Clone)]
pub struct TwoViewSpec {
    pub classes: usize,
    pub points_per_class: usize,
    pub dim: usize,
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Global variance scale of the supervised-like view (multiplies both
    /// `alpha` and `beta`).
    pub sigma_sl: f64,
    pub sigma_ssl: f64,
    pub center_scale: f64,
    /// Label of the first class; classes are consecutive from here.
    pub first_label: i64,
    pub seed: u64,
}

impl Default for TwoViewSpec {
    fn default() -> Self {
        TwoViewSpec {
            classes: 2,
            points_per_class: 50,
            dim: 8,
            m: 2,
            alpha: 2.0,
            beta: 0.2,
            sigma_sl: 1.0,
            sigma_ssl: 1.0,
            center_scale: 4.0,
            first_label: 0,
            seed: 0,
        }
    }
}

/// Names used for the generated views.
pub const SL_VIEW: &str = "supervised";
pub const SSL_VIEW: &str = "ssl";

/// Generate a two-view labeled pool per [`TwoViewSpec`].
pub fn two_view_gaussian_pool(spec: &TwoViewSpec) -> Result<LabeledPool> {
    assert!(spec.m <= spec.dim, "m must be <= dim");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.classes * spec.points_per_class;
    let mut sl = Array2::zeros((n, spec.dim));
    let mut ssl = Array2::zeros((n, spec.dim));
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for class in 0..spec.classes {
        let center = random_unit_vector(&mut rng, spec.dim);
        for _ in 0..spec.points_per_class {
            for j in 0..spec.dim {
                let sl_std = if j < spec.m {
                    (spec.sigma_sl * spec.alpha).sqrt()
                } else {
                    (spec.sigma_sl * spec.beta).sqrt()
                };
                let z: f64 = rng.sample(StandardNormal);
                sl[(row, j)] = spec.center_scale * center[j] + sl_std * z;
                let z2: f64 = rng.sample(StandardNormal);
                ssl[(row, j)] = spec.center_scale * center[j] + spec.sigma_ssl.sqrt() * z2;
            }
            labels.push(spec.first_label + class as i64);
            row += 1;
        }
    }
    let views = vec![
        EmbeddingView::new(SL_VIEW, sl)?,
        EmbeddingView::new(SSL_VIEW, ssl)?,
    ];
    LabeledPool::new(views, labels)
}

/// `clusters` groups of `per_cluster` exact duplicates of a random unit
/// vector. With `jitter > 0` each copy is nudged tangentially by that
/// magnitude before re-normalization.
pub fn micro_cluster_cloud(
    clusters: usize,
    per_cluster: usize,
    dim: usize,
    jitter: f64,
    seed: u64,
) -> Result<EmbeddingView> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = clusters * per_cluster;
    let mut points = Array2::zeros((n, dim));
    let mut row = 0;
    for _ in 0..clusters {
        let center = random_unit_vector(&mut rng, dim);
        for _ in 0..per_cluster {
            let mut p: Vec<f64> = center.clone();
            if jitter > 0.0 {
                for v in p.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v += jitter * z;
                }
                let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                for v in p.iter_mut() {
                    *v /= norm;
                }
            }
            for (j, v) in p.into_iter().enumerate() {
                points[(row, j)] = v;
            }
            row += 1;
        }
    }
    EmbeddingView::new("micro-clustered", points)
}

/// `n` independent uniform directions on the unit sphere.
pub fn uniform_sphere_cloud(n: usize, dim: usize, seed: u64) -> Result<EmbeddingView> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Array2::zeros((n, dim));
    for i in 0..n {
        let v = random_unit_vector(&mut rng, dim);
        for (j, x) in v.into_iter().enumerate() {
            points[(i, j)] = x;
        }
    }
    EmbeddingView::new("uniform", points)
}

fn random_unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
