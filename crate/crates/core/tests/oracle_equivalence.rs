//! Brute-force oracles recomputed from scratch must agree exactly with the
//! optimized library paths: kNN lists, kNN densities, delta, sigma, and the
//! per-step greedy gains of both selectors.

use mers_core::coverage::{build_ball_graph, rbf_kernel_matrix};
use mers_core::embedding::{knn, pairwise_distances, DistanceMatrix, EmbeddingView, Metric};
use mers_core::scale::{delta_from_knn, knn_density, median_heuristic_sigma};
use mers_core::select::{greedy_maxherding_multi, greedy_probcover_multi};
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn random_instance(seed: u64, max_n: usize) -> DistanceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_n);
    let d = rng.random_range(1..=5);
    let points = Array2::from_shape_fn((n, d), |_| rng.random_range(-10.0..10.0));
    let view = EmbeddingView::new("random", points).unwrap();
    pairwise_distances(&view, Metric::Euclidean).unwrap()
}

// ---- oracles -------------------------------------------------------------

fn oracle_median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Full-sort kNN: sort every other point by (distance, index) and truncate.
fn oracle_knn(dist: &DistanceMatrix, k: usize) -> Vec<Vec<usize>> {
    let n = dist.n();
    (0..n)
        .map(|i| {
            let mut pairs: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (dist.get(i, j), j))
                .collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            pairs.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

fn oracle_density(dist: &DistanceMatrix, k: usize) -> (Vec<f64>, Vec<f64>) {
    let lists = oracle_knn(dist, k);
    let mut rho = Vec::new();
    let mut f = Vec::new();
    for (i, neighbours) in lists.iter().enumerate() {
        let mut sum = 0.0;
        for &j in neighbours {
            sum += dist.get(i, j);
        }
        let r = sum / k as f64;
        rho.push(r);
        f.push(k as f64 / r.max(1e-12));
    }
    (rho, f)
}

fn oracle_sigma(dist: &DistanceMatrix) -> f64 {
    let n = dist.n();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push(dist.get(i, j));
        }
    }
    oracle_median(&pairs)
}

fn oracle_delta(dist: &DistanceMatrix, k: usize) -> f64 {
    let lists = oracle_knn(dist, k);
    let radii: Vec<f64> = lists
        .iter()
        .enumerate()
        .map(|(i, neighbours)| {
            let ds: Vec<f64> = neighbours.iter().map(|&j| dist.get(i, j)).collect();
            oracle_median(&ds)
        })
        .collect();
    oracle_median(&radii)
}

// ---- tests ---------------------------------------------------------------

#[test]
fn knn_matches_full_sort_oracle() {
    for seed in 0..100 {
        let dist = random_instance(seed, 64);
        let n = dist.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let k = rng.random_range(1..n);
        assert_eq!(
            knn(&dist, k).unwrap(),
            oracle_knn(&dist, k),
            "seed {seed}, n {n}, k {k}"
        );
    }
}

#[test]
fn density_delta_sigma_match_oracles_exactly() {
    for seed in 0..100 {
        let dist = random_instance(seed, 64);
        let n = dist.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1234);
        let k = rng.random_range(1..n);

        let est = knn_density(&dist, k).unwrap();
        let (rho, f) = oracle_density(&dist, k);
        assert_eq!(est.rho_k, rho, "rho mismatch at seed {seed}");
        assert_eq!(est.f_hat, f, "density mismatch at seed {seed}");

        assert_eq!(
            median_heuristic_sigma(&dist).unwrap(),
            oracle_sigma(&dist),
            "sigma mismatch at seed {seed}"
        );
        assert_eq!(
            delta_from_knn(&dist, k).unwrap(),
            oracle_delta(&dist, k),
            "delta mismatch at seed {seed}"
        );
    }
}

/// Re-derive every greedy coverage step from scratch: recompute ball
/// membership from the distances, replay covered sets, rescore every
/// candidate, and demand the identical argmax, gain and tie-break.
#[test]
fn probcover_steps_match_exhaustive_rescoring() {
    for seed in 0..60 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..=20);
        let d = rng.random_range(1..=3);
        let points = Array2::from_shape_fn((n, d), |_| rng.random_range(-3.0..3.0));
        let view = EmbeddingView::new("x", points).unwrap();
        let dist = pairwise_distances(&view, Metric::Euclidean).unwrap();

        let m = rng.random_range(1..=2usize);
        let mut graphs = Vec::new();
        let mut weights = Vec::new();
        let mut deltas = Vec::new();
        for _ in 0..m {
            let delta = rng.random_range(0.3..4.0);
            graphs.push(build_ball_graph(&dist, delta).unwrap());
            weights.push(rng.random_range(0.5..3.0));
            deltas.push(delta);
        }
        let budget = rng.random_range(1..=n.min(5));
        let result = greedy_probcover_multi(&graphs, &weights, budget).unwrap();

        // oracle replay
        let mut covered: Vec<Vec<bool>> = vec![vec![false; n]; m];
        let mut chosen: Vec<usize> = Vec::new();
        for (step, (&recorded_pick, &recorded_gain)) in
            result.chosen.iter().zip(&result.per_step_gain).enumerate()
        {
            let mut best: Option<(usize, f64)> = None;
            for cand in 0..n {
                if chosen.contains(&cand) {
                    continue;
                }
                let mut gain = 0.0;
                for e in 0..m {
                    let count = (0..n)
                        .filter(|&j| dist.get(cand, j) <= deltas[e] && !covered[e][j])
                        .count();
                    gain += weights[e] * count as f64;
                }
                match best {
                    Some((_, bg)) if gain <= bg => {}
                    _ => best = Some((cand, gain)),
                }
            }
            let (oracle_pick, oracle_gain) = best.unwrap();
            assert_eq!(
                recorded_pick, oracle_pick,
                "seed {seed} step {step}: pick mismatch"
            );
            assert_eq!(
                recorded_gain, oracle_gain,
                "seed {seed} step {step}: gain mismatch"
            );
            for (e, mask) in covered.iter_mut().enumerate() {
                for (j, slot) in mask.iter_mut().enumerate() {
                    if dist.get(oracle_pick, j) <= deltas[e] {
                        *slot = true;
                    }
                }
            }
            chosen.push(oracle_pick);
        }
        // gains never increase
        for w in result.per_step_gain.windows(2) {
            assert!(w[1] <= w[0], "seed {seed}: gains increased: {w:?}");
        }
    }
}

#[test]
fn maxherding_steps_match_exhaustive_rescoring() {
    for seed in 0..60 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
        let n = rng.random_range(2..=16);
        let d = rng.random_range(1..=3);
        let points = Array2::from_shape_fn((n, d), |_| rng.random_range(-3.0..3.0));
        let view = EmbeddingView::new("x", points).unwrap();
        let dist = pairwise_distances(&view, Metric::Euclidean).unwrap();
        let kernel = rbf_kernel_matrix(&dist, rng.random_range(0.5..2.0)).unwrap();
        let budget = rng.random_range(1..=n);
        let result = greedy_maxherding_multi(&kernel, budget).unwrap();

        let mut chosen: Vec<usize> = Vec::new();
        for (step, (&recorded_pick, &recorded_gain)) in
            result.chosen.iter().zip(&result.per_step_gain).enumerate()
        {
            // c from scratch over the prefix
            let c: Vec<f64> = (0..n)
                .map(|i| {
                    chosen
                        .iter()
                        .map(|&x| kernel.get(i, x))
                        .fold(0.0f64, f64::max)
                })
                .collect();
            let mut best: Option<(usize, f64)> = None;
            for cand in 0..n {
                if chosen.contains(&cand) {
                    continue;
                }
                let mut acc = 0.0;
                for (i, &c_i) in c.iter().enumerate() {
                    let headroom = kernel.get(i, cand) - c_i;
                    if headroom > 0.0 {
                        acc += headroom;
                    }
                }
                let gain = acc / n as f64;
                match best {
                    Some((_, bg)) if gain <= bg => {}
                    _ => best = Some((cand, gain)),
                }
            }
            let (oracle_pick, oracle_gain) = best.unwrap();
            assert_eq!(recorded_pick, oracle_pick, "seed {seed} step {step}");
            assert_eq!(recorded_gain, oracle_gain, "seed {seed} step {step}");
            chosen.push(oracle_pick);
        }
    }
}
