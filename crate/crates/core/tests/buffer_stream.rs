//! Replay-buffer invariants over randomized episode streams: capacity is
//! never exceeded, classes are never lost, balance holds, empty updates are
//! identities, and persistence round-trips at every step.

use mers_core::buffer::{BufferState, EpisodeBatch, ShrinkPolicy};
use mers_core::pipeline::SelectorSettings;
use mers_core::select::Method;
use mers_core::synthetic::{two_view_gaussian_pool, TwoViewSpec};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn stream_settings(method: Method, seed: u64) -> SelectorSettings {
    SelectorSettings {
        method,
        seed,
        ..Default::default()
    }
}

#[test]
fn random_episode_streams_hold_invariants() {
    for seed in 0..12u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let capacity = *[10, 23, 60].choose(&mut rng).unwrap();
        let method = *[
            Method::MersProbcover,
            Method::MersMaxherding,
            Method::Random,
        ]
        .choose(&mut rng)
        .unwrap();
        let shrink = *[ShrinkPolicy::Reselect, ShrinkPolicy::RandomDrop]
            .choose(&mut rng)
            .unwrap();
        let settings = stream_settings(method, seed);

        let mut state = BufferState::new(capacity).unwrap();
        let mut next_label = 0i64;
        let episodes = rng.random_range(2..=5);
        for episode in 1..=episodes {
            let classes = rng.random_range(1..=3);
            let per_class = rng.random_range(3..=25);
            let pool = two_view_gaussian_pool(&TwoViewSpec {
                classes,
                points_per_class: per_class,
                dim: 5,
                first_label: next_label,
                seed: seed * 100 + episode as u64,
                ..Default::default()
            })
            .unwrap()
            .l2_normalize()
            .unwrap();
            next_label += classes as i64;

            let classes_before: Vec<i64> = state.entries().keys().copied().collect();
            state
                .update(&EpisodeBatch::new(pool, episode), &settings, shrink)
                .unwrap();

            state.check_invariants().unwrap();
            assert!(
                state.total_stored() <= capacity,
                "seed {seed} episode {episode}: capacity exceeded"
            );
            // classes are never lost, only shrunk
            for label in &classes_before {
                assert!(
                    state.entries().contains_key(label),
                    "seed {seed} episode {episode}: class {label} vanished"
                );
            }
            // class balance among classes that filled their budget
            let budget_limited: Vec<usize> = state
                .entries()
                .iter()
                .filter(|(label, entry)| entry.len() == state.budgets()[label] && !entry.is_empty())
                .map(|(_, entry)| entry.len())
                .collect();
            if budget_limited.len() > 1 {
                let max = budget_limited.iter().max().unwrap();
                let min = budget_limited.iter().min().unwrap();
                assert!(
                    max - min <= 1,
                    "seed {seed} episode {episode}: imbalance {budget_limited:?}"
                );
            }
        }

        // empty batch is an identity
        let snapshot = state.clone();
        state
            .update(&EpisodeBatch::empty(99), &settings, shrink)
            .unwrap();
        assert_eq!(state.entries(), snapshot.entries());
        assert_eq!(state.episode_index(), snapshot.episode_index());

        // persistence round-trips the full state
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.mers");
        state.save(&path).unwrap();
        let loaded = BufferState::load(&path).unwrap();
        assert_eq!(loaded.entries(), state.entries());
        assert_eq!(loaded.budgets(), state.budgets());
        assert_eq!(loaded.capacity(), state.capacity());
        assert_eq!(loaded.episode_index(), state.episode_index());
    }
}

#[test]
fn scarcity_stream_flags_zero_budgets() {
    // capacity 5, 4 classes per episode: by episode 2 some classes get 0
    let settings = stream_settings(Method::MersProbcover, 7);
    let mut state = BufferState::new(5).unwrap();
    for episode in 1..=2 {
        let pool = two_view_gaussian_pool(&TwoViewSpec {
            classes: 4,
            points_per_class: 6,
            dim: 4,
            first_label: (episode as i64 - 1) * 4,
            seed: episode as u64,
            ..Default::default()
        })
        .unwrap()
        .l2_normalize()
        .unwrap();
        let outcome = state
            .update(
                &EpisodeBatch::new(pool, episode),
                &settings,
                ShrinkPolicy::Reselect,
            )
            .unwrap();
        if episode == 2 {
            assert!(outcome.budgets.values().any(|&b| b == 0));
            assert!(outcome
                .warnings
                .iter()
                .any(|w| w.contains("zero budget") || w.contains("zero")));
        }
    }
    // zero-budget classes remain present with no exemplars
    assert_eq!(state.entries().len(), 8);
    assert!(state.entries().values().any(|e| e.is_empty()));
    state.check_invariants().unwrap();
}
