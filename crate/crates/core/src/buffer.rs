//! Class-balanced replay buffer over a stream of episodes.
//!
//! The buffer holds up to `capacity` exemplars total, split as evenly as
//! possible across every class seen so far (remainder slots go to the
//! lowest-numbered classes). Each episode introduces new classes: budgets
//! are recomputed, new classes are filled by running the configured
//! selector on their episode pool, and old classes whose budget shrank are
//! re-selected from their cached exemplar embeddings — the original pools
//! and per-episode embedding models are gone by then, so the cached rows
//! (frozen at insertion time) are all there is to choose from. A
//! random-drop shrink policy is available for ablation.
//!
//! Cached rows are stored in f32, the same precision as the on-disk format,
//! so a save/load round trip is lossless.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingView, LabeledPool};
use crate::error::{Error, Result};
use crate::pipeline::{mix_seed, select_for_class, ClassData, SelectorSettings};

/// Magic bytes of the buffer file format.
pub const BUFFER_MAGIC: &[u8; 8] = b"MERSBUF1";

/// Buffer file format version.
pub const BUFFER_VERSION: u8 = 1;

/// How old classes lose exemplars when their budget shrinks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShrinkPolicy {
    /// Re-run the selector on the cached exemplar embeddings.
    Reselect,
    /// Keep a seeded uniform subset (ablation baseline).
    RandomDrop,
}

/// New classes arriving in one episode. Labels must be disjoint from all
/// previous episodes.
#[derive(Debug, Clone)]
pub struct EpisodeBatch {
    pool: Option<LabeledPool>,
    episode_index: u32,
}

impl EpisodeBatch {
    pub fn new(pool: LabeledPool, episode_index: u32) -> Self {
        EpisodeBatch {
            pool: Some(pool),
            episode_index,
        }
    }

    /// A batch with no new classes; updating with it is a no-op.
    pub fn empty(episode_index: u32) -> Self {
        EpisodeBatch {
            pool: None,
            episode_index,
        }
    }

    pub fn pool(&self) -> Option<&LabeledPool> {
        self.pool.as_ref()
    }

    pub fn episode_index(&self) -> u32 {
        self.episode_index
    }
}

/// Cached exemplars of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassEntry {
    /// Global point ids, in selection order.
    pub ids: Vec<u32>,
    /// Cached embedding rows per view, `ids.len() x dim`, frozen at
    /// insertion time.
    pub views: Vec<Array2<f32>>,
    /// Candidate count the last (re)selection chose from; sizes below
    /// budget are legitimate exactly when they equal this.
    pub available: usize,
}

impl ClassEntry {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Budgets after an update plus any scarcity/clamp warnings.
#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    pub budgets: BTreeMap<i64, usize>,
    pub warnings: Vec<String>,
}

/// The replay buffer.
#[derive(Debug, Clone)]
pub struct BufferState {
    capacity: usize,
    episode_index: u32,
    view_names: Vec<String>,
    view_dims: Vec<usize>,
    entries: BTreeMap<i64, ClassEntry>,
    budgets: BTreeMap<i64, usize>,
}

/// Split `capacity` across classes: `floor(capacity / classes)` each, one
/// extra slot for the `capacity mod classes` lowest-numbered classes.
/// Classes that end up with zero budget are flagged, not dropped.
pub fn per_class_budget(
    capacity: usize,
    classes: &[i64],
) -> Result<(BTreeMap<i64, usize>, Vec<String>)> {
    if classes.is_empty() {
        return Err(Error::Degenerate("no classes to budget".into()));
    }
    let mut sorted = classes.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Structure("duplicate class labels".into()));
    }
    let base = capacity / sorted.len();
    let remainder = capacity % sorted.len();
    let mut budgets = BTreeMap::new();
    for (rank, &label) in sorted.iter().enumerate() {
        budgets.insert(label, base + usize::from(rank < remainder));
    }
    let mut warnings = Vec::new();
    if base == 0 {
        let starved = sorted.len() - remainder;
        warnings.push(format!(
            "capacity {capacity} below class count {}: {starved} classes get zero budget",
            sorted.len()
        ));
    }
    Ok((budgets, warnings))
}

impl BufferState {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Budget("buffer capacity must be >= 1".into()));
        }
        Ok(BufferState {
            capacity,
            episode_index: 0,
            view_names: Vec::new(),
            view_dims: Vec::new(),
            entries: BTreeMap::new(),
            budgets: BTreeMap::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn episode_index(&self) -> u32 {
        self.episode_index
    }

    pub fn view_names(&self) -> &[String] {
        &self.view_names
    }

    pub fn entries(&self) -> &BTreeMap<i64, ClassEntry> {
        &self.entries
    }

    pub fn budgets(&self) -> &BTreeMap<i64, usize> {
        &self.budgets
    }

    pub fn total_stored(&self) -> usize {
        self.entries.values().map(ClassEntry::len).sum()
    }

    /// Apply one episode: recompute budgets over all classes seen, select
    /// exemplars for the new classes, shrink old ones whose budget fell.
    /// An empty batch leaves the state untouched.
    pub fn update(
        &mut self,
        batch: &EpisodeBatch,
        settings: &SelectorSettings,
        shrink: ShrinkPolicy,
    ) -> Result<UpdateOutcome> {
        let Some(pool) = batch.pool() else {
            return Ok(UpdateOutcome {
                budgets: self.budgets.clone(),
                warnings: Vec::new(),
            });
        };
        if batch.episode_index() <= self.episode_index {
            return Err(Error::Structure(format!(
                "episode index {} does not advance the stream (currently at {})",
                batch.episode_index(),
                self.episode_index
            )));
        }
        let by_class = pool.class_rows();
        for label in by_class.keys() {
            if self.entries.contains_key(label) {
                return Err(Error::Structure(format!(
                    "class {label} was already introduced in an earlier episode"
                )));
            }
        }
        if self.entries.is_empty() {
            self.view_names = pool.views().iter().map(|v| v.name().to_string()).collect();
            self.view_dims = pool.views().iter().map(|v| v.dim()).collect();
        } else {
            let names: Vec<String> = pool.views().iter().map(|v| v.name().to_string()).collect();
            let dims: Vec<usize> = pool.views().iter().map(|v| v.dim()).collect();
            if names != self.view_names || dims != self.view_dims {
                return Err(Error::Structure(format!(
                    "episode views {names:?}/{dims:?} do not match the buffer's {:?}/{:?}",
                    self.view_names, self.view_dims
                )));
            }
        }

        let all_labels: Vec<i64> = self
            .entries
            .keys()
            .chain(by_class.keys())
            .copied()
            .collect();
        let (budgets, mut warnings) = per_class_budget(self.capacity, &all_labels)?;

        // Shrink old classes first so the capacity is never exceeded even
        // transiently.
        let old_labels: Vec<i64> = self.entries.keys().copied().collect();
        for label in old_labels {
            let budget = budgets[&label];
            let entry = self.entries.get_mut(&label).unwrap();
            if entry.len() <= budget {
                continue;
            }
            if budget == 0 {
                warnings.push(format!("class {label}: budget fell to zero, emptied"));
                entry.ids.clear();
                for (view, &dim) in entry.views.iter_mut().zip(&self.view_dims) {
                    *view = Array2::zeros((0, dim));
                }
                entry.available = 0;
                continue;
            }
            let keep: Vec<usize> = match shrink {
                ShrinkPolicy::Reselect => {
                    let class = cached_class_data(label, entry, &self.view_names)?;
                    let selection = select_for_class(&class, budget, settings, None)?;
                    warnings.extend(selection.warnings);
                    selection.result.chosen
                }
                ShrinkPolicy::RandomDrop => {
                    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(
                        settings.seed,
                        label,
                        u64::from(batch.episode_index()),
                    ));
                    let mut positions =
                        rand::seq::index::sample(&mut rng, entry.len(), budget).into_vec();
                    positions.sort_unstable();
                    positions
                }
            };
            let previous_len = entry.len();
            *entry = take_rows(entry, &keep);
            entry.available = previous_len;
        }

        // Fill new classes from their episode pools.
        for (label, rows) in &by_class {
            let class = ClassData::from_pool(pool, *label, rows)?;
            let budget = budgets[label];
            let selection = select_for_class(&class, budget, settings, None)?;
            warnings.extend(selection.warnings);
            let entry = entry_from_pool(&class, &selection.result.chosen);
            self.entries.insert(*label, entry);
        }

        self.episode_index = batch.episode_index();
        self.budgets = budgets.clone();
        self.check_invariants()?;
        Ok(UpdateOutcome { budgets, warnings })
    }

    /// Structural invariants: capacity is respected, ids are unique within
    /// each class, cached shapes are consistent, and every class size is
    /// explainable as `min(budget, available)`.
    pub fn check_invariants(&self) -> Result<()> {
        if self.total_stored() > self.capacity {
            return Err(Error::Structure(format!(
                "buffer holds {} exemplars over capacity {}",
                self.total_stored(),
                self.capacity
            )));
        }
        for (label, entry) in &self.entries {
            let mut ids = entry.ids.clone();
            ids.sort_unstable();
            if ids.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Structure(format!(
                    "class {label}: duplicate exemplar ids"
                )));
            }
            if entry.views.len() != self.view_dims.len() {
                return Err(Error::Structure(format!(
                    "class {label}: {} cached views, buffer has {}",
                    entry.views.len(),
                    self.view_dims.len()
                )));
            }
            for (view, &dim) in entry.views.iter().zip(&self.view_dims) {
                if view.nrows() != entry.len() || view.ncols() != dim {
                    return Err(Error::Structure(format!(
                        "class {label}: cached view is {}x{}, expected {}x{dim}",
                        view.nrows(),
                        view.ncols(),
                        entry.len()
                    )));
                }
            }
            if let Some(&budget) = self.budgets.get(label) {
                let expected = budget.min(entry.available);
                if entry.len() != expected {
                    return Err(Error::Structure(format!(
                        "class {label}: holds {} exemplars, expected min(budget {budget}, available {}) = {expected}",
                        entry.len(),
                        entry.available
                    )));
                }
            }
        }
        Ok(())
    }

    /// Serialize to the buffer file format.
    pub fn save(&self, path: &Path) -> Result<()> {
        let manifest = Manifest {
            capacity: self.capacity,
            episode_index: self.episode_index,
            views: self
                .view_names
                .iter()
                .zip(&self.view_dims)
                .map(|(name, &dim)| ViewMeta {
                    name: name.clone(),
                    dim,
                })
                .collect(),
            classes: self
                .entries
                .iter()
                .map(|(&label, entry)| ClassMeta {
                    label,
                    count: entry.len(),
                    available: entry.available,
                    budget: self.budgets.get(&label).copied().unwrap_or(0),
                    ids: entry.ids.clone(),
                })
                .collect(),
        };
        let header = serde_json::to_vec(&manifest)
            .map_err(|e| Error::Structure(format!("manifest serialization failed: {e}")))?;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(BUFFER_MAGIC);
        bytes.push(BUFFER_VERSION);
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&header);
        for entry in self.entries.values() {
            for view in &entry.views {
                for v in view.iter() {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    /// Load a buffer saved by [`BufferState::save`].
    pub fn load(path: &Path) -> Result<BufferState> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() < 13 {
            return Err(Error::parse(path, "byte offset 0", "file too short"));
        }
        if &bytes[0..8] != BUFFER_MAGIC {
            return Err(Error::parse(
                path,
                "byte offset 0",
                format!("bad magic {:?}, expected {BUFFER_MAGIC:?}", &bytes[0..8]),
            ));
        }
        if bytes[8] != BUFFER_VERSION {
            return Err(Error::parse(
                path,
                "byte offset 8",
                format!(
                    "unsupported version {}, expected {BUFFER_VERSION}",
                    bytes[8]
                ),
            ));
        }
        let header_len = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
        if bytes.len() < 13 + header_len {
            return Err(Error::parse(
                path,
                "byte offset 13",
                "file truncated inside the manifest",
            ));
        }
        let manifest: Manifest = serde_json::from_slice(&bytes[13..13 + header_len])
            .map_err(|e| Error::parse(path, "manifest", e.to_string()))?;

        let mut state = BufferState::new(manifest.capacity)?;
        state.episode_index = manifest.episode_index;
        state.view_names = manifest.views.iter().map(|v| v.name.clone()).collect();
        state.view_dims = manifest.views.iter().map(|v| v.dim).collect();

        let mut offset = 13 + header_len;
        for class in &manifest.classes {
            if class.ids.len() != class.count {
                return Err(Error::parse(
                    path,
                    "manifest",
                    format!(
                        "class {}: {} ids for count {}",
                        class.label,
                        class.ids.len(),
                        class.count
                    ),
                ));
            }
            let mut views = Vec::with_capacity(state.view_dims.len());
            for &dim in &state.view_dims {
                let bytes_needed = class.count * dim * 4;
                if bytes.len() < offset + bytes_needed {
                    return Err(Error::parse(
                        path,
                        format!("byte offset {offset}"),
                        "file truncated inside an embedding block",
                    ));
                }
                let mut flat = Vec::with_capacity(class.count * dim);
                for chunk in bytes[offset..offset + bytes_needed].chunks_exact(4) {
                    flat.push(f32::from_le_bytes(chunk.try_into().unwrap()));
                }
                offset += bytes_needed;
                views.push(
                    Array2::from_shape_vec((class.count, dim), flat)
                        .map_err(|e| Error::parse(path, "embedding block", e.to_string()))?,
                );
            }
            state.entries.insert(
                class.label,
                ClassEntry {
                    ids: class.ids.clone(),
                    views,
                    available: class.available,
                },
            );
            state.budgets.insert(class.label, class.budget);
        }
        if offset != bytes.len() {
            return Err(Error::parse(
                path,
                format!("byte offset {offset}"),
                format!("{} trailing bytes", bytes.len() - offset),
            ));
        }
        state.check_invariants()?;
        Ok(state)
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    capacity: usize,
    episode_index: u32,
    views: Vec<ViewMeta>,
    classes: Vec<ClassMeta>,
}

#[derive(Serialize, Deserialize)]
struct ViewMeta {
    name: String,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct ClassMeta {
    label: i64,
    count: usize,
    available: usize,
    budget: usize,
    ids: Vec<u32>,
}

/// Rebuild selector input from a class's cached rows.
fn cached_class_data(label: i64, entry: &ClassEntry, view_names: &[String]) -> Result<ClassData> {
    let views = entry
        .views
        .iter()
        .zip(view_names)
        .map(|(rows, name)| {
            let points = rows.mapv(f64::from);
            EmbeddingView::with_ids(name.clone(), points, entry.ids.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassData {
        label,
        global_ids: entry.ids.clone(),
        views,
    })
}

fn take_rows(entry: &ClassEntry, positions: &[usize]) -> ClassEntry {
    let ids = positions.iter().map(|&p| entry.ids[p]).collect();
    let views = entry
        .views
        .iter()
        .map(|view| {
            Array2::from_shape_fn((positions.len(), view.ncols()), |(i, j)| {
                view[(positions[i], j)]
            })
        })
        .collect();
    ClassEntry {
        ids,
        views,
        available: entry.available,
    }
}

fn entry_from_pool(class: &ClassData, chosen_local: &[usize]) -> ClassEntry {
    let ids = chosen_local
        .iter()
        .map(|&local| class.global_ids[local])
        .collect();
    let views = class
        .views
        .iter()
        .map(|view| {
            Array2::from_shape_fn((chosen_local.len(), view.dim()), |(i, j)| {
                view.points()[(chosen_local[i], j)] as f32
            })
        })
        .collect();
    ClassEntry {
        ids,
        views,
        available: class.n(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::select::Method;
    use crate::synthetic::{two_view_gaussian_pool, TwoViewSpec};

    fn episode(first_label: i64, classes: usize, per_class: usize, seed: u64) -> LabeledPool {
        two_view_gaussian_pool(&TwoViewSpec {
            classes,
            points_per_class: per_class,
            dim: 6,
            first_label,
            seed,
            ..Default::default()
        })
        .unwrap()
        .l2_normalize()
        .unwrap()
    }

    fn settings() -> SelectorSettings {
        SelectorSettings {
            method: Method::MersProbcover,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn budget_split_examples() {
        let classes: Vec<i64> = (0..10).collect();
        let (budgets, warnings) = per_class_budget(100, &classes).unwrap();
        assert!(budgets.values().all(|&b| b == 10));
        assert!(warnings.is_empty());

        let classes: Vec<i64> = (0..30).collect();
        let (budgets, _) = per_class_budget(100, &classes).unwrap();
        assert_eq!(budgets.values().sum::<usize>(), 100);
        for (label, budget) in &budgets {
            assert_eq!(*budget, if *label < 10 { 4 } else { 3 });
        }

        let classes: Vec<i64> = (0..10).collect();
        let (budgets, warnings) = per_class_budget(5, &classes).unwrap();
        assert_eq!(budgets.values().filter(|&&b| b == 1).count(), 5);
        assert_eq!(budgets.values().filter(|&&b| b == 0).count(), 5);
        assert!(!warnings.is_empty());
    }

    /// Capacity 100 with an opening episode of 10 classes x 500 points:
    /// every class ends up with exactly 10 selector-chosen exemplars.
    #[test]
    fn paper_regime_first_episode() {
        let mut state = BufferState::new(100).unwrap();
        let batch = EpisodeBatch::new(episode(0, 10, 500, 4), 1);
        let outcome = state
            .update(&batch, &settings(), ShrinkPolicy::Reselect)
            .unwrap();
        assert!(outcome.budgets.values().all(|&b| b == 10));
        assert_eq!(state.total_stored(), 100);
        for entry in state.entries().values() {
            assert_eq!(entry.len(), 10);
            assert_eq!(entry.available, 500);
        }
        state.check_invariants().unwrap();
    }

    #[test]
    fn first_episode_fills_classes() {
        let mut state = BufferState::new(20).unwrap();
        let batch = EpisodeBatch::new(episode(0, 2, 30, 1), 1);
        let outcome = state
            .update(&batch, &settings(), ShrinkPolicy::Reselect)
            .unwrap();
        assert_eq!(outcome.budgets[&0], 10);
        assert_eq!(state.total_stored(), 20);
        assert_eq!(state.entries()[&0].len(), 10);
        state.check_invariants().unwrap();
    }

    #[test]
    fn second_episode_shrinks_old_classes() {
        let mut state = BufferState::new(20).unwrap();
        state
            .update(
                &EpisodeBatch::new(episode(0, 2, 30, 1), 1),
                &settings(),
                ShrinkPolicy::Reselect,
            )
            .unwrap();
        let before: Vec<u32> = state.entries()[&0].ids.clone();
        state
            .update(
                &EpisodeBatch::new(episode(2, 2, 30, 2), 2),
                &settings(),
                ShrinkPolicy::Reselect,
            )
            .unwrap();
        assert_eq!(state.total_stored(), 20);
        assert_eq!(state.entries().len(), 4);
        for entry in state.entries().values() {
            assert_eq!(entry.len(), 5);
        }
        // shrunk set is a subset of the previous exemplars
        for id in &state.entries()[&0].ids {
            assert!(before.contains(id));
        }
        state.check_invariants().unwrap();
    }

    #[test]
    fn small_class_stores_all_points() {
        let mut state = BufferState::new(100).unwrap();
        let batch = EpisodeBatch::new(episode(0, 2, 7, 3), 1);
        state
            .update(&batch, &settings(), ShrinkPolicy::Reselect)
            .unwrap();
        // budget is 50/class but only 7 points exist
        assert_eq!(state.entries()[&0].len(), 7);
        state.check_invariants().unwrap();
    }

    #[test]
    fn empty_batch_is_identity() {
        let mut state = BufferState::new(20).unwrap();
        state
            .update(
                &EpisodeBatch::new(episode(0, 2, 30, 1), 1),
                &settings(),
                ShrinkPolicy::Reselect,
            )
            .unwrap();
        let snapshot = state.clone();
        state
            .update(&EpisodeBatch::empty(5), &settings(), ShrinkPolicy::Reselect)
            .unwrap();
        assert_eq!(state.episode_index(), snapshot.episode_index());
        assert_eq!(state.entries(), snapshot.entries());
    }

    #[test]
    fn repeated_class_is_rejected() {
        let mut state = BufferState::new(20).unwrap();
        state
            .update(
                &EpisodeBatch::new(episode(0, 2, 10, 1), 1),
                &settings(),
                ShrinkPolicy::Reselect,
            )
            .unwrap();
        let err = state
            .update(
                &EpisodeBatch::new(episode(1, 2, 10, 2), 2),
                &settings(),
                ShrinkPolicy::Reselect,
            )
            .unwrap_err();
        assert!(matches!(err, Error::Structure(_)));
    }

    #[test]
    fn random_drop_policy_shrinks_deterministically() {
        let run = || {
            let mut state = BufferState::new(12).unwrap();
            state
                .update(
                    &EpisodeBatch::new(episode(0, 2, 20, 1), 1),
                    &settings(),
                    ShrinkPolicy::RandomDrop,
                )
                .unwrap();
            state
                .update(
                    &EpisodeBatch::new(episode(2, 2, 20, 2), 2),
                    &settings(),
                    ShrinkPolicy::RandomDrop,
                )
                .unwrap();
            state.entries()[&0].ids.clone()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("buffer.mers");
        let mut state = BufferState::new(20).unwrap();
        state
            .update(
                &EpisodeBatch::new(episode(0, 2, 30, 1), 1),
                &settings(),
                ShrinkPolicy::Reselect,
            )
            .unwrap();
        state.save(&path).unwrap();
        let loaded = BufferState::load(&path).unwrap();
        assert_eq!(loaded.capacity(), state.capacity());
        assert_eq!(loaded.episode_index(), state.episode_index());
        assert_eq!(loaded.entries(), state.entries());
        assert_eq!(loaded.budgets(), state.budgets());
    }

    #[test]
    fn empty_buffer_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("buffer.mers");
        let state = BufferState::new(5).unwrap();
        state.save(&path).unwrap();
        let loaded = BufferState::load(&path).unwrap();
        assert_eq!(loaded.entries().len(), 0);
        assert_eq!(loaded.capacity(), 5);
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("buffer.mers");
        std::fs::write(&path, b"NOTABUF1\x01\x00\x00\x00\x00").unwrap();
        assert!(matches!(BufferState::load(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("buffer.mers");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(BUFFER_MAGIC);
        bytes.push(99);
        bytes.extend_from_slice(&0u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let err = BufferState::load(&path).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }
}
