//! Multi-embedding replay selection (MERS) engine.
//!
//! Replay-based continual learners keep a small exemplar buffer; which
//! exemplars get kept dominates accuracy when the buffer is tiny. This crate
//! selects exemplars by greedy weighted maximum coverage over *several*
//! embedding spaces at once (e.g. a supervised head and a self-supervised
//! backbone), with every scale parameter estimated from the data:
//!
//! * [`embedding`] — load/normalize embedding matrices, pairwise distances,
//!   exact k-nearest-neighbour queries.
//! * [`scale`] — kNN density estimates, per-embedding weights `alpha`,
//!   the supervised/self-supervised ratio `beta`, the RBF bandwidth `sigma`
//!   (median heuristic) and the ball radius `delta`.
//! * [`coverage`] — delta-ball neighbourhood graphs, RBF/combined kernels,
//!   the weighted multi-embedding coverage functional, and a randomized
//!   submodularity checker.
//! * [`select`] — greedy coverage and kernel-herding selectors, classic
//!   herding and random baselines, and a brute-force optimum oracle.
//! * [`buffer`] — a class-balanced replay buffer over an episode stream
//!   with persistence.
//! * [`theory`] — a Gaussian workbench that numerically verifies the
//!   closed-form KL divergences, the equal-volume anisotropy inequalities
//!   and the Pinsker-style train/test risk-gap bound behind the method.
//! * [`metrics`] — continual-learning metrics (FAA/AAA/forgetting/stability)
//!   from a task-accuracy matrix.
//! * [`pipeline`] — per-class orchestration shared by the CLI and the
//!   buffer: auto scale estimation plus selector dispatch.
//! * [`synthetic`] — seeded generators for benchmark and test data.
//!
//! Everything is deterministic: all randomness flows from explicit seeds and
//! results are independent of the worker-thread count.

// `!(x > 0.0)` is used for scalar validation on purpose: unlike `x <= 0.0`
// it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod buffer;
pub mod coverage;
pub mod embedding;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod scale;
pub mod select;
pub mod synthetic;
pub mod theory;

pub use error::{Error, Result};
