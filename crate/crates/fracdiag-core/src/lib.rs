//! Core numerics for scale-aware diagnostics of neural-network training runs.
//!
//! Everything in this crate is pure computation over in-memory data:
//!
//! - [`segment`] — valid segmentation scales and overlapping sub-matrix
//!   extraction from 2-D parameter slices.
//! - [`fractal`] — box-counting fractal dimension and histogram entropy of
//!   segments.
//! - [`graph`] — entropy/dimension-weighted segment features, exponential
//!   kernel edges, degree-normalized graph propagation, and cross-scale
//!   hypergraph aggregation.
//! - [`phase`] — per-segment gradient-norm trajectories, temporal
//!   differences, and attractor-contraction metrics.
//! - [`nn`] — a dependency-free deterministic trainer (conv / pool / dense,
//!   Adam, cross-entropy) that emits per-epoch snapshots.
//! - [`run`] — the in-memory model of a training run (epoch snapshots of
//!   named tensors plus scalar loss) shared by the trainer and all analyses.
//! - [`pipeline`] — glue that drives the analyses over a whole run.
//!
//! The crate is `no_std` (with `alloc`); file formats, CLI, and exports live
//! in the companion `fracdiag` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod fractal;
pub mod graph;
pub mod mat;
pub mod nn;
pub mod phase;
pub mod pipeline;
pub mod real;
pub mod rng;
pub mod run;
pub mod segment;
pub mod synth;

pub use error::CoreError;
pub use mat::{BoolGrid, Mat};
pub use real::Real;
pub use run::{Dtype, EpochData, RunData, Tensor};
