//! noiselab — noise-robust image classification at desk scale.
//!
//! Label noise (annotation errors) makes classifiers overfit wrong labels.
//! This crate implements a three-part defense that runs in seconds on
//! MNIST-style or synthetic data:
//!
//! 1. **Noise-rate estimation** ([`estimator`]): after vanilla training on a
//!    corrupted set, per-sample CE losses are bucketed into 1000 intervals;
//!    an affine regressor fitted on auxiliary datasets with known injected
//!    noise predicts the unknown noise rate from the bucket ratios.
//! 2. **Three-phase sample selection** ([`pipeline`]): pre-train, rank
//!    samples by loss, drop the top `eta_hat - margin` fraction, retrain on
//!    the cleaned remainder.
//! 3. **Sparse regularization** ([`objective`]): generalized cross entropy
//!    plus a tempered softmax and an Lp penalty that pushes outputs toward
//!    one-hot, limiting what the remaining noise can teach the network.
//!
//! Everything is deterministic: one documented generator ([`rng`]) drives
//! all stochastic operations, so any command repeated with the same seed
//! produces byte-identical reports.
//!
//! ## Capability tour (runnable examples)
//!
//! ```bash
//! cargo run --release -p noiselab --example synthesize_and_corrupt
//! cargo run --release -p noiselab --example parse_idx
//! cargo run --release -p noiselab --example train_estimator
//! cargo run --release -p noiselab --example run_pipeline
//! cargo run --release -p noiselab --example baseline_vs_pipeline
//! cargo run --release -p noiselab --example ablate_forget_rate
//! ```
//!
//! The same capabilities are scriptable through the `noiselab` binary; see
//! the README for the subcommand surface.

// Numeric kernels index matrices directly for symmetry with the math, and
// `!(x > 0.0)`-style validation deliberately rejects NaN along with
// out-of-range values.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod estimator;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod objective;
pub mod pipeline;
pub mod rng;

mod trainer;

pub use error::{Error, Result};
