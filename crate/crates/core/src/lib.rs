//! High-dimensional batch Bayesian optimization under a linear-embedding
//! assumption.
//!
//! A Gaussian process with the Mahalanobis kernel learns an embedding `B`
//! from data; queries are then chosen directly in the original box by
//! minimizing a confidence-bound acquisition and completing the batch with a
//! continuous k-DPP sampler. Two-step baselines (optimize in `z = Bx`, then
//! reconstruct `x`) live in [`reconstruction`].

pub mod acquisition;
pub mod batch_dpp;
pub mod benchmarks;
pub mod domain;
pub mod error;
pub mod flags;
pub mod gp;
pub mod harness;
pub mod linalg;
pub mod optim;
pub mod reconstruction;

pub use domain::{BoxDomain, Dataset};
pub use error::{Error, Result};
