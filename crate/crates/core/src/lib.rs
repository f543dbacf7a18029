//! Generative model of soccer shot end coordinates: a hierarchical mixture
//! of truncated bivariate Gaussians over the goal mouth, with the RBPostXg
//! and GenPostXg shooting metrics and a split-half stability harness.
//!
//! Stages, in pipeline order: [`preprocess`] raw events into goal-frame
//! shots, fit global weights over a saturated grid and prune ([`mixture`]),
//! fit per-player weights ([`players`]), fit the PostXg surface and estimate
//! component values ([`valuation`]), build metric tables ([`metrics`]) and
//! measure their stability ([`evaluation`]). [`simulate`] draws synthetic
//! corpora from the same model.

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod metrics;
pub mod mixture;
pub mod players;
pub mod preprocess;
pub mod rng;
pub mod simulate;
pub mod valuation;

pub use error::{Error, Result};
