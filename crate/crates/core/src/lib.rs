//! Prediction scores for the expected cumulative number of recurrent
//! events, with and without a terminal event.
//!
//! The central quantity is the inverse-probability-of-censoring weighted
//! criterion
//!
//! ```text
//! MSE(t, μ̂) = (1/n) Σ_i ( ∫_0^t dN_i(u) / (1 - Ĝ(u-)) - μ̂(t | X_i) )²
//! ```
//!
//! and the score of a model relative to a covariate-free reference,
//! `MSE(t, μ̂_0) - MSE(t, μ̂)`.

pub mod censoring;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod io;
pub mod oracle;
pub mod scoring;
pub mod simulation;
pub mod step;
pub mod types;

pub use error::{Error, Result};
