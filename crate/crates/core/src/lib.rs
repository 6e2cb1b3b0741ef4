//! Social influence estimation from retweet cascades, plus the tooling to build
//! and validate empirical influence rankings from pairwise comparisons.

pub mod branching;
pub mod cascade;
pub mod conductance;
pub mod engine;
pub mod error;
pub mod kernel;
pub mod matrix;
pub mod metrics;
pub mod ranking;
pub mod seed;
pub mod simulation;

pub use error::{Error, Result};
