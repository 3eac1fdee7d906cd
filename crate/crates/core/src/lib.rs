//! Probabilistic answer set programming: annotated programs are grounded, turned into a
//! spanning program whose answer sets are the possible worlds, and a probability
//! distribution over those worlds is inferred from the weights.

pub mod approx;
pub mod cli;
pub mod error;
pub mod grounder;
pub mod learning;
pub mod linsys;
pub mod modelcount;
pub mod query;
pub mod sampling;
pub mod spanning;
pub mod syntax;
pub mod worlds;

pub use error::{Error, Result};
