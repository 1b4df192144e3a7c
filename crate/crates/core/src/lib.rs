//! Soft-label effectiveness indicators, learnability bounds and simulators.

pub mod bounds;
pub mod dynamics;
pub mod ermsim;
pub mod error;
pub mod indicators;
pub mod io;
pub mod label;
pub mod noise;
pub mod pll;
pub mod rng;
pub mod scalar;
pub mod teacher;

pub use error::{Error, Result};
pub use label::{LabeledExample, Semantics, SoftDataset, SoftLabel, TopKSet};
pub use rng::RandomSeed;
pub use scalar::Scalar;
