//! Predictor-informed nonparametric clustering with a pyramid tree over the
//! covariates nested inside a common-atoms mixture.
//!
//! This crate holds the pure algorithmic part: truncated stick-breaking,
//! the pyramid tree prior and its Metropolis-Hastings moves, the response
//! likelihoods, the block Gibbs sampler together with the DP and
//! fixed-group baselines, posterior summaries, and the simulation
//! generators. It is `no_std` and only needs `alloc`; file formats, the
//! command line and parallel chain orchestration live in the `capgm` crate.
//!
//! Labels are 0-based everywhere in this crate. Front ends add one when
//! writing them out.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod data;
mod error;
pub mod inference;
pub mod likelihood;
pub mod math;
pub mod rng;
pub mod sampler;
pub mod simgen;
pub mod sticks;
pub mod tree;

pub use data::Dataset;
pub use error::{Error, Result};
pub use likelihood::{Atom, Family, FamilyPrior, LikelihoodModel};
pub use sampler::{
    run_chain, run_chains, ChainTrace, IterationRecord, Method, ModelSpec, SamplerConfig, Structure,
};
pub use sticks::{Hyperparameters, LatentState, StickVariables, StickWeights, TruncationLevels};
pub use tree::{PyramidTree, SplittingRule, TreeConfig};
