//! Simulation laboratory for the TS-GE non-stationary bandit.
//!
//! The crate bundles a piecewise-stationary Gaussian bandit ([`env`]), the
//! TS-GE agent with broadcast probing and binary-coded group exploration
//! ([`agent`]), comparator agents ([`baselines`]), closed-form bound
//! evaluators ([`analysis`]), a SWIPT IIoT case study with a stochastic
//! geometry oracle ([`swipt`]) and a seeded experiment runner ([`harness`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod analysis;
pub mod baselines;
pub mod env;
pub mod error;
pub mod harness;
pub mod quad;
pub mod sim;
pub mod swipt;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate.
pub type Rng = ChaCha8Rng;

/// Builds an independent generator for `(seed, stream)`.
///
/// Environments and agents sharing a seed draw from different streams so
/// that changing one component's consumption never perturbs the other.
pub fn seeded_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) mod streams {
    pub const ENV: u64 = 0;
    pub const AGENT: u64 = 1;
    pub const GEOMETRY: u64 = 2;
    pub const PLANT: u64 = 3;
}
