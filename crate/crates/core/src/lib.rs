//! Agent-based voting model and jury selection procedures.
//!
//! The crate simulates binary up/down votes cast by authentic and
//! coordinated-inauthentic agents, and implements the jury selection
//! pipeline that recovers a wise crowd from the vote data alone:
//!
//! 1. bootstrap the voting rounds ([`sim`]),
//! 2. build the agent correlation matrix and its leading spectral
//!    components ([`numerics`]),
//! 3. cluster agents in component space with a Gaussian mixture (BIC) or
//!    k-means (gap statistic) ([`clustering`]),
//! 4. label clusters with an L1-penalised logistic regression against post
//!    quality and aggregate bootstrap verdicts per agent ([`labeling`]),
//! 5. score juries by majority correctness ([`metrics`]).
//!
//! Everything here is pure computation over `alloc` collections; file
//! formats, experiment orchestration and the command line live in the
//! `jury` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod clustering;
pub mod error;
pub mod labeling;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
