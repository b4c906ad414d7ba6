//! Simulation laboratory for the social-network model: Poisson(lambda) lazy
//! random walkers on regular graphs, where walkers sharing a vertex at the
//! same time become acquainted and friend clusters grow by paths of
//! acquaintances.
//!
//! The crate provides finite observation windows of the infinite graphs
//! ([`graphs`]), exact walk kernels ([`kernels`]), the coupled model itself
//! ([`snsim`]), the staged exploration process ([`explore`]), the lazy
//! branching random walk used as a domination oracle ([`brw`]), the
//! tree-percolation machinery ([`treeperc`]) and the statistical validators
//! and critical-density bracket calculators ([`analysis`]).
//!
//! Monte Carlo replicas fan out through [`replicas`], which runs on rayon by
//! default and falls back to a sequential loop when the `parallel` feature is
//! disabled; results are bit-identical either way.

pub mod analysis;
pub mod brw;
pub mod error;
pub mod explore;
pub mod graphs;
pub mod kernels;
pub mod replicas;
pub mod rng;
pub mod snsim;
pub mod stats;
pub mod treeperc;

pub use error::{Error, Result};
