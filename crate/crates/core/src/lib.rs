//! Ferromagnetic Ising model on locally tree-like random graphs.
//!
//! The crate computes the thermodynamic limit of the pressure, magnetization,
//! internal energy and susceptibility from the fixed point of the cavity
//! recursion, and checks them against finite-volume oracles: exact
//! enumeration on small graphs, exact pruning on finite trees, and Glauber
//! dynamics with thermodynamic integration on large random graphs.
//!
//! Module map:
//!
//! - [`degree_laws`]: degree distributions and their size-biased laws
//! - [`graph`]: configuration model, Erdős-Rényi, local-structure diagnostics
//! - [`exact`]: brute-force enumeration oracle
//! - [`tree`]: leaf-to-root cavity sweeps on finite trees
//! - [`population`]: population dynamics for the distributional fixed point
//! - [`thermo`]: limiting pressure and its derivatives
//! - [`mcmc`]: heat-bath dynamics and thermodynamic integration
//! - [`verify`]: inequality and consistency suites used by the CLI

pub mod canonical;
pub mod degree_laws;
pub mod error;
pub mod exact;
pub mod graph;
pub mod math;
pub mod mcmc;
pub mod population;
pub mod rng;
pub mod stats;
pub mod thermo;
pub mod tree;
pub mod verify;

pub use degree_laws::{DegreeLaw, LawSpec};
pub use error::{Error, Result};
pub use graph::MultiGraph;
pub use stats::Estimate;
