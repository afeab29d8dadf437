//! Adaptive Q2 finite elements for the penalized Frank-Oseen model of nematic
//! liquid crystals with dielectric and flexoelectric coupling.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command-line driver live in the `nematic-amr` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
#[macro_use]
extern crate std;

pub mod error;
pub mod estimator;
pub mod fem;
pub mod mesh;
pub mod metrics;
pub mod physics;
pub mod problem;
pub mod solver;

pub use error::{Error, Result};
