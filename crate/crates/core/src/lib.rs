//! Harmonic chain on the discrete torus with random velocity flips.
//!
//! The crate is `no_std` (it needs `alloc`). It contains the equilibrium
//! thermodynamics of the chain, the exact event-driven dynamics, the Gaussian
//! moment flow conditioned on a flip sequence, the limiting diffusion system
//! and the tools used to compare particle profiles with it.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod chain;
pub mod corrected;
pub mod error;
pub mod gaussian;
pub mod harris;
pub mod hydro;
pub mod profile;
pub mod scaling;
pub mod seeds;
pub mod spectral;
pub mod stats;
pub mod thermo;

pub use error::{Error, Result};
