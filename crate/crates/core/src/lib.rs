//! Numerical workbench for coherent transport by adiabatic passage (CTAP)
//! across quantum-dot arrays.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure numerics:
//!
//! - [`linalg`]: dense complex matrices, a Jacobi eigensolver, the Padé
//!   matrix exponential, conjugate gradient and a portable seeded RNG.
//! - [`quantum`]: the 3- and 5-dot Hamiltonians, the Lindblad right-hand
//!   side with dephasing and loss, and RK4 / exact propagators.
//! - [`pulses`]: Gaussian counter-intuitive and straddling baselines plus
//!   moving-average and cubic-spline post-processing of schedules.
//! - [`env`]: the episodic environment (observations, rewards, early stop).
//! - [`agent`]: a from-scratch TRPO agent with Gaussian MLP policy.
//! - [`analysis`]: randomized tree ensembles and the two-step temporal
//!   Bayesian network used to decide which state variables matter.
//!
//! File formats, configuration parsing and the CLI live in the companion
//! `ctap-workbench` crate.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod agent;
pub mod analysis;
pub mod env;
mod error;
pub mod linalg;
pub mod pulses;
pub mod quantum;

pub use error::{Error, Result};

/// Maximum coupling strength. All energies and rates are in units of it.
pub const OMEGA_MAX: f64 = 1.0;
