//! Open-system dynamics of an electron shuttled along a linear array of
//! quantum dots.
//!
//! Natural units throughout: ħ = 1 and the maximum coupling Ω_max = 1, so
//! times are measured in units of 1/Ω_max (configuration files quote them
//! as multiples of π/Ω_max).
//!
//! The state lives in the dot basis `|1>..|N>`, optionally preceded by an
//! auxiliary vacuum level `|0>` (index 0) that receives population removed by
//! the loss channel.

mod density;
mod hamiltonian;
mod lindblad;
mod propagate;

pub use density::DensityMatrix;
pub use hamiltonian::{build_hamiltonian, dark_state, eigen_spectrum, ideal_hamiltonian, min_eigenvalue};
pub use lindblad::{lindblad_rhs, superoperator};
pub use propagate::{evolve, step, Method, Trajectory};

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Parameters of the Lindblad master equation: site energies, dephasing and
/// loss rates. The Hamiltonian couplings are supplied per step as controls.
#[derive(Clone, Debug, PartialEq)]
pub struct MasterEquationModel {
    n_dots: usize,
    energies: Vec<f64>,
    gamma_d: f64,
    gamma_l: f64,
}

impl MasterEquationModel {
    /// `energies[k]` is the ground-state energy of dot `k+1` relative to dot 1,
    /// so `energies[0]` must be zero.
    pub fn new(n_dots: usize, energies: Vec<f64>, gamma_d: f64, gamma_l: f64) -> Result<Self> {
        if n_dots != 3 && n_dots != 5 {
            return Err(Error::invalid("only 3- and 5-dot arrays are supported"));
        }
        if energies.len() != n_dots {
            return Err(Error::DimensionMismatch { expected: n_dots, found: energies.len() });
        }
        if energies[0] != 0.0 {
            return Err(Error::invalid("energy of dot 1 is the reference and must be 0"));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::invalid("energies must be finite"));
        }
        if !(gamma_d >= 0.0 && gamma_d.is_finite()) || !(gamma_l >= 0.0 && gamma_l.is_finite()) {
            return Err(Error::invalid("rates must be finite and non-negative"));
        }
        Ok(Self { n_dots, energies, gamma_d, gamma_l })
    }

    pub fn ideal(n_dots: usize) -> Result<Self> {
        Self::new(n_dots, vec![0.0; n_dots], 0.0, 0.0)
    }

    /// Three dots with detunings Δ12 = E2 − E1 and Δ23 = E3 − E2, so that
    /// Δ13 = Δ12 + Δ23.
    pub fn three_dot(delta12: f64, delta23: f64, gamma_d: f64, gamma_l: f64) -> Result<Self> {
        Self::new(3, vec![0.0, delta12, delta12 + delta23], gamma_d, gamma_l)
    }

    pub fn n_dots(&self) -> usize {
        self.n_dots
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn gamma_d(&self) -> f64 {
        self.gamma_d
    }

    pub fn gamma_l(&self) -> f64 {
        self.gamma_l
    }

    /// The vacuum level is part of the basis exactly when loss is present.
    pub fn include_vacuum(&self) -> bool {
        self.gamma_l > 0.0
    }

    pub fn dim(&self) -> usize {
        self.n_dots + usize::from(self.include_vacuum())
    }

    /// Matrix index of dot `k` (1-based).
    #[inline]
    pub fn dot_index(&self, k: usize) -> usize {
        debug_assert!((1..=self.n_dots).contains(&k));
        if self.include_vacuum() {
            k
        } else {
            k - 1
        }
    }

    /// Number of control channels: (Ω12, Ω23) for three dots and
    /// (Ω_left, Ω_middle, Ω_right) for five.
    pub fn control_arity(&self) -> usize {
        if self.n_dots == 3 {
            2
        } else {
            3
        }
    }

    /// Tunnel couplings between neighbouring dots for the given controls.
    /// For five dots both interior couplings follow Ω_middle.
    pub fn couplings(&self, controls: &[f64]) -> Result<Vec<f64>> {
        if controls.len() != self.control_arity() {
            return Err(Error::DimensionMismatch { expected: self.control_arity(), found: controls.len() });
        }
        if let Some(bad) = controls.iter().find(|&&c| !(0.0..=crate::OMEGA_MAX).contains(&c)) {
            return Err(Error::invalid(alloc::format!("control {bad} outside [0, Ω_max]")));
        }
        Ok(match self.n_dots {
            3 => controls.to_vec(),
            _ => vec![controls[0], controls[1], controls[1], controls[2]],
        })
    }
}
