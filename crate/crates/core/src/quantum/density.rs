use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::{min_eigenvalue, MasterEquationModel};
use crate::linalg::CMatrix;
use crate::{Error, Result};

pub(crate) const HERMITIAN_TOL: f64 = 1e-12;
pub(crate) const TRACE_TOL: f64 = 1e-9;
pub(crate) const POSITIVITY_TOL: f64 = 1e-8;

/// Density matrix over the dot basis, with the vacuum level at index 0 when
/// the model includes loss.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_dots: usize,
    include_vacuum: bool,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// `|k><k|` with the electron on dot `k` (1-based).
    pub fn localized(model: &MasterEquationModel, k: usize) -> Result<Self> {
        if !(1..=model.n_dots()).contains(&k) {
            return Err(Error::invalid(format!("dot {k} outside 1..={}", model.n_dots())));
        }
        let mut matrix = CMatrix::zeros(model.dim());
        let i = model.dot_index(k);
        matrix[(i, i)] = Complex64::new(1.0, 0.0);
        Ok(Self { n_dots: model.n_dots(), include_vacuum: model.include_vacuum(), matrix })
    }

    /// Wraps a raw matrix, checking that its dimension matches the model.
    /// The physical invariants are not checked here; see [`Self::validate`].
    pub fn from_matrix(model: &MasterEquationModel, matrix: CMatrix) -> Result<Self> {
        if matrix.dim() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), found: matrix.dim() });
        }
        Ok(Self { n_dots: model.n_dots(), include_vacuum: model.include_vacuum(), matrix })
    }

    pub fn n_dots(&self) -> usize {
        self.n_dots
    }

    pub fn include_vacuum(&self) -> bool {
        self.include_vacuum
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut CMatrix {
        &mut self.matrix
    }

    #[inline]
    fn index(&self, dot: usize) -> usize {
        debug_assert!((1..=self.n_dots).contains(&dot));
        if self.include_vacuum {
            dot
        } else {
            dot - 1
        }
    }

    /// Basis labels in matrix order: `"0"` for the vacuum, then `"1".."N"`.
    pub fn basis_labels(&self) -> Vec<alloc::string::String> {
        let first = if self.include_vacuum { 0 } else { 1 };
        (first..=self.n_dots).map(|k| format!("{k}")).collect()
    }

    /// Occupation `ρ_kk` of dot `k` (1-based).
    pub fn population(&self, dot: usize) -> f64 {
        let i = self.index(dot);
        self.matrix[(i, i)].re
    }

    /// Occupations of dots 1..N.
    pub fn populations(&self) -> Vec<f64> {
        (1..=self.n_dots).map(|k| self.population(k)).collect()
    }

    /// `ρ_jk` between dots `j` and `k` (1-based).
    pub fn coherence(&self, j: usize, k: usize) -> Complex64 {
        self.matrix[(self.index(j), self.index(k))]
    }

    /// Population of the last dot, the transfer fidelity.
    pub fn fidelity(&self) -> f64 {
        self.population(self.n_dots)
    }

    pub fn vacuum_population(&self) -> f64 {
        if self.include_vacuum {
            self.matrix[(0, 0)].re
        } else {
            0.0
        }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn dot_trace(&self) -> f64 {
        (1..=self.n_dots).map(|k| self.population(k)).sum()
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn validate(&self) -> Result<()> {
        self.validate_at(0)
    }

    pub(crate) fn validate_at(&self, step: usize) -> Result<()> {
        let fail = |reason: alloc::string::String| Err(Error::NumericalInstability { step, reason });
        if !self.matrix.is_finite() {
            return fail("non-finite density matrix".into());
        }
        let herm = self.matrix.hermiticity_defect();
        if herm > HERMITIAN_TOL {
            return fail(format!("Hermiticity defect {herm:e}"));
        }
        let tr = self.trace();
        // The vacuum level always closes the basis, so the full trace is 1.
        if (tr - 1.0).abs() > TRACE_TOL {
            return fail(format!("trace {tr} deviates from 1"));
        }
        let lowest = min_eigenvalue(&self.matrix)?;
        if lowest < -POSITIVITY_TOL {
            return fail(format!("lost positivity, smallest eigenvalue {lowest:e}"));
        }
        Ok(())
    }
}
