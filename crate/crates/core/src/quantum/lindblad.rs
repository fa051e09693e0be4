use num_complex::Complex64;

use super::{DensityMatrix, MasterEquationModel};
use crate::linalg::CMatrix;
use crate::{Error, Result};

/// Right-hand side of the Lindblad master equation
///
/// ```text
/// dρ/dt = −i[H, ρ] + Σ_n Γ_n (A_n ρ A_n† − ½{A_n† A_n, ρ})
/// ```
///
/// with pure dephasing `A_k = |k><k|` (rate Γ_d) on every dot and loss
/// `A_k = |0><k|` (rate Γ_l) into the vacuum level. Dephasing damps
/// dot–dot coherences at rate Γ_d and leaves populations untouched.
pub fn lindblad_rhs(model: &MasterEquationModel, h: &CMatrix, rho: &DensityMatrix) -> Result<CMatrix> {
    let dim = model.dim();
    if h.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: h.dim() });
    }
    if rho.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: rho.dim() });
    }
    let mut out = CMatrix::zeros(dim);
    rhs_into(model, h, rho.matrix(), &mut out);
    Ok(out)
}

/// Allocation-free kernel behind [`lindblad_rhs`]; dimensions are trusted.
pub(crate) fn rhs_into(model: &MasterEquationModel, h: &CMatrix, rho: &CMatrix, out: &mut CMatrix) {
    let n = rho.dim();
    let hs = h.as_slice();
    let rs = rho.as_slice();
    let os = out.as_mut_slice();

    // −i[H, ρ]
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += hs[i * n + k] * rs[k * n + j] - rs[i * n + k] * hs[k * n + j];
            }
            os[i * n + j] = Complex64::new(acc.im, -acc.re);
        }
    }

    let offset = usize::from(model.include_vacuum());
    let gd = model.gamma_d();
    if gd > 0.0 {
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let dots = usize::from(i >= offset) + usize::from(j >= offset);
                // Each dephased index contributes Γ_d/2 of damping.
                let rate = 0.5 * gd * dots as f64;
                os[i * n + j] -= rs[i * n + j] * rate;
            }
        }
    }

    let gl = model.gamma_l();
    if gl > 0.0 {
        for k in offset..n {
            os[0] += rs[k * n + k] * gl;
            for j in 0..n {
                os[k * n + j] -= rs[k * n + j] * (0.5 * gl);
                os[j * n + k] -= rs[j * n + k] * (0.5 * gl);
            }
        }
    }
}

/// Lindblad generator as a matrix acting on row-major `vec(ρ)`, so that
/// `d vec(ρ)/dt = L · vec(ρ)`.
pub fn superoperator(model: &MasterEquationModel, h: &CMatrix) -> Result<CMatrix> {
    let dim = model.dim();
    if h.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: h.dim() });
    }
    let d2 = dim * dim;
    let mut l = CMatrix::zeros(d2);
    let mut basis = CMatrix::zeros(dim);
    let mut image = CMatrix::zeros(dim);
    for col in 0..d2 {
        basis.as_mut_slice()[col] = Complex64::new(1.0, 0.0);
        rhs_into(model, h, &basis, &mut image);
        basis.as_mut_slice()[col] = Complex64::new(0.0, 0.0);
        for (row, &v) in image.as_slice().iter().enumerate() {
            l[(row, col)] = v;
        }
    }
    Ok(l)
}
