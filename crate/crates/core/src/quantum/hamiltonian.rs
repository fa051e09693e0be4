use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::MasterEquationModel;
use crate::linalg::{hermitian_eigs, CMatrix};
use crate::{Error, Result};

/// Tight-binding Hamiltonian: site energies on the diagonal and `−Ω` between
/// neighbouring dots. The vacuum row and column, when present, are zero.
pub fn build_hamiltonian(model: &MasterEquationModel, controls: &[f64]) -> Result<CMatrix> {
    let couplings = model.couplings(controls)?;
    let mut h = CMatrix::zeros(model.dim());
    for (k, &e) in model.energies().iter().enumerate() {
        let i = model.dot_index(k + 1);
        h[(i, i)] = Complex64::new(e, 0.0);
    }
    for (k, &omega) in couplings.iter().enumerate() {
        let i = model.dot_index(k + 1);
        let j = model.dot_index(k + 2);
        h[(i, j)] = Complex64::new(-omega, 0.0);
        h[(j, i)] = Complex64::new(-omega, 0.0);
    }
    Ok(h)
}

/// Ideal three-dot Hamiltonian for arbitrary real couplings, without the
/// `[0, Ω_max]` range check that [`build_hamiltonian`] applies to controls.
pub fn ideal_hamiltonian(omega12: f64, omega23: f64) -> CMatrix {
    let mut h = CMatrix::zeros(3);
    h[(0, 1)] = Complex64::new(-omega12, 0.0);
    h[(1, 0)] = Complex64::new(-omega12, 0.0);
    h[(1, 2)] = Complex64::new(-omega23, 0.0);
    h[(2, 1)] = Complex64::new(-omega23, 0.0);
    h
}

/// Zero-energy eigenstate of the ideal three-dot Hamiltonian,
/// `cos θ |1> − sin θ |3>` with `tan θ = Ω12/Ω23`.
pub fn dark_state(omega12: f64, omega23: f64) -> Result<[f64; 3]> {
    if omega12 == 0.0 && omega23 == 0.0 {
        return Err(Error::Degenerate("dark state undefined with both couplings off".into()));
    }
    let theta = libm::atan2(omega12, omega23);
    Ok([libm::cos(theta), 0.0, -libm::sin(theta)])
}

/// Ascending eigenvalues of a Hermitian matrix.
///
/// Dimensions up to 3 use the closed-form roots of the characteristic
/// polynomial; larger matrices go through the Jacobi solver.
pub fn eigen_spectrum(h: &CMatrix) -> Result<Vec<f64>> {
    let scale = h.frobenius_norm().max(1.0);
    if h.hermiticity_defect() > 1e-10 * scale {
        return Err(Error::invalid("matrix is not Hermitian"));
    }
    match h.dim() {
        1 => Ok(vec![h[(0, 0)].re]),
        2 => Ok(spectrum_2x2(h).to_vec()),
        3 => Ok(spectrum_3x3(h).to_vec()),
        _ => Ok(hermitian_eigs(h)?.values),
    }
}

/// Smallest eigenvalue, used for positivity checks of density matrices.
pub fn min_eigenvalue(m: &CMatrix) -> Result<f64> {
    Ok(eigen_spectrum(m)?[0])
}

fn spectrum_2x2(h: &CMatrix) -> [f64; 2] {
    let a = h[(0, 0)].re;
    let d = h[(1, 1)].re;
    let mean = 0.5 * (a + d);
    let radius = libm::hypot(0.5 * (a - d), h[(0, 1)].norm());
    [mean - radius, mean + radius]
}

/// Trigonometric solution of the characteristic cubic of a 3×3 Hermitian
/// matrix, after shifting by the mean eigenvalue.
fn spectrum_3x3(h: &CMatrix) -> [f64; 3] {
    let mean = h.trace().re / 3.0;
    let mut k = h.clone();
    for i in 0..3 {
        k[(i, i)] -= mean;
    }
    let p2 = (k.frobenius_norm() * k.frobenius_norm()) / 6.0;
    if p2 <= f64::MIN_POSITIVE {
        return [mean; 3];
    }
    let p = libm::sqrt(p2);
    let det = det3(&k).re;
    let r = (det / (2.0 * p * p2)).clamp(-1.0, 1.0);
    let phi = libm::acos(r) / 3.0;
    let largest = mean + 2.0 * p * libm::cos(phi);
    let smallest = mean + 2.0 * p * libm::cos(phi + 2.0 * PI / 3.0);
    let middle = 3.0 * mean - largest - smallest;
    let mut out = [smallest, middle, largest];
    out.sort_by(f64::total_cmp);
    out
}

fn det3(m: &CMatrix) -> Complex64 {
    m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal3() -> MasterEquationModel {
        MasterEquationModel::ideal(3).unwrap()
    }

    #[test]
    fn couplings_off_gives_zero_matrix() {
        let h = build_hamiltonian(&ideal3(), &[0.0, 0.0]).unwrap();
        assert_eq!(h, CMatrix::zeros(3));
    }

    #[test]
    fn ideal_structure() {
        let h = build_hamiltonian(&ideal3(), &[1.0, 1.0]).unwrap();
        let want = CMatrix::from_real(3, &[0.0, -1.0, 0.0, -1.0, 0.0, -1.0, 0.0, -1.0, 0.0]).unwrap();
        assert_eq!(h, want);
    }

    #[test]
    fn detuned_diagonal_is_cumulative() {
        let m = MasterEquationModel::three_dot(0.15, 0.15, 0.0, 0.0).unwrap();
        let h = build_hamiltonian(&m, &[0.5, 0.25]).unwrap();
        assert_eq!(h[(1, 1)].re, 0.15);
        assert!((h[(2, 2)].re - 0.30).abs() < 1e-15);
        assert_eq!(h[(1, 2)].re, -0.25);
    }

    #[test]
    fn five_dot_interior_couplings_share_middle() {
        let m = MasterEquationModel::ideal(5).unwrap();
        let h = build_hamiltonian(&m, &[0.1, 0.7, 0.3]).unwrap();
        assert_eq!(h[(0, 1)].re, -0.1);
        assert_eq!(h[(1, 2)].re, -0.7);
        assert_eq!(h[(2, 3)].re, -0.7);
        assert_eq!(h[(3, 4)].re, -0.3);
    }

    #[test]
    fn vacuum_row_is_empty() {
        let m = MasterEquationModel::three_dot(0.0, 0.0, 0.0, 0.1).unwrap();
        let h = build_hamiltonian(&m, &[1.0, 1.0]).unwrap();
        assert_eq!(h.dim(), 4);
        for k in 0..4 {
            assert_eq!(h[(0, k)].norm(), 0.0);
            assert_eq!(h[(k, 0)].norm(), 0.0);
        }
        assert_eq!(h[(1, 2)].re, -1.0);
    }

    #[test]
    fn control_validation() {
        let m = ideal3();
        assert!(matches!(build_hamiltonian(&m, &[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(build_hamiltonian(&m, &[1.2, 0.0]), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_hamiltonian(&m, &[-0.1, 0.0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn dark_state_examples() {
        assert_eq!(dark_state(0.0, 1.0).unwrap(), [1.0, 0.0, -0.0]);
        let d = dark_state(1.0, 1.0).unwrap();
        let s = core::f64::consts::FRAC_1_SQRT_2;
        assert!((d[0] - s).abs() < 1e-15 && (d[2] + s).abs() < 1e-15);
        assert!(matches!(dark_state(0.0, 0.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn spectrum_of_ideal_hamiltonian() {
        let e = eigen_spectrum(&ideal_hamiltonian(3.0, 4.0)).unwrap();
        assert!((e[0] + 5.0).abs() < 1e-12 && e[1].abs() < 1e-12 && (e[2] - 5.0).abs() < 1e-12);
        let h = build_hamiltonian(&MasterEquationModel::ideal(3).unwrap(), &[0.3, 0.4]).unwrap();
        assert_eq!(h, ideal_hamiltonian(0.3, 0.4));
        assert_eq!(eigen_spectrum(&CMatrix::zeros(3)).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn dark_state_is_null_vector() {
        let h = ideal_hamiltonian(3.0, 4.0);
        let d = dark_state(3.0, 4.0).unwrap();
        let v: Vec<Complex64> = d.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let hv = h.mul_vec(&v);
        assert!(hv.iter().all(|z| z.norm() <= 1e-12));
    }

    #[test]
    fn spectrum_rejects_non_hermitian() {
        let m = CMatrix::from_real(3, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(eigen_spectrum(&m).is_err());
    }
}
