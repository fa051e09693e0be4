//! Small dense numeric kernels shared by the simulator and the agent.

mod cg;
mod eigen;
mod expm;
mod matrix;
mod rng;

pub use cg::{conjugate_gradient, CgSolution};
pub use eigen::{hermitian_eigs, HermitianEigen};
pub use expm::expm;
pub use matrix::CMatrix;
pub use num_complex::Complex64;
pub use rng::Rng;

/// Euclidean dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
