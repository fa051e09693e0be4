use alloc::vec;
use alloc::vec::Vec;

use super::{axpy, dot, norm};
use crate::{Error, Result};

/// Outcome of a conjugate-gradient solve.
#[derive(Clone, Debug)]
pub struct CgSolution {
    pub x: Vec<f64>,
    /// `‖Ax − b‖` of the returned iterate.
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Solves `A x = b` for symmetric positive definite `A`, given only its
/// action on vectors.
///
/// Stops once `‖Ax − b‖ ≤ tol·‖b‖` or after `max_iters` iterations; in the
/// latter case the best iterate seen is returned together with its residual.
pub fn conjugate_gradient<F>(mut apply_a: F, b: &[f64], max_iters: usize, tol: f64) -> Result<CgSolution>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(CgSolution { x, residual_norm: 0.0, iterations: 0 });
    }
    let target = tol * b_norm;
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut best = (x.clone(), libm::sqrt(rr));

    for it in 0..max_iters {
        let ap = apply_a(&p);
        let pap = dot(&p, &ap);
        if !pap.is_finite() {
            return Err(Error::NumericalInstability { step: it, reason: "non-finite curvature in CG".into() });
        }
        if pap <= 0.0 {
            // Direction of non-positive curvature: A is not SPD along p.
            break;
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        if !rr_new.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalInstability { step: it, reason: "non-finite CG iterate".into() });
        }
        let res = libm::sqrt(rr_new);
        if res < best.1 {
            best = (x.clone(), res);
        }
        if res <= target {
            return Ok(CgSolution { x, residual_norm: res, iterations: it + 1 });
        }
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    Ok(CgSolution { x: best.0, residual_norm: best.1, iterations: max_iters })
}
