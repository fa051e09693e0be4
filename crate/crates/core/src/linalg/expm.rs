use num_complex::Complex64;

use super::CMatrix;
use crate::{Error, Result};

/// Padé(13,13) coefficients b_0..b_13.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// 1-norm bound below which the degree-13 approximant is accurate to unit
/// roundoff.
const THETA13: f64 = 5.371_920_351_148_152;

/// Matrix exponential by scaling and squaring with a fixed-order Padé(13)
/// approximant.
pub fn expm(m: &CMatrix) -> Result<CMatrix> {
    if !m.is_finite() {
        return Err(Error::invalid("expm of a matrix with non-finite entries"));
    }
    let n = m.dim();
    let norm = m.one_norm();
    if norm == 0.0 {
        return Ok(CMatrix::identity(n));
    }
    let squarings = if norm > THETA13 { libm::ceil(libm::log2(norm / THETA13)) as i32 } else { 0 };
    let a = m.scale_real(libm::exp2(-(squarings as f64)));

    let eye = CMatrix::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);
    let c = |k: usize| Complex64::new(PADE13[k], 0.0);

    let mut u_inner = a6.scale(c(13));
    u_inner.add_scaled(c(11), &a4);
    u_inner.add_scaled(c(9), &a2);
    let mut u = a6.matmul(&u_inner);
    u.add_scaled(c(7), &a6);
    u.add_scaled(c(5), &a4);
    u.add_scaled(c(3), &a2);
    u.add_scaled(c(1), &eye);
    let u = a.matmul(&u);

    let mut v_inner = a6.scale(c(12));
    v_inner.add_scaled(c(10), &a4);
    v_inner.add_scaled(c(8), &a2);
    let mut v = a6.matmul(&v_inner);
    v.add_scaled(c(6), &a6);
    v.add_scaled(c(4), &a4);
    v.add_scaled(c(2), &a2);
    v.add_scaled(c(0), &eye);

    let mut result = (&v - &u).solve(&(&v + &u))?;
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    if !result.is_finite() {
        return Err(Error::NumericalInstability { step: 0, reason: "matrix exponential overflowed".into() });
    }
    Ok(result)
}
