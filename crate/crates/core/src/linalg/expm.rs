use num_complex::Complex;

use super::matrix::CMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the unscaled degree-13 approximant is accurate
/// to double precision (Higham 2005).
const THETA13: f64 = 5.371920351148152;

/// Default cap on the number of squarings.
pub const MAX_SQUARINGS: u32 = 64;

/// Matrix exponential by scaling and squaring with a [13/13] Padé approximant.
pub fn matexp<T: Real>(m: &CMatrix<T>) -> Result<CMatrix<T>> {
    matexp_with_budget(m, MAX_SQUARINGS)
}

pub fn matexp_with_budget<T: Real>(m: &CMatrix<T>, max_squarings: u32) -> Result<CMatrix<T>> {
    let n = m.require_square()?;
    if !m.all_finite() {
        return Err(Error::NonFinite("matexp input"));
    }
    let norm = m.norm1().to_f64_lossy();
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i64
    } else {
        0
    };
    if s > max_squarings as i64 {
        return Err(Error::ScalingBudget { norm });
    }
    let a = m.scale_re(T::lit(0.5f64.powi(s as i32)));

    let b = |k: usize| T::lit(PADE13[k]);
    let id = CMatrix::<T>::identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * &(&(&a6.scale_re(b(13)) + &a4.scale_re(b(11))) + &a2.scale_re(b(9)));
    let u_inner = &(&(&(&u_inner + &a6.scale_re(b(7))) + &a4.scale_re(b(5))) + &a2.scale_re(b(3)))
        + &id.scale_re(b(1));
    let u = &a * &u_inner;

    let v = &a6 * &(&(&a6.scale_re(b(12)) + &a4.scale_re(b(10))) + &a2.scale_re(b(8)));
    let v = &(&(&(&v + &a6.scale_re(b(6))) + &a4.scale_re(b(4))) + &a2.scale_re(b(2)))
        + &id.scale_re(b(0));

    let mut r = (&v - &u).solve(&(&v + &u))?;
    for _ in 0..s {
        r = &r * &r;
    }
    if !r.all_finite() {
        return Err(Error::NonFinite("matexp"));
    }
    Ok(r)
}

/// `exp(t M) v` for a vector, through the dense exponential.
pub fn expm_apply<T: Real>(m: &CMatrix<T>, t: T, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    Ok(matexp(&m.scale_re(t))?.matvec(v))
}
