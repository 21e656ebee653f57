//! Cyclic complex Jacobi for Hermitian matrices.

use num_complex::Complex;

use super::matrix::CMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of the
/// Hermitian part of `a`.
pub fn eigh<T: Real>(a: &CMatrix<T>) -> Result<(Vec<T>, CMatrix<T>)> {
    let n = a.require_square()?;
    let mut m = a.hermitian_part();
    let mut v = CMatrix::<T>::identity(n);
    let scale = m.norm_fro();
    let target = T::epsilon() * scale;

    let mut converged = n == 1 || scale == T::zero();
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum::<T>()
            .sqrt();
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            routine: "Hermitian Jacobi",
            iterations: MAX_SWEEPS,
        });
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| m[(i, i)].re.partial_cmp(&m[(j, j)].re).unwrap_or(std::cmp::Ordering::Equal));
    let vals = idx.iter().map(|&i| m[(i, i)].re).collect();
    let vecs = CMatrix::from_fn(n, n, |i, j| v[(i, idx[j])]);
    Ok((vals, vecs))
}

fn rotate<T: Real>(m: &mut CMatrix<T>, v: &mut CMatrix<T>, p: usize, q: usize) {
    let n = m.rows();
    let apq = m[(p, q)];
    let r = apq.norm();
    if r == T::zero() {
        return;
    }
    let phase = apq / r;
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let tau = (aqq - app) / (T::lit(2.0) * r);
    let sign = if tau >= T::zero() { T::one() } else { -T::one() };
    let t = sign / (tau.abs() + (T::one() + tau * tau).sqrt());
    let c = T::one() / (T::one() + t * t).sqrt();
    let s = t * c;
    let ph = phase.conj();

    let jpp = Complex::new(c, T::zero());
    let jpq = Complex::new(s, T::zero());
    let jqp = ph * (-s);
    let jqq = ph * c;

    for i in 0..n {
        let a = m[(i, p)];
        let b = m[(i, q)];
        m[(i, p)] = a * jpp + b * jqp;
        m[(i, q)] = a * jpq + b * jqq;
    }
    for j in 0..n {
        let a = m[(p, j)];
        let b = m[(q, j)];
        m[(p, j)] = jpp.conj() * a + jqp.conj() * b;
        m[(q, j)] = jpq.conj() * a + jqq.conj() * b;
    }
    m[(p, q)] = Complex::new(T::zero(), T::zero());
    m[(q, p)] = Complex::new(T::zero(), T::zero());
    m[(p, p)] = Complex::new(m[(p, p)].re, T::zero());
    m[(q, q)] = Complex::new(m[(q, q)].re, T::zero());
    for i in 0..n {
        let a = v[(i, p)];
        let b = v[(i, q)];
        v[(i, p)] = a * jpp + b * jqp;
        v[(i, q)] = a * jpq + b * jqq;
    }
}

/// Principal square root of a positive semidefinite matrix. Eigenvalues
/// below zero by at most `neg_tol` are clipped to zero.
pub fn sqrtm_psd<T: Real>(a: &CMatrix<T>, neg_tol: T) -> Result<CMatrix<T>> {
    let (vals, vecs) = eigh(a)?;
    if let Some(&worst) = vals.first() {
        if worst < -neg_tol {
            return Err(Error::InvalidParameter(format!(
                "matrix square root of an indefinite matrix (eigenvalue {worst})"
            )));
        }
    }
    Ok(hermitian_function(&vals, &vecs, |x| x.max(T::zero()).sqrt()))
}

/// `V diag(f(λ)) V†`.
pub fn hermitian_function<T: Real>(vals: &[T], vecs: &CMatrix<T>, f: impl Fn(T) -> T) -> CMatrix<T> {
    let n = vals.len();
    let fv: Vec<T> = vals.iter().map(|&x| f(x)).collect();
    CMatrix::from_fn(n, n, |i, j| {
        (0..n)
            .map(|k| vecs[(i, k)] * vecs[(j, k)].conj() * fv[k])
            .sum()
    })
}

pub fn min_eigenvalue<T: Real>(a: &CMatrix<T>) -> Result<T> {
    Ok(eigh(a)?.0[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c;

    #[test]
    fn pauli_y_spectrum() {
        let y = CMatrix::<f64>::from_rows(&[vec![c(0.0, 0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), c(0.0, 0.0)]]).unwrap();
        let (vals, vecs) = eigh(&y).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-15 && (vals[1] - 1.0).abs() < 1e-15);
        let rec = hermitian_function(&vals, &vecs, |x| x);
        assert!(rec.dist(&y) < 1e-14);
    }

    #[test]
    fn random_hermitian_roundtrip() {
        let a = CMatrix::<f64>::from_fn(5, 5, |i, j| c(((i * 3 + j * 5) % 7) as f64 - 3.0, (i as f64 - j as f64) * 0.3));
        let h = a.hermitian_part();
        let (vals, vecs) = eigh(&h).unwrap();
        assert!(hermitian_function(&vals, &vecs, |x| x).dist(&h) < 1e-12);
        assert!((&vecs.adjoint() * &vecs).dist(&CMatrix::identity(5)) < 1e-12);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn sqrt_squares_back() {
        let a = CMatrix::<f64>::from_fn(3, 3, |i, j| c((i + j) as f64, i as f64 - j as f64));
        let psd = &a.adjoint() * &a;
        let r = sqrtm_psd(&psd, 1e-12).unwrap();
        assert!((&r * &r).dist(&psd) < 1e-10 * psd.norm_fro());
        assert!(sqrtm_psd(&CMatrix::<f64>::diag(&[c(-1.0, 0.0)]), 1e-12).is_err());
    }
}
