//! Dense non-Hermitian eigensolver.
//!
//! Householder reduction to upper Hessenberg form, single-shift complex QR
//! to Schur form, eigenvectors of the triangular factor by back-substitution
//! and left vectors from the inverse of the right-vector matrix, so the
//! biorthonormality `W V = I` holds by construction.

use num_complex::Complex;
use num_traits::{One, Zero};

use super::matrix::{CMatrix, Lu};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvector condition numbers above this are treated as defective.
pub const DEFECTIVE_CONDITION: f64 = 1e10;

const SWEEPS_PER_EIGENVALUE: usize = 60;

/// Biorthonormal eigensystem of a square matrix.
///
/// Eigenvalues are sorted by descending real part; real parts within
/// `group_tol` of each other are ordered by descending imaginary part.
/// Indices are zero-based throughout.
#[derive(Debug, Clone)]
pub struct SpectralDecomp<T: Real> {
    eigenvalues: Vec<Complex<T>>,
    /// Right eigenvectors as unit-norm columns.
    right: CMatrix<T>,
    /// `right⁻¹`; row `k` is the dual functional of column `k`.
    dual: CMatrix<T>,
    groups: Vec<Vec<usize>>,
    group_tol: T,
    condition: T,
}

impl<T: Real> SpectralDecomp<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[Complex<T>] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, k: usize) -> Complex<T> {
        self.eigenvalues[k]
    }

    /// Right eigenvector `k` (unit 2-norm).
    pub fn right_vector(&self, k: usize) -> &[Complex<T>] {
        self.right.col(k)
    }

    /// Left eigenvector `k` in the convention `⟨l_j|ρ_k⟩ = Σ conj(l_j)·ρ_k = δ_jk`.
    pub fn left_vector(&self, k: usize) -> Vec<Complex<T>> {
        self.dual.row(k).into_iter().map(|z| z.conj()).collect()
    }

    /// Right eigenvector reshaped as a `d×d` matrix (source is a superoperator).
    pub fn right_matrix(&self, k: usize) -> Result<CMatrix<T>> {
        CMatrix::devec(self.right_vector(k))
    }

    pub fn left_matrix(&self, k: usize) -> Result<CMatrix<T>> {
        CMatrix::devec(&self.left_vector(k))
    }

    /// Matrix whose columns are the right eigenvectors.
    pub fn right_vectors(&self) -> &CMatrix<T> {
        &self.right
    }

    /// Inverse of [`Self::right_vectors`].
    pub fn dual_vectors(&self) -> &CMatrix<T> {
        &self.dual
    }

    /// Groups (size ≥ 2) of indices whose eigenvalues are within `group_tol`.
    pub fn degenerate_groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_of(&self, k: usize) -> Option<&[usize]> {
        self.groups
            .iter()
            .find(|g| g.contains(&k))
            .map(|g| g.as_slice())
    }

    pub fn group_tol(&self) -> T {
        self.group_tol
    }

    /// Condition number of the right-vector matrix (1-norm).
    pub fn condition(&self) -> T {
        self.condition
    }

    pub fn is_defective(&self) -> bool {
        !(self.condition.to_f64_lossy() < DEFECTIVE_CONDITION)
    }

    pub fn require_diagonalizable(&self) -> Result<()> {
        if self.is_defective() {
            Err(Error::Defective {
                condition: self.condition.to_f64_lossy(),
            })
        } else {
            Ok(())
        }
    }

    pub fn spectral_radius(&self) -> T {
        self.eigenvalues
            .iter()
            .map(|z| z.norm())
            .fold(T::zero(), T::max)
    }

    /// `Σ_{k∉exclude} f(λ_k) |ρ_k⟩⟨l_k|`.
    ///
    /// Fails on defective decompositions and when `f` is not finite at an
    /// included eigenvalue.
    pub fn restricted_function(
        &self,
        f: impl Fn(Complex<T>) -> Complex<T>,
        exclude: &[usize],
    ) -> Result<CMatrix<T>> {
        self.require_diagonalizable()?;
        let n = self.dim();
        if let Some(&bad) = exclude.iter().find(|&&k| k >= n) {
            return Err(Error::Dimension(format!("excluded index {bad} out of range")));
        }
        let mut weights = vec![Complex::zero(); n];
        for (k, w) in weights.iter_mut().enumerate() {
            if exclude.contains(&k) {
                continue;
            }
            let lam = self.eigenvalues[k];
            let v = f(lam);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::SingularEigenvalue {
                    index: k,
                    value: format!("{lam}"),
                });
            }
            *w = v;
        }
        let mut scaled = self.right.clone();
        for k in 0..n {
            let w = weights[k];
            for i in 0..n {
                scaled[(i, k)] *= w;
            }
        }
        Ok(&scaled * &self.dual)
    }

    /// Rank-one spectral projector `|ρ_k⟩⟨l_k|`.
    pub fn projector(&self, k: usize) -> CMatrix<T> {
        let n = self.dim();
        CMatrix::from_fn(n, n, |i, j| self.right[(i, k)] * self.dual[(k, j)])
    }

    /// Spectral sum with the full eigenvalue set.
    pub fn reconstruct(&self) -> Result<CMatrix<T>> {
        self.restricted_function(|z| z, &[])
    }
}

/// Full eigensystem with the default grouping tolerance
/// `1e-9·max(1, spectral radius)`.
pub fn spectrum<T: Real>(m: &CMatrix<T>) -> Result<SpectralDecomp<T>> {
    spectrum_with_tol(m, None)
}

pub fn spectrum_with_tol<T: Real>(m: &CMatrix<T>, group_tol: Option<T>) -> Result<SpectralDecomp<T>> {
    let n = m.require_square()?;
    if let Some(tol) = group_tol {
        if !(tol > T::zero()) {
            return Err(Error::InvalidParameter("group_tol must be positive".into()));
        }
    }
    if !m.all_finite() {
        return Err(Error::NonFinite("spectrum input"));
    }

    let (mut h, mut z) = hessenberg(m);
    schur_qr(&mut h, &mut z)?;
    let vals: Vec<Complex<T>> = (0..n).map(|i| h[(i, i)]).collect();
    let y = triangular_eigenvectors(&h);
    let mut v = &z * &y;
    for k in 0..n {
        let nrm = v.col(k).iter().map(|x| x.norm_sqr()).sum::<T>().sqrt();
        for i in 0..n {
            v[(i, k)] = v[(i, k)] / nrm;
        }
    }

    let radius = vals.iter().map(|z| z.norm()).fold(T::zero(), T::max);
    let tol = group_tol.unwrap_or_else(|| T::lit(1e-9) * T::one().max(radius));
    let order = sort_order(&vals, tol);
    let eigenvalues: Vec<Complex<T>> = order.iter().map(|&k| vals[k]).collect();
    let right = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);

    let (dual, condition) = match Lu::factor(&right) {
        Ok(lu) => {
            let w = lu.solve(&CMatrix::identity(n));
            let cond = right.norm1() * w.norm1();
            if w.all_finite() {
                (w, cond)
            } else {
                (CMatrix::zeros(n, n), T::infinity())
            }
        }
        Err(_) => (CMatrix::zeros(n, n), T::infinity()),
    };

    let groups = degenerate_groups(&eigenvalues, tol);
    Ok(SpectralDecomp {
        eigenvalues,
        right,
        dual,
        groups,
        group_tol: tol,
        condition,
    })
}

/// Eigenvalues only.
pub fn eigenvalues<T: Real>(m: &CMatrix<T>) -> Result<Vec<Complex<T>>> {
    let (mut h, mut z) = hessenberg(m);
    schur_qr(&mut h, &mut z)?;
    let n = m.rows();
    let vals: Vec<Complex<T>> = (0..n).map(|i| h[(i, i)]).collect();
    let radius = vals.iter().map(|z| z.norm()).fold(T::zero(), T::max);
    let tol = T::lit(1e-9) * T::one().max(radius);
    Ok(sort_order(&vals, tol).into_iter().map(|k| vals[k]).collect())
}

/// Householder reduction `A = Q H Q†`. Returns `(H, Q)`.
fn hessenberg<T: Real>(a: &CMatrix<T>) -> (CMatrix<T>, CMatrix<T>) {
    let n = a.rows();
    let mut h = a.clone();
    let mut q = CMatrix::<T>::identity(n);
    if n < 3 {
        return (h, q);
    }
    let two = T::lit(2.0);
    for k in 0..n - 2 {
        let x: Vec<Complex<T>> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if xnorm == T::zero() {
            continue;
        }
        let phase = if x[0].norm() > T::zero() {
            x[0] / x[0].norm()
        } else {
            Complex::one()
        };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if vnorm == T::zero() {
            continue;
        }
        for z in v.iter_mut() {
            *z = *z / vnorm;
        }
        // H ← (I − 2vv†) H
        for j in 0..n {
            let mut s = Complex::<T>::zero();
            for (r, vr) in v.iter().enumerate() {
                s += vr.conj() * h[(k + 1 + r, j)];
            }
            s = s * two;
            for (r, vr) in v.iter().enumerate() {
                h[(k + 1 + r, j)] -= *vr * s;
            }
        }
        // H ← H (I − 2vv†), Q ← Q (I − 2vv†)
        for mat in [&mut h, &mut q] {
            for i in 0..n {
                let mut s = Complex::<T>::zero();
                for (r, vr) in v.iter().enumerate() {
                    s += mat[(i, k + 1 + r)] * *vr;
                }
                s = s * two;
                for (r, vr) in v.iter().enumerate() {
                    mat[(i, k + 1 + r)] -= s * vr.conj();
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = Complex::zero();
        }
    }
    (h, q)
}

/// Complex Givens rotation `G = [[c, s], [−s̄, c]]` with `G (a, b)ᵀ = (r, 0)ᵀ`.
fn givens<T: Real>(a: Complex<T>, b: Complex<T>) -> (T, Complex<T>) {
    let an = a.norm();
    let bn = b.norm();
    if bn == T::zero() {
        return (T::one(), Complex::zero());
    }
    if an == T::zero() {
        return (T::zero(), Complex::one());
    }
    let r = an.hypot(bn);
    let c = an / r;
    let s = (a / an) * b.conj() / r;
    (c, s)
}

/// Shifted QR iteration on an upper Hessenberg matrix, in place, to upper
/// triangular Schur form. `z` accumulates the unitary transformations.
fn schur_qr<T: Real>(h: &mut CMatrix<T>, z: &mut CMatrix<T>) -> Result<()> {
    let n = h.rows();
    let eps = T::epsilon();
    let hnorm = h.norm_fro().max(T::min_positive_value());
    let max_iter = SWEEPS_PER_EIGENVALUE * n.max(1);
    let mut total = 0usize;
    let mut since_deflation = 0usize;
    let mut hi = n - 1;

    while hi > 0 {
        // locate the active block [lo, hi]
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let mut scale = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            if scale == T::zero() {
                scale = hnorm;
            }
            if sub <= eps * scale {
                h[(lo, lo - 1)] = Complex::zero();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        total += 1;
        since_deflation += 1;
        if total > max_iter {
            return Err(Error::NoConvergence {
                routine: "complex Schur QR",
                iterations: total,
            });
        }

        let mu = if since_deflation % 10 == 0 {
            // exceptional shift to break cycles
            h[(hi, hi)] + Complex::new(T::lit(0.75) * h[(hi, hi - 1)].norm(), T::zero())
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        for i in lo..=hi {
            h[(i, i)] -= mu;
        }
        let mut rots = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            rots.push((c, s));
            for j in k..n {
                let a = h[(k, j)];
                let b = h[(k + 1, j)];
                h[(k, j)] = a * c + s * b;
                h[(k + 1, j)] = -s.conj() * a + b * c;
            }
            h[(k + 1, k)] = Complex::zero();
        }
        for (idx, &(c, s)) in rots.iter().enumerate() {
            let k = lo + idx;
            // right-multiply by G† on columns k, k+1
            let top = (k + 2).min(hi);
            for i in 0..=top {
                let a = h[(i, k)];
                let b = h[(i, k + 1)];
                h[(i, k)] = a * c + b * s.conj();
                h[(i, k + 1)] = -a * s + b * c;
            }
            for i in 0..n {
                let a = z[(i, k)];
                let b = z[(i, k + 1)];
                z[(i, k)] = a * c + b * s.conj();
                z[(i, k + 1)] = -a * s + b * c;
            }
        }
        for i in lo..=hi {
            h[(i, i)] += mu;
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = Complex::zero();
        }
    }
    if !h.all_finite() {
        return Err(Error::NonFinite("complex Schur QR"));
    }
    Ok(())
}

fn wilkinson_shift<T: Real>(a: Complex<T>, b: Complex<T>, c: Complex<T>, d: Complex<T>) -> Complex<T> {
    let half = T::lit(0.5);
    let m = (a + d) * half;
    let disc = (((a - d) * half).powi(2) + b * c).sqrt();
    let l1 = m + disc;
    let l2 = m - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Eigenvectors of an upper triangular matrix as columns.
fn triangular_eigenvectors<T: Real>(t: &CMatrix<T>) -> CMatrix<T> {
    let n = t.rows();
    let tnorm = t.norm_fro().max(T::min_positive_value());
    let small = T::epsilon() * tnorm;
    let mut y = CMatrix::<T>::zeros(n, n);
    for k in 0..n {
        let lam = t[(k, k)];
        y[(k, k)] = Complex::one();
        for j in (0..k).rev() {
            let mut s = Complex::<T>::zero();
            for m in j + 1..=k {
                s += t[(j, m)] * y[(m, k)];
            }
            let mut den = t[(j, j)] - lam;
            if den.norm() < small {
                let xnorm = (j + 1..=k).map(|m| y[(m, k)].norm()).fold(T::zero(), T::max);
                if s.norm() <= T::lit(1e3) * small * xnorm.max(T::one()) {
                    // equal eigenvalue and no coupling: the component is free
                    y[(j, k)] = Complex::zero();
                    continue;
                }
                den = Complex::new(small, T::zero());
            }
            y[(j, k)] = -s / den;
        }
    }
    y
}

fn sort_order<T: Real>(vals: &[Complex<T>], tol: T) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| {
        vals[b]
            .re
            .partial_cmp(&vals[a].re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    // clusters of numerically equal real parts are reordered by imaginary part
    let mut out = Vec::with_capacity(idx.len());
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && (vals[idx[end - 1]].re - vals[idx[end]].re).abs() <= tol {
            end += 1;
        }
        let mut cluster = idx[start..end].to_vec();
        cluster.sort_by(|&a, &b| {
            vals[b]
                .im
                .partial_cmp(&vals[a].im)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        out.extend(cluster);
        start = end;
    }
    out
}

fn degenerate_groups<T: Real>(vals: &[Complex<T>], tol: T) -> Vec<Vec<usize>> {
    let n = vals.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if (vals[i] - vals[j]).norm() < tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[rj.max(ri)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if let Some(g) = groups.iter_mut().find(|g| find(&mut parent, g[0]) == r) {
            g.push(i);
        } else {
            groups.push(vec![i]);
        }
    }
    groups.retain(|g| g.len() > 1);
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c;

    fn pseudo_random(n: usize, seed: u64) -> CMatrix<f64> {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        CMatrix::from_fn(n, n, |_, _| Complex::new(next(), next()))
    }

    #[test]
    fn diagonal_input() {
        let m = CMatrix::<f64>::diag(&[c(1.0, 0.0), c(3.0, 0.0), c(-2.0, 0.0)]);
        let d = spectrum(&m).unwrap();
        let ev: Vec<f64> = d.eigenvalues().iter().map(|z| z.re).collect();
        assert_eq!(ev, vec![3.0, 1.0, -2.0]);
        assert!((d.right_vector(0)[1].norm() - 1.0).abs() < 1e-14);
        assert!(d.degenerate_groups().is_empty());
    }

    #[test]
    fn random_matrices_reconstruct() {
        for seed in 0..20 {
            let n = 2 + (seed as usize % 8);
            let m = pseudo_random(n, seed);
            let d = spectrum(&m).unwrap();
            let rec = d.reconstruct().unwrap();
            assert!(rec.dist(&m) <= 1e-10 * m.norm_fro(), "seed {seed}");
            let bi = &d.dual_vectors().clone() * d.right_vectors();
            assert!(bi.dist(&CMatrix::identity(n)) < 1e-10);
            let tr: Complex<f64> = d.eigenvalues().iter().sum();
            assert!((tr - m.trace()).norm() < 1e-10 * m.norm_fro());
        }
    }

    #[test]
    fn eigen_equation_holds() {
        let m = pseudo_random(6, 99);
        let d = spectrum(&m).unwrap();
        for k in 0..6 {
            let v = d.right_vector(k);
            let mv = m.matvec(v);
            let lam = d.eigenvalue(k);
            let res: f64 = mv.iter().zip(v).map(|(a, b)| (a - lam * b).norm_sqr()).sum::<f64>().sqrt();
            assert!(res < 1e-11);
            let l = d.left_vector(k);
            // l† M = λ l†
            let lm: Vec<Complex<f64>> = (0..6)
                .map(|j| (0..6).map(|i| l[i].conj() * m[(i, j)]).sum())
                .collect();
            let res: f64 = lm.iter().zip(&l).map(|(a, b)| (a - lam * b.conj()).norm_sqr()).sum::<f64>().sqrt();
            assert!(res < 1e-9);
        }
    }

    #[test]
    fn sorted_by_real_then_imag() {
        let m = CMatrix::<f64>::diag(&[c(-1.0, -2.0), c(0.0, 0.0), c(-1.0, 2.0), c(-3.0, 0.0)]);
        let d = spectrum(&m).unwrap();
        let ev = d.eigenvalues();
        assert_eq!(ev[0], c(0.0, 0.0));
        assert_eq!(ev[1], c(-1.0, 2.0));
        assert_eq!(ev[2], c(-1.0, -2.0));
    }

    #[test]
    fn jordan_block_is_flagged() {
        let mut m = CMatrix::<f64>::identity(3);
        m[(0, 1)] = c(1.0, 0.0);
        let d = spectrum(&m).unwrap();
        assert!(d.is_defective());
        assert!(matches!(d.reconstruct(), Err(Error::Defective { .. })));
    }

    #[test]
    fn repeated_diagonalizable_is_not_defective() {
        let (_, u) = crate::linalg::hermitian::eigh(&pseudo_random(4, 6).hermitian_part()).unwrap();
        let dg = CMatrix::<f64>::diag(&[c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0), c(-0.5, 0.0)]);
        let m = &(&u * &dg) * &u.adjoint();
        let d = spectrum(&m).unwrap();
        assert!(!d.is_defective(), "condition {}", d.condition());
        assert_eq!(d.degenerate_groups().len(), 2);
        assert!(d.reconstruct().unwrap().dist(&m) < 1e-10);
    }

    #[test]
    fn restricted_inverse_excludes_singular() {
        let m = CMatrix::<f64>::diag(&[c(0.0, 0.0), c(-2.0, 0.0)]);
        let d = spectrum(&m).unwrap();
        assert!(matches!(
            d.restricted_function(|z| z.inv(), &[]),
            Err(Error::SingularEigenvalue { index: 0, .. })
        ));
        let inv = d.restricted_function(|z| z.inv(), &[0]).unwrap();
        assert!((inv[(1, 1)] - c(-0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn single_precision_spectrum() {
        let m = CMatrix::<f32>::from_fn(3, 3, |i, j| Complex::new((i + 2 * j) as f32, (i * j) as f32 * 0.5));
        let d = spectrum(&m).unwrap();
        let rec = d.reconstruct().unwrap();
        assert!(rec.dist(&m) < 1e-4 * m.norm_fro());
    }
}
