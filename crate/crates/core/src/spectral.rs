//! Gap structure of Lindblad spectra and metastable phase construction.

use crate::error::{Error, Result};
use crate::lindblad::{build_liouvillian, QModel};
use crate::linalg::{eigh, CMatrix, SpectralDecomp};
use crate::{CMat, C64};

/// Minimum `Re λ₃ / Re λ₂` for the two-mode projector.
pub const MIN_GAP_RATIO: f64 = 10.0;

/// Fraction of the `l₂` eigenvalue spread used to cluster the phase subspaces.
pub const CLUSTER_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy)]
pub struct Timescales {
    pub lambda2: C64,
    pub lambda3: C64,
    /// `(−Re λ₂)⁻¹`, infinite at an exact transition.
    pub tau: f64,
    /// `(−Re λ₃)⁻¹`.
    pub tau_prime: f64,
    /// `Re λ₃ / Re λ₂`.
    pub gap_ratio: f64,
}

pub fn timescales(decomp: &SpectralDecomp<f64>) -> Result<Timescales> {
    decomp.require_diagonalizable()?;
    if decomp.dim() < 3 {
        return Err(Error::Dimension("timescales need at least three eigenvalues".into()));
    }
    let tol = decomp.group_tol();
    let l2 = decomp.eigenvalue(1);
    let l3 = decomp.eigenvalue(2);
    let inv = |re: f64| if re >= -tol { f64::INFINITY } else { -1.0 / re };
    let tau = inv(l2.re);
    let tau_prime = inv(l3.re);
    let gap_ratio = if l2.re >= -tol { f64::INFINITY } else { l3.re / l2.re };
    Ok(Timescales { lambda2: l2, lambda3: l3, tau, tau_prime, gap_ratio })
}

/// Sum of the first two spectral projectors, without the gap check.
pub(crate) fn slow_projector(decomp: &SpectralDecomp<f64>) -> CMat {
    &decomp.projector(0) + &decomp.projector(1)
}

/// Projector `|ρ₁⟩⟨l₁| + |ρ₂⟩⟨l₂|` onto the two slowest modes.
pub fn projector_p(decomp: &SpectralDecomp<f64>) -> Result<CMat> {
    let ts = timescales(decomp)?;
    if !(ts.gap_ratio > MIN_GAP_RATIO) {
        return Err(Error::GapTooSmall { ratio: ts.gap_ratio });
    }
    Ok(slow_projector(decomp))
}

#[derive(Debug, Clone)]
pub struct PhaseSplit {
    pub projector_a: CMat,
    pub projector_i: CMat,
    pub chi_a: Vec<C64>,
    pub chi_i: Vec<C64>,
    pub mu_a: f64,
    pub mu_i: f64,
    pub p_a: f64,
    pub p_i: f64,
    /// Eigenvalues of the Hermitian-normalized second left eigenvector,
    /// ascending.
    pub l2_spectrum: Vec<f64>,
    pub cluster_tol: f64,
}

/// Second left eigenvector with the identity component removed and the
/// global phase fixed so that it is Hermitian.
pub fn second_left_operator(decomp: &SpectralDecomp<f64>) -> Result<CMat> {
    let n = decomp.dim();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n || d < 2 {
        return Err(Error::Dimension("second left eigenvector needs a superoperator on d ≥ 2".into()));
    }
    // within a degenerate slow group either dual vector may carry the
    // identity; take the one with the largest traceless part
    let candidates: Vec<usize> = match decomp.group_of(0) {
        Some(g) if g.contains(&1) => g.to_vec(),
        _ => vec![1],
    };
    let mut best: Option<(f64, CMat)> = None;
    for k in candidates {
        let w = decomp.left_matrix(k)?;
        let shift = w.trace() / d as f64;
        let m = &w - &CMatrix::identity(d).scale(shift);
        let size = m.norm_fro();
        if best.as_ref().is_none_or(|(s, _)| size > *s) {
            best = Some((size, m));
        }
    }
    let (size, m) = best.expect("at least one candidate");
    if !(size > 0.0) {
        return Err(Error::NotHermitianOperator { what: "l2", deviation: f64::NAN });
    }
    let m = m.scale_re(1.0 / size);
    let mm = (&m * &m).trace();
    let phase = if mm.norm() > 0.0 { (mm / mm.norm()).sqrt() } else { C64::new(1.0, 0.0) };
    Ok(m.scale(phase.inv()))
}

/// Metastable phases from the extreme eigenvectors of `l₂`.
///
/// Rates are `μ_X = Tr(L_ch†L_ch P ρ_X)` with `P` the projector onto the two
/// slowest modes and `ρ_X = |χ_X⟩⟨χ_X|`: the long-time emission rate from
/// `χ_X` before the slow relaxation sets in.
pub fn metastable_split(
    decomp: &SpectralDecomp<f64>,
    chi: &[C64],
    channel: usize,
    model: &QModel,
    g: f64,
) -> Result<PhaseSplit> {
    decomp.require_diagonalizable()?;
    model.check_channel(channel)?;
    let d = model.dim();
    if decomp.dim() != d * d {
        return Err(Error::Dimension("decomposition does not match the model".into()));
    }
    crate::lindblad::check_state(chi, d, 1e-9)?;
    let scale = 1e-9 * decomp.spectral_radius().max(1.0);
    let l2 = decomp.eigenvalue(1);
    if l2.im.abs() > scale {
        return Err(Error::ComplexGap { imag: l2.im });
    }
    let op = second_left_operator(decomp)?;
    let dev = op.hermitian_deviation();
    if dev > scale.max(1e-9) {
        return Err(Error::NotHermitianOperator { what: "l2", deviation: dev });
    }
    let (vals, vecs) = eigh(&op)?;
    let (lo, hi) = (vals[0], vals[d - 1]);
    let spread = hi - lo;
    let cluster_tol = CLUSTER_FRACTION * spread;
    let pick = |pred: &dyn Fn(f64) -> bool| -> CMat {
        let mut p = CMatrix::zeros(d, d);
        for (k, &v) in vals.iter().enumerate() {
            if pred(v) {
                let col = vecs.col(k);
                p = &p + &CMatrix::outer(col, col);
            }
        }
        p
    };
    let mut proj_hi = pick(&|v| v >= hi - cluster_tol);
    let mut proj_lo = pick(&|v| v <= lo + cluster_tol);
    let mut chi_hi = vecs.col(d - 1).to_vec();
    let mut chi_lo = vecs.col(0).to_vec();

    let slow = slow_projector(decomp);
    let lc = model.channel(channel, g)?;
    let rate_op = &lc.adjoint() * &lc;
    let rate = |psi: &[C64]| -> Result<f64> {
        let rho = CMatrix::devec(&slow.matvec(&CMatrix::outer(psi, psi).vec()))?;
        Ok((&rate_op * &rho).trace().re)
    };
    let mut mu_hi = rate(&chi_hi)?;
    let mut mu_lo = rate(&chi_lo)?;
    if mu_lo > mu_hi {
        std::mem::swap(&mut proj_hi, &mut proj_lo);
        std::mem::swap(&mut chi_hi, &mut chi_lo);
        std::mem::swap(&mut mu_hi, &mut mu_lo);
    }
    let expect = |p: &CMat| crate::linalg::inner(chi, &p.matvec(chi)).re;
    Ok(PhaseSplit {
        p_a: expect(&proj_hi),
        p_i: expect(&proj_lo),
        projector_a: proj_hi,
        projector_i: proj_lo,
        chi_a: chi_hi,
        chi_i: chi_lo,
        mu_a: mu_hi,
        mu_i: mu_lo,
        l2_spectrum: vals,
        cluster_tol,
    })
}

/// Convenience: decomposition of the model's generator at `g` followed by
/// [`metastable_split`] on channel 1.
pub fn split_model(model: &QModel, g: f64, chi: &[C64]) -> Result<PhaseSplit> {
    let decomp = build_liouvillian(model, g)?.spectrum()?;
    metastable_split(&decomp, chi, 1, model, g)
}
