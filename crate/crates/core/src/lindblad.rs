//! Open-system models and their vectorized generators.
//!
//! Superoperators act on column-stacked density matrices,
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian, spectrum, CMatrix, SpectralDecomp};
use crate::{CMat, C64};

/// Tolerance on `‖H − H†‖` relative to `max(1, ‖H‖_max)`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Operator-valued polynomial `g ↦ Σ_m gᵐ A_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorFamily {
    coeffs: Vec<CMat>,
}

impl OperatorFamily {
    pub fn new(coeffs: Vec<CMat>) -> Result<Self> {
        let Some(first) = coeffs.first() else {
            return Err(Error::InvalidParameter("operator family needs at least one coefficient".into()));
        };
        let d = first.require_square()?;
        for a in &coeffs {
            if a.rows() != d || a.cols() != d {
                return Err(Error::Dimension("operator family coefficients differ in shape".into()));
            }
            if !a.all_finite() {
                return Err(Error::InvalidParameter("non-finite operator coefficient".into()));
            }
        }
        Ok(Self { coeffs })
    }

    pub fn constant(a: CMat) -> Result<Self> {
        Self::new(vec![a])
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].rows()
    }

    pub fn coefficients(&self) -> &[CMat] {
        &self.coeffs
    }

    /// Evaluate at a complex argument by Horner's rule.
    pub fn eval_complex(&self, z: C64) -> CMat {
        let mut acc = self.coeffs.last().expect("non-empty").clone();
        for a in self.coeffs.iter().rev().skip(1) {
            acc = &acc.scale(z) + a;
        }
        acc
    }

    pub fn eval(&self, g: f64) -> CMat {
        self.eval_complex(C64::new(g, 0.0))
    }

    /// `Σ_m zᵐ A_m†`: the adjoint family continued off the real axis.
    pub fn eval_adjoint_analytic(&self, z: C64) -> CMat {
        let mut acc = self.coeffs.last().expect("non-empty").adjoint();
        for a in self.coeffs.iter().rev().skip(1) {
            acc = &acc.scale(z) + &a.adjoint();
        }
        acc
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().skip(1).all(|a| a.max_abs() == 0.0)
    }
}

/// Parameterized Lindblad model.
///
/// Channels are numbered from 1. The optional phase channel carries an
/// extra factor `e^{−ig}` on top of its polynomial family.
#[derive(Debug, Clone)]
pub struct QModel {
    dim: usize,
    hamiltonian: OperatorFamily,
    jumps: Vec<OperatorFamily>,
    phase_channel: Option<usize>,
}

impl QModel {
    pub fn new(hamiltonian: OperatorFamily, jumps: Vec<OperatorFamily>, phase_channel: Option<usize>) -> Result<Self> {
        let dim = hamiltonian.dim();
        if jumps.is_empty() {
            return Err(Error::InvalidParameter("a model needs at least one jump operator".into()));
        }
        if jumps.iter().any(|l| l.dim() != dim) {
            return Err(Error::Dimension("jump operators and Hamiltonian differ in dimension".into()));
        }
        if let Some(ch) = phase_channel {
            if ch == 0 || ch > jumps.len() {
                return Err(Error::ChannelOutOfRange { channel: ch, count: jumps.len() });
            }
        }
        for (m, h) in hamiltonian.coefficients().iter().enumerate() {
            let dev = h.hermitian_deviation();
            if dev > HERMITIAN_TOL * h.max_abs().max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "Hamiltonian coefficient {m} is not Hermitian (deviation {dev:e})"
                )));
            }
        }
        Ok(Self { dim, hamiltonian, jumps, phase_channel })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_jumps(&self) -> usize {
        self.jumps.len()
    }

    pub fn phase_channel(&self) -> Option<usize> {
        self.phase_channel
    }

    pub fn hamiltonian_family(&self) -> &OperatorFamily {
        &self.hamiltonian
    }

    pub fn jump_families(&self) -> &[OperatorFamily] {
        &self.jumps
    }

    /// `H(g)`, checked Hermitian.
    pub fn hamiltonian(&self, g: f64) -> Result<CMat> {
        let h = self.hamiltonian.eval(g);
        let dev = h.hermitian_deviation();
        if dev > HERMITIAN_TOL * h.max_abs().max(1.0) {
            return Err(Error::NonHermitian { g, deviation: dev });
        }
        Ok(h)
    }

    fn phase_factor(&self, index: usize, z: C64) -> C64 {
        if self.phase_channel == Some(index + 1) {
            (C64::new(0.0, -1.0) * z).exp()
        } else {
            C64::new(1.0, 0.0)
        }
    }

    /// `L_j(g)` for zero-based jump index `index`.
    pub fn jump(&self, index: usize, g: f64) -> CMat {
        let z = C64::new(g, 0.0);
        self.jumps[index].eval(g).scale(self.phase_factor(index, z))
    }

    pub fn jumps(&self, g: f64) -> Vec<CMat> {
        (0..self.jumps.len()).map(|j| self.jump(j, g)).collect()
    }

    /// `L_ch(g)` for a one-based channel.
    pub fn channel(&self, channel: usize, g: f64) -> Result<CMat> {
        self.check_channel(channel)?;
        Ok(self.jump(channel - 1, g))
    }

    pub fn check_channel(&self, channel: usize) -> Result<()> {
        if channel == 0 || channel > self.jumps.len() {
            Err(Error::ChannelOutOfRange { channel, count: self.jumps.len() })
        } else {
            Ok(())
        }
    }

    /// `Σ_j L_j†L_j` at `g`.
    pub fn decay_operator(&self, g: f64) -> CMat {
        let d = self.dim;
        self.jumps(g)
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, l| &acc + &(&l.adjoint() * l))
    }

    /// Effective non-Hermitian Hamiltonian `H − (i/2) Σ L_j†L_j`.
    pub fn effective_hamiltonian(&self, g: f64) -> Result<CMat> {
        let h = self.hamiltonian(g)?;
        Ok(&h - &self.decay_operator(g).scale(C64::new(0.0, 0.5)))
    }

    /// True when no operator depends on `g`.
    pub fn is_parameter_free(&self) -> bool {
        self.phase_channel.is_none()
            && self.hamiltonian.is_constant()
            && self.jumps.iter().all(OperatorFamily::is_constant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuperopKind {
    Liouvillian,
    Deformed,
    Counting,
}

/// Vectorization convention tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vectorization {
    ColumnStacking,
}

/// Dense superoperator on `d²`-dimensional vectorized operators.
#[derive(Debug, Clone)]
pub struct Superop {
    matrix: CMat,
    kind: SuperopKind,
    convention: Vectorization,
    dim: usize,
}

impl Superop {
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn kind(&self) -> SuperopKind {
        self.kind
    }

    pub fn convention(&self) -> Vectorization {
        self.convention
    }

    /// Hilbert-space dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Apply to a density matrix.
    pub fn apply(&self, rho: &CMat) -> Result<CMat> {
        if rho.rows() != self.dim || rho.cols() != self.dim {
            return Err(Error::Dimension("operator does not match superoperator".into()));
        }
        CMatrix::devec(&self.matrix.matvec(rho.as_slice()))
    }

    pub fn spectrum(&self) -> Result<SpectralDecomp<f64>> {
        spectrum(&self.matrix)
    }
}

/// Row vector `vec(I)ᵀ`: `trace_row · vec(X) = Tr X`.
pub fn trace_row(d: usize) -> Vec<C64> {
    let mut r = vec![C64::zero(); d * d];
    for i in 0..d {
        r[i + i * d] = C64::new(1.0, 0.0);
    }
    r
}

/// Trace of a vectorized operator.
pub fn vec_trace(v: &[C64]) -> C64 {
    let d = (v.len() as f64).sqrt().round() as usize;
    (0..d).map(|i| v[i + i * d]).sum()
}

struct Sides {
    h_left: CMat,
    h_right: CMat,
    /// (left factor, adjoint of right factor) for each channel
    jumps: Vec<(CMat, CMat)>,
    /// (L†L on the left, L†L on the right) for each channel
    decay: Vec<(CMat, CMat)>,
}

fn assemble(sides: &Sides) -> CMat {
    let d = sides.h_left.rows();
    let id = CMatrix::<f64>::identity(d);
    let mi = C64::new(0.0, -1.0);
    let mut m = &id.kron(&sides.h_left).scale(mi) - &sides.h_right.transpose().kron(&id).scale(mi);
    for ((l, r_dag), (ll, rr)) in sides.jumps.iter().zip(&sides.decay) {
        m = &m + &r_dag.transpose().kron(l);
        m = &m - &id.kron(ll).scale_re(0.5);
        m = &m - &rr.transpose().kron(&id).scale_re(0.5);
    }
    m
}

/// Lindblad generator `ρ ↦ −i[H,ρ] + Σ_j (L_jρL_j† − ½{L_j†L_j, ρ})`.
pub fn build_liouvillian(model: &QModel, g: f64) -> Result<Superop> {
    let mut s = build_deformed(model, g, g)?;
    s.kind = SuperopKind::Liouvillian;
    Ok(s)
}

/// Two-parameter generator
/// `ρ ↦ −iH(g₁)ρ + iρH(g₂) + Σ_j [L_j(g₁)ρL_j(g₂)† − ½(L_j(g₁)†L_j(g₁)ρ + ρL_j(g₂)†L_j(g₂))]`.
pub fn build_deformed(model: &QModel, g1: f64, g2: f64) -> Result<Superop> {
    let h_left = model.hamiltonian(g1)?;
    let h_right = model.hamiltonian(g2)?;
    let l1 = model.jumps(g1);
    let l2 = model.jumps(g2);
    let jumps = l1.iter().zip(&l2).map(|(a, b)| (a.clone(), b.adjoint())).collect();
    let decay = l1
        .iter()
        .zip(&l2)
        .map(|(a, b)| (&a.adjoint() * a, &b.adjoint() * b))
        .collect();
    let sides = Sides { h_left, h_right, jumps, decay };
    Ok(Superop {
        matrix: assemble(&sides),
        kind: SuperopKind::Deformed,
        convention: Vectorization::ColumnStacking,
        dim: model.dim(),
    })
}

/// The deformed generator continued to complex parameters.
///
/// Adjoint-side factors are the analytic continuation of `L(g)†` and
/// `L(g)†L(g)` from the real axis, so `build_deformed_analytic(g−is, g)`
/// reproduces the counting generator for the phase channel.
pub fn build_deformed_analytic(model: &QModel, z1: C64, z2: C64) -> Result<Superop> {
    let h_left = model.hamiltonian.eval_complex(z1);
    let h_right = model.hamiltonian.eval_complex(z2);
    let mut jumps = Vec::with_capacity(model.n_jumps());
    let mut decay = Vec::with_capacity(model.n_jumps());
    for (j, fam) in model.jumps.iter().enumerate() {
        let p1 = fam.eval_complex(z1);
        let p1_adj = fam.eval_adjoint_analytic(z1);
        let p2 = fam.eval_complex(z2);
        let p2_adj = fam.eval_adjoint_analytic(z2);
        let left = p1.scale(model.phase_factor(j, z1));
        // conj of e^{−i z} continued analytically is e^{+i z}
        let right_adj = p2_adj.scale(model.phase_factor(j, -z2));
        jumps.push((left, right_adj));
        decay.push((&p1_adj * &p1, &p2_adj * &p2));
    }
    let sides = Sides { h_left, h_right, jumps, decay };
    Ok(Superop {
        matrix: assemble(&sides),
        kind: SuperopKind::Deformed,
        convention: Vectorization::ColumnStacking,
        dim: model.dim(),
    })
}

/// Sandwich superoperator `ρ ↦ AρA†`.
pub fn sandwich(a: &CMat) -> CMat {
    a.conj().kron(a)
}

/// Tilted generator `L + (e^{−s} − 1) L_ch · L_ch†` for a one-based channel.
pub fn build_counting(model: &QModel, g: f64, s: f64, channel: usize) -> Result<Superop> {
    model.check_channel(channel)?;
    let base = build_liouvillian(model, g)?;
    let lc = model.channel(channel, g)?;
    let w = (-s).exp_m1();
    let matrix = &base.matrix + &sandwich(&lc).scale_re(w);
    Ok(Superop {
        matrix,
        kind: SuperopKind::Counting,
        convention: Vectorization::ColumnStacking,
        dim: model.dim(),
    })
}

/// Unique stationary state of a Lindblad generator.
pub fn stationary_state(superop: &Superop) -> Result<CMat> {
    let decomp = superop.spectrum()?;
    stationary_state_with(superop, &decomp)
}

/// As [`stationary_state`], reusing a decomposition of the same generator.
pub fn stationary_state_with(superop: &Superop, decomp: &SpectralDecomp<f64>) -> Result<CMat> {
    if superop.kind != SuperopKind::Liouvillian {
        return Err(Error::InvalidParameter("stationary state needs a Lindblad generator".into()));
    }
    if let Some(group) = decomp.group_of(0) {
        return Err(Error::DegenerateStationary { degeneracy: group.len() });
    }
    let d = superop.dim;
    let n = d * d;
    // Replace the (0,0) population equation by the trace constraint.
    let tr = trace_row(d);
    let mut a = superop.matrix.clone();
    for (j, t) in tr.iter().enumerate() {
        a[(0, j)] = *t;
    }
    let mut b = CMatrix::zeros(n, 1);
    b[(0, 0)] = C64::new(1.0, 0.0);
    let x = a.solve(&b)?;
    let rho = CMatrix::devec(x.as_slice())?.hermitian_part();
    let trace = rho.trace().re;
    let rho = rho.scale_re(1.0 / trace);
    let residual = superop.apply(&rho)?.max_abs();
    if residual > 1e-9 * superop.matrix.max_abs().max(1.0) {
        return Err(Error::NonFinite("stationary state residual"));
    }
    Ok(rho)
}

/// Minimum eigenvalue of the Hermitian part.
pub fn min_eigenvalue(rho: &CMat) -> Result<f64> {
    hermitian::min_eigenvalue(rho)
}

/// `|ψ⟩⟨ψ|`.
pub fn pure_density(psi: &[C64]) -> CMat {
    CMatrix::outer(psi, psi)
}

/// Normalized copy of a state vector.
pub fn normalized(psi: &[C64]) -> Result<Vec<C64>> {
    let n = crate::linalg::norm2(psi);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidParameter("state vector has zero or non-finite norm".into()));
    }
    Ok(psi.iter().map(|z| z / n).collect())
}

/// Check a state is normalized to `tol` and has dimension `d`.
pub fn check_state(psi: &[C64], d: usize, tol: f64) -> Result<()> {
    if psi.len() != d {
        return Err(Error::Dimension(format!("state has length {}, model dimension is {d}", psi.len())));
    }
    let n = crate::linalg::norm2(psi);
    if (n - 1.0).abs() > tol {
        return Err(Error::InvalidParameter(format!("state is not normalized (norm {n})")));
    }
    Ok(())
}

/// Evolve a density matrix under a generator for time `t`.
pub fn evolve(superop: &Superop, rho: &CMat, t: f64) -> Result<CMat> {
    let prop = crate::linalg::matexp(&superop.matrix.scale_re(t))?;
    CMatrix::devec(&prop.matvec(rho.as_slice()))
}
