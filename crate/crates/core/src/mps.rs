//! Discrete-time Kraus unraveling and brute-force record enumeration.
//!
//! Over a step `δt` the system and one output time bin evolve by
//! `K₀ = e^{−iδtH}√(I − δtΣL†L)` (no emission) and `K_j = e^{−iδtH}√δt L_j`.
//! Summing `⟨A_r(g₁)|A_r(g₂)⟩` over every record `r` gives the
//! system-plus-output overlap, which tends to the deformed-generator fidelity
//! as `δt → 0`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lindblad::{check_state, vec_trace, QModel};
use crate::linalg::{eigh, inner, matexp, sqrtm_psd, CMatrix};
use crate::{CMat, C64};

/// Largest number of records the enumeration will visit.
pub const RECORD_BUDGET: u128 = 1 << 20;
/// Agreement demanded between the enumeration and the transfer map.
pub const PATH_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct KrausSet {
    pub delta_t: f64,
    /// `K₀, K₁, …, K_k`.
    pub operators: Vec<CMat>,
    /// `‖Σ K†K − I‖_max`.
    pub completeness_defect: f64,
}

pub fn kraus_ops(model: &QModel, g: f64, delta_t: f64) -> Result<KrausSet> {
    if !(delta_t > 0.0 && delta_t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {delta_t}")));
    }
    let d = model.dim();
    let decay = model.decay_operator(g);
    let top = eigh(&decay)?.0.last().copied().unwrap_or(0.0);
    if delta_t * top >= 1.0 {
        return Err(Error::KrausStep { dt: delta_t, max_dt: 1.0 / top });
    }
    let u = matexp(&model.hamiltonian(g)?.scale(C64::new(0.0, -delta_t)))?;
    let root = sqrtm_psd(&(&CMatrix::identity(d) - &decay.scale_re(delta_t)), 1e-12)?;
    let mut operators = vec![&u * &root];
    for l in model.jumps(g) {
        operators.push(&u * &l.scale_re(delta_t.sqrt()));
    }
    let mut sum = CMatrix::zeros(d, d);
    for k in &operators {
        sum = &sum + &(&k.adjoint() * k);
    }
    let completeness_defect = sum.dist(&CMatrix::identity(d));
    Ok(KrausSet { delta_t, operators, completeness_defect })
}

fn check_budget(k: usize, n: usize) -> Result<()> {
    let records = (k as u128 + 1).checked_pow(n as u32).unwrap_or(u128::MAX);
    if records > RECORD_BUDGET {
        return Err(Error::EnumerationBudget { records, budget: RECORD_BUDGET });
    }
    Ok(())
}

fn setup(model: &QModel, g1: f64, g2: f64, t: f64, n: usize, chi: &[C64]) -> Result<(KrausSet, KrausSet)> {
    check_state(chi, model.dim(), 1e-9)?;
    if n == 0 || !(t > 0.0) {
        return Err(Error::InvalidParameter("enumeration needs t > 0 and n ≥ 1".into()));
    }
    let dt = t / n as f64;
    Ok((kraus_ops(model, g1, dt)?, kraus_ops(model, g2, dt)?))
}

/// `Σ_r ⟨A_r(g₁)|A_r(g₂)⟩` over all `(k+1)ⁿ` records, with
/// `A_r(g) = K_{r_n,g}···K_{r_1,g}|χ⟩`.
pub fn enumerate_records(model: &QModel, g1: f64, g2: f64, t: f64, n: usize, chi: &[C64]) -> Result<C64> {
    check_budget(model.n_jumps(), n)?;
    let (k1, k2) = setup(model, g1, g2, t, n, chi)?;
    fn walk(k1: &[CMat], k2: &[CMat], a1: &[C64], a2: &[C64], left: usize) -> C64 {
        if left == 0 {
            return inner(a1, a2);
        }
        k1.iter()
            .zip(k2)
            .map(|(m1, m2)| walk(k1, k2, &m1.matvec(a1), &m2.matvec(a2), left - 1))
            .sum()
    }
    let (o1, o2) = (&k1.operators, &k2.operators);
    // split on the first emission slot
    Ok((0..o1.len())
        .into_par_iter()
        .map(|j| walk(o1, o2, &o1[j].matvec(chi), &o2[j].matvec(chi), n - 1))
        .collect::<Vec<_>>()
        .into_iter()
        .sum())
}

/// One-step two-sided map `X ↦ Σ_j K_{j,g₂} X K_{j,g₁}†` in column stacking.
pub fn transfer_map(k1: &KrausSet, k2: &KrausSet) -> CMat {
    let d = k1.operators[0].rows();
    let mut phi = CMatrix::zeros(d * d, d * d);
    for (a, b) in k1.operators.iter().zip(&k2.operators) {
        phi = &phi + &a.conj().kron(b);
    }
    phi
}

/// `Tr{Φⁿ |χ⟩⟨χ|}`.
pub fn transfer_fidelity(model: &QModel, g1: f64, g2: f64, t: f64, n: usize, chi: &[C64]) -> Result<C64> {
    let (k1, k2) = setup(model, g1, g2, t, n, chi)?;
    let phi = transfer_map(&k1, &k2);
    let mut v = CMatrix::outer(chi, chi).vec();
    for _ in 0..n {
        v = phi.matvec(&v);
    }
    Ok(vec_trace(&v))
}

/// Record enumeration, checked against the transfer map to [`PATH_TOL`].
pub fn enumerate_fidelity(model: &QModel, g1: f64, g2: f64, t: f64, n: usize, chi: &[C64]) -> Result<C64> {
    let e = enumerate_records(model, g1, g2, t, n, chi)?;
    let m = transfer_fidelity(model, g1, g2, t, n, chi)?;
    let difference = (e - m).norm();
    if difference > PATH_TOL {
        return Err(Error::PathMismatch { difference });
    }
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRow {
    pub n: usize,
    pub delta_t: f64,
    pub enumerated: C64,
    pub transfer: C64,
    /// Continuum overlap `⟨Ψ_{g₁}|Ψ_{g₂}⟩`.
    pub continuum: C64,
    pub error: f64,
    /// `error(previous n) / error(this n)`; `None` on the first row.
    pub error_ratio: Option<f64>,
}

/// Discretization error of the enumeration for each step count.
///
/// The continuum overlap `⟨Ψ_{g₁}|Ψ_{g₂}⟩` is the deformed-generator fidelity
/// with the parameters in the order `(g₂, g₁)`: the generator puts its first
/// argument on the ket side.
pub fn oracle_convergence(
    model: &QModel,
    g1: f64,
    g2: f64,
    t: f64,
    chi: &[C64],
    steps: &[usize],
) -> Result<Vec<OracleRow>> {
    let continuum = crate::qfi::fidelity(model, g2, g1, t, chi)?;
    let mut rows: Vec<OracleRow> = Vec::with_capacity(steps.len());
    for &n in steps {
        let enumerated = enumerate_fidelity(model, g1, g2, t, n, chi)?;
        let transfer = transfer_fidelity(model, g1, g2, t, n, chi)?;
        let error = (enumerated - continuum).norm();
        let error_ratio = rows.last().map(|r| r.error / error);
        rows.push(OracleRow { n, delta_t: t / n as f64, enumerated, transfer, continuum, error, error_ratio });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin, Builtin};

    fn op_norm(a: &CMat) -> f64 {
        eigh(&(&a.adjoint() * a)).unwrap().0.last().unwrap().max(0.0).sqrt()
    }

    #[test]
    fn poisson_kraus_and_binomial() {
        let mu = 1.0;
        let m = builtin(Builtin::Poisson { mu }).unwrap();
        let dt = 0.05;
        let k = kraus_ops(&m, 0.0, dt).unwrap();
        assert!((k.operators[0][(0, 0)].re - (1.0 - dt * mu).sqrt()).abs() < 1e-15);
        assert!((k.operators[1][(0, 0)].re - (dt * mu).sqrt()).abs() < 1e-15);
        assert!(k.completeness_defect < 1e-15);

        let (g1, g2, t, n) = (0.2, 0.7, 1.0, 10);
        let dt = t / n as f64;
        let chi = [C64::new(1.0, 0.0)];
        let e = enumerate_fidelity(&m, g1, g2, t, n, &chi).unwrap();
        let expect = (C64::new(1.0 - dt * mu, 0.0) + C64::from_polar(dt * mu, g1 - g2)).powu(n as u32);
        assert!((e - expect).norm() < 1e-13, "{e} vs {expect}");
    }

    #[test]
    fn short_step_limit() {
        let m = builtin(Builtin::Rabi { omega: 1.0, kappa: 1.0 }).unwrap();
        let dt = 1e-4;
        let k = kraus_ops(&m, 0.0, dt).unwrap();
        let d = &k.operators[0] - &CMatrix::identity(2);
        let bound = 2.0 * dt * (op_norm(&m.hamiltonian(0.0).unwrap()) + 0.5 * op_norm(&m.decay_operator(0.0)));
        assert!(op_norm(&d) <= bound);
        assert!(matches!(kraus_ops(&m, 0.0, 2.0), Err(Error::KrausStep { .. })));
    }

    #[test]
    fn equal_parameters_preserve_probability() {
        let m = builtin(Builtin::Rabi { omega: 1.0, kappa: 1.0 }).unwrap();
        let chi = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let e = enumerate_fidelity(&m, 0.3, 0.3, 2.0, 12, &chi).unwrap();
        let tm = transfer_fidelity(&m, 0.3, 0.3, 2.0, 12, &chi).unwrap();
        assert!((e - tm).norm() < 1e-12);
        assert!((e.re - 1.0).abs() < 1e-12 && e.im.abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let m = builtin(Builtin::Damping { gamma: 1.0 }).unwrap();
        let chi = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        assert!(matches!(
            enumerate_fidelity(&m, 0.0, 0.1, 1.0, 21, &chi),
            Err(Error::EnumerationBudget { .. })
        ));
    }
}
