//! Quantum Fisher information of the system and output state.
//!
//! Every route starts from the fidelity `⟨Ψ_{g₁}(t)|Ψ_{g₂}(t)⟩ =
//! Tr{e^{tL_{g₁,g₂}} |χ⟩⟨χ|}` and its mixed derivative at `g₁ = g₂ = g`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lindblad::{build_deformed, build_liouvillian, check_state, stationary_state_with, vec_trace, QModel};
use crate::linalg::functions::{divided_exp, phi1, phi2};
use crate::linalg::{matexp, CMatrix, SpectralDecomp};
use crate::spectral::projector_p;
use crate::{CMat, C64};

/// Clamp threshold for small negative estimates.
pub const NEGATIVE_TOL: f64 = 1e-6;
/// Below this fidelity magnitude the logarithm is considered unstable.
pub const FIDELITY_FLOOR: f64 = 1e-12;
/// Largest allowed spread of stencil phases before the step is halved.
pub const PHASE_WINDING_LIMIT: f64 = std::f64::consts::FRAC_PI_2;
/// Step scale relative to the curvature length `1/√F` of the log-fidelity.
const CURVATURE_STEP: f64 = 0.01;
/// Step scale for eigenvalue differencing, relative to `√(gap/rate)`.
const EIGEN_STEP: f64 = 0.01;
/// Minimum eigenvector overlap accepted when following the leading branch.
pub const BRANCH_OVERLAP: f64 = 0.9;
/// Relative agreement demanded between the two asymptotic routes.
pub const ROUTE_TOL: f64 = 1e-4;
/// Tolerance for the state normalization precondition.
const NORM_TOL: f64 = 1e-9;

/// Finite-difference stencil settings.
///
/// The step used at parameter `g` is `h·max(1, |g|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilConfig {
    pub h: f64,
    pub richardson: bool,
    pub max_halvings: usize,
}

impl Default for StencilConfig {
    fn default() -> Self {
        Self { h: 1e-3, richardson: true, max_halvings: 20 }
    }
}

impl StencilConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParameter(format!("stencil step must be positive, got {}", self.h)));
        }
        Ok(())
    }

    pub fn step(&self, g: f64) -> f64 {
        self.h * g.abs().max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QfiMethod {
    Fd,
    SpectralFinite,
    AsymptoticLinearization,
    QuadraticCoefficient,
    Variance4,
}

impl QfiMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            QfiMethod::Fd => "fd",
            QfiMethod::SpectralFinite => "spectral_finite",
            QfiMethod::AsymptoticLinearization => "asymptotic_linearization",
            QfiMethod::QuadraticCoefficient => "quadratic_coefficient",
            QfiMethod::Variance4 => "variance4",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QfiDiagnostics {
    /// Final step in `g` (or `s`) used by the stencil; 0 when none was used.
    pub h: f64,
    /// Imaginary part discarded from the estimate.
    pub imag_residue: f64,
    /// The phase-winding guard shortened the step at least once.
    pub phase_winding: bool,
    pub halvings: usize,
    /// A small negative estimate was clamped to zero.
    pub clamped: bool,
    /// Difference between the extrapolated and the finest plain estimate.
    pub richardson_delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfiEstimate {
    pub value: f64,
    pub diagnostics: QfiDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfiPoint {
    pub t: f64,
    pub value: f64,
    pub method: QfiMethod,
    pub diagnostics: QfiDiagnostics,
}

fn clamp(value: f64, diag: &mut QfiDiagnostics) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -NEGATIVE_TOL {
        diag.clamped = true;
        Ok(0.0)
    } else {
        Err(Error::NegativeQfi { value })
    }
}

struct Mixed {
    value: C64,
    h: f64,
    halvings: usize,
    winding: bool,
    delta: f64,
}

/// `∂²_{ab} log f(a, b)` at the origin from the four-point stencil, with the
/// phase-winding guard and optional Richardson extrapolation.
fn mixed_log_derivative(
    overlap: &(dyn Fn(f64, f64) -> Result<C64> + Sync),
    h0: f64,
    cfg: &StencilConfig,
) -> Result<Mixed> {
    let mut h = h0;
    let mut halvings = 0;
    let mut winding = false;
    let single = |h: f64| -> Result<Option<C64>> {
        let pts = [(h, h), (h, -h), (-h, h), (-h, -h)];
        let vals: Vec<C64> = pts
            .par_iter()
            .map(|&(a, b)| overlap(a, b))
            .collect::<Result<Vec<_>>>()?;
        if vals.iter().any(|z| !(z.norm() >= FIDELITY_FLOOR)) {
            return Ok(None);
        }
        let logs: Vec<C64> = vals.iter().map(|z| z.ln()).collect();
        let args: Vec<f64> = logs.iter().map(|z| z.im).collect();
        let spread = args.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - args.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread > PHASE_WINDING_LIMIT {
            return Ok(None);
        }
        Ok(Some((logs[0] - logs[1] - logs[2] + logs[3]) / (4.0 * h * h)))
    };
    loop {
        let coarse = single(h)?;
        let fine = if cfg.richardson && coarse.is_some() { single(h / 2.0)? } else { coarse };
        match (coarse, fine) {
            (Some(c), Some(f)) => {
                let (value, delta) = if cfg.richardson {
                    let r = (f * 4.0 - c) / 3.0;
                    (r, (r - f).norm())
                } else {
                    (c, 0.0)
                };
                return Ok(Mixed { value, h, halvings, winding, delta });
            }
            _ => {
                halvings += 1;
                winding = true;
                if halvings > cfg.max_halvings {
                    // distinguish an underflowing fidelity from runaway phases
                    let z = overlap(h, -h)?;
                    if z.norm() < FIDELITY_FLOOR {
                        return Err(Error::FidelityUnderflow { magnitude: z.norm() });
                    }
                    return Err(Error::StencilFailure { halvings: cfg.max_halvings });
                }
                h /= 2.0;
            }
        }
    }
}

/// `4 ∂²_{g₁g₂} log⟨ψ_{g₁}|ψ_{g₂}⟩` for a normalized pure-state family.
pub fn pure_state_qfi(
    family: &(dyn Fn(f64) -> Vec<C64> + Sync),
    g: f64,
    cfg: &StencilConfig,
) -> Result<QfiEstimate> {
    cfg.validate()?;
    let overlap = |a: f64, b: f64| -> Result<C64> {
        let u = family(g + a);
        let v = family(g + b);
        for w in [&u, &v] {
            let n = crate::linalg::norm2(w);
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("state family not normalized (norm {n})")));
            }
        }
        if u.len() != v.len() {
            return Err(Error::Dimension("state family changes dimension".into()));
        }
        Ok(crate::linalg::inner(&u, &v))
    };
    let m = mixed_log_derivative(&overlap, cfg.step(g), cfg)?;
    finish_estimate(m)
}

fn finish_estimate(m: Mixed) -> Result<QfiEstimate> {
    let mut diagnostics = QfiDiagnostics {
        h: m.h,
        imag_residue: 4.0 * m.value.im,
        phase_winding: m.winding,
        halvings: m.halvings,
        clamped: false,
        richardson_delta: 4.0 * m.delta,
    };
    let value = clamp(4.0 * m.value.re, &mut diagnostics)?;
    Ok(QfiEstimate { value, diagnostics })
}

/// `Tr{e^{tL_{g₁,g₂}} |χ⟩⟨χ|}`.
pub fn fidelity(model: &QModel, g1: f64, g2: f64, t: f64, chi: &[C64]) -> Result<C64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite and non-negative, got {t}")));
    }
    check_state(chi, model.dim(), NORM_TOL)?;
    let rho = CMatrix::outer(chi, chi).vec();
    fidelity_vec(model, g1, g2, t, &rho)
}

fn fidelity_vec(model: &QModel, g1: f64, g2: f64, t: f64, rho: &[C64]) -> Result<C64> {
    if t == 0.0 {
        return Ok(vec_trace(rho));
    }
    let l = build_deformed(model, g1, g2)?;
    let prop = matexp(&l.matrix().scale_re(t))?;
    Ok(vec_trace(&prop.matvec(rho)))
}

/// QFI by differencing the log-fidelity.
///
/// The step starts at `cfg.step(g)` and is shortened to a fixed fraction of
/// the curvature length `1/√F` when the estimate shows it is too coarse.
pub fn qfi_fd(model: &QModel, g: f64, t: f64, chi: &[C64], cfg: &StencilConfig) -> Result<QfiPoint> {
    cfg.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite and non-negative, got {t}")));
    }
    check_state(chi, model.dim(), NORM_TOL)?;
    if t == 0.0 {
        return Ok(QfiPoint { t, value: 0.0, method: QfiMethod::Fd, diagnostics: QfiDiagnostics::default() });
    }
    let rho = CMatrix::outer(chi, chi).vec();
    let overlap = |a: f64, b: f64| fidelity_vec(model, g + a, g + b, t, &rho);
    let mut h = cfg.step(g);
    let mut m = mixed_log_derivative(&overlap, h, cfg)?;
    for _ in 0..4 {
        let f = 4.0 * m.value.re.abs();
        if f == 0.0 {
            break;
        }
        let target = CURVATURE_STEP / f.sqrt();
        if m.h <= 1.5 * target {
            break;
        }
        h = target.min(h);
        m = mixed_log_derivative(&overlap, h, cfg)?;
    }
    let est = finish_estimate(m)?;
    Ok(QfiPoint { t, value: est.value, method: QfiMethod::Fd, diagnostics: est.diagnostics })
}

/// First and mixed second derivatives of the deformed generator at
/// `g₁ = g₂ = g`.
#[derive(Debug, Clone)]
pub struct GeneratorDerivatives {
    /// `∂_{g₁} L_{g₁,g}`
    pub d1: CMat,
    /// `∂_{g₂} L_{g,g₂}`
    pub d1_adj: CMat,
    /// `∂²_{g₁g₂} L_{g₁,g₂}`
    pub d2: CMat,
    pub h: f64,
}

pub fn generator_derivatives(model: &QModel, g: f64, cfg: &StencilConfig) -> Result<GeneratorDerivatives> {
    cfg.validate()?;
    let at = |h: f64| -> Result<(CMat, CMat, CMat)> {
        let m = |a: f64, b: f64| build_deformed(model, g + a, g + b).map(|s| s.into_matrix());
        let d1 = (&m(h, 0.0)? - &m(-h, 0.0)?).scale_re(0.5 / h);
        let d1_adj = (&m(0.0, h)? - &m(0.0, -h)?).scale_re(0.5 / h);
        let d2 = (&(&m(h, h)? - &m(h, -h)?) - &(&m(-h, h)? - &m(-h, -h)?)).scale_re(0.25 / (h * h));
        Ok((d1, d1_adj, d2))
    };
    let h = cfg.step(g);
    let (a1, b1, c1) = at(h)?;
    if !cfg.richardson {
        return Ok(GeneratorDerivatives { d1: a1, d1_adj: b1, d2: c1, h });
    }
    let (a2, b2, c2) = at(h / 2.0)?;
    let rich = |fine: &CMat, coarse: &CMat| (&fine.scale_re(4.0) - coarse).scale_re(1.0 / 3.0);
    Ok(GeneratorDerivatives { d1: rich(&a2, &a1), d1_adj: rich(&b2, &b1), d2: rich(&c2, &c1), h })
}

/// Spectral data of the unperturbed generator shared by the analytic routes.
struct Setup {
    decomp: SpectralDecomp<f64>,
    rho_ss: Vec<C64>,
    derivs: GeneratorDerivatives,
}

fn setup(model: &QModel, g: f64, cfg: &StencilConfig) -> Result<Setup> {
    let l = build_liouvillian(model, g)?;
    let decomp = l.spectrum()?;
    decomp.require_diagonalizable()?;
    let rho_ss = stationary_state_with(&l, &decomp)?.vec();
    let derivs = generator_derivatives(model, g, cfg)?;
    Ok(Setup { decomp, rho_ss, derivs })
}

fn tr(m: &CMat, v: &[C64]) -> C64 {
    vec_trace(&m.matvec(v))
}

/// Exact finite-time QFI from the eigen-decomposition of the generator.
pub fn qfi_spectral_finite(model: &QModel, g: f64, t: f64, chi: &[C64], cfg: &StencilConfig) -> Result<QfiPoint> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite and non-negative, got {t}")));
    }
    check_state(chi, model.dim(), NORM_TOL)?;
    let s = setup(model, g, cfg)?;
    let chi_v = CMatrix::outer(chi, chi).vec();
    let (d1, d1a, d2) = (&s.derivs.d1, &s.derivs.d1_adj, &s.derivs.d2);
    let dec = &s.decomp;
    let ex = [0usize];

    // A1 = [(e^{tL} − I)/L], A2 = [(e^{tL} − I − tL)/L²], Ainv = [L⁻¹], all on the complement
    let a1 = dec.restricted_function(|z| phi1(z * t) * t, &ex)?;
    let a2 = dec.restricted_function(|z| phi2(z * t) * (t * t), &ex)?;
    let ainv = dec.restricted_function(|z| z.inv(), &ex)?;

    // B = Σ_{j,k>1} c_kj ⟨l_k|∂L'|ρ_j⟩ |ρ_k⟩⟨l_j|
    let v = dec.right_vectors();
    let w = dec.dual_vectors();
    let n = dec.dim();
    let mid = &(w * d1a) * v;
    let mut core = CMatrix::zeros(n, n);
    for k in 1..n {
        let lk = dec.eigenvalue(k);
        for j in 1..n {
            let lj = dec.eigenvalue(j);
            let c = divided_exp(t, lj, lk) / lk;
            core[(k, j)] = mid[(k, j)] * c;
        }
    }
    let b = &(v * &core) * w;

    let a1chi = a1.matvec(&chi_v);
    let rate1 = tr(d1, &s.rho_ss);
    let first = rate1 * t + tr(d1, &a1chi);
    let second = tr(d2, &s.rho_ss) * t + tr(d2, &a1chi);
    let terms = [
        -4.0 * first.norm_sqr(),
        4.0 * second.re,
        4.0 * t * t * rate1.norm_sqr(),
        8.0 * (rate1 * tr(d1a, &a2.matvec(&chi_v))).re,
        8.0 * tr(&(d1 * &a2), &d1a.matvec(&s.rho_ss)).re,
        -8.0 * tr(&(d1 * &ainv), &d1a.matvec(&a1chi)).re,
        8.0 * tr(&(d1 * &b), &chi_v).re,
    ];
    let value: f64 = terms.iter().sum();
    let mut diagnostics = QfiDiagnostics { h: s.derivs.h, imag_residue: 4.0 * second.im, ..Default::default() };
    let value = clamp(value, &mut diagnostics)?;
    Ok(QfiPoint { t, value, method: QfiMethod::SpectralFinite, diagnostics })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticRate {
    /// `lim F/t`, taken from the eigenvalue route.
    pub rate: f64,
    /// `4 ∂²_{g₁g₂} λ₁(g₁, g₂)`.
    pub route1: f64,
    /// `4 Tr{∂²L ρ_ss} − 8 Re Tr{∂L [L⁻¹] ∂L' ρ_ss}`.
    pub route2: f64,
    /// Step used for the eigenvalue differencing.
    pub h: f64,
}

/// Asymptotic QFI rate by two independent routes, checked against each other.
pub fn qfi_asymptotic_rate(model: &QModel, g: f64, cfg: &StencilConfig) -> Result<AsymptoticRate> {
    let s = setup(model, g, cfg)?;
    let (d1, d1a, d2) = (&s.derivs.d1, &s.derivs.d1_adj, &s.derivs.d2);
    let ainv = s.decomp.restricted_function(|z| z.inv(), &[0])?;
    let route2 =
        4.0 * tr(d2, &s.rho_ss).re - 8.0 * tr(&(d1 * &ainv), &d1a.matvec(&s.rho_ss)).re;

    let gap = if s.decomp.dim() > 1 { -s.decomp.eigenvalue(1).re } else { f64::INFINITY };
    let mut h = cfg.step(g);
    if route2.abs() > 0.0 && gap.is_finite() {
        h = h.min(EIGEN_STEP * (gap / route2.abs()).sqrt());
    }
    let route1 = leading_eigenvalue_curvature(model, g, &s.rho_ss, h, cfg.richardson)?;
    if (route1 - route2).abs() > ROUTE_TOL * route1.abs().max(1.0) {
        return Err(Error::RouteMismatch { route1, route2 });
    }
    Ok(AsymptoticRate { rate: route1, route1, route2, h })
}

fn leading_eigenvalue(model: &QModel, g1: f64, g2: f64, reference: &[C64]) -> Result<C64> {
    let l = build_deformed(model, g1, g2)?;
    let dec = l.spectrum()?;
    let rn = crate::linalg::norm2(reference);
    let mut best = (0usize, -1.0f64);
    for k in 0..dec.dim() {
        let v = dec.right_vector(k);
        let ov = crate::linalg::inner(v, reference).norm() / (crate::linalg::norm2(v) * rn);
        if ov > best.1 {
            best = (k, ov);
        }
    }
    if best.1 < BRANCH_OVERLAP {
        return Err(Error::BranchTracking { overlap: best.1 });
    }
    Ok(dec.eigenvalue(best.0))
}

fn leading_eigenvalue_curvature(model: &QModel, g: f64, rho_ss: &[C64], h: f64, richardson: bool) -> Result<f64> {
    let at = |h: f64| -> Result<C64> {
        let pts = [(h, h), (h, -h), (-h, h), (-h, -h)];
        let lams = pts
            .par_iter()
            .map(|&(a, b)| leading_eigenvalue(model, g + a, g + b, rho_ss))
            .collect::<Result<Vec<_>>>()?;
        Ok((lams[0] - lams[1] - lams[2] + lams[3]) / (4.0 * h * h))
    };
    let coarse = at(h)?;
    let value = if richardson { (at(h / 2.0)? * 4.0 - coarse) / 3.0 } else { coarse };
    Ok(4.0 * value.re)
}

/// Coefficient `c₂` of the quadratic regime `F ≈ c₂ t²`.
pub fn qfi_quadratic_regime(model: &QModel, g: f64, chi: &[C64], cfg: &StencilConfig) -> Result<f64> {
    check_state(chi, model.dim(), NORM_TOL)?;
    let l = build_liouvillian(model, g)?;
    let decomp = l.spectrum()?;
    let p = projector_p(&decomp)?;
    let derivs = generator_derivatives(model, g, cfg)?;
    let chi_v = CMatrix::outer(chi, chi).vec();
    let pchi = p.matvec(&chi_v);
    let inner = tr(&(&(&derivs.d1 * &p) * &derivs.d1_adj), &pchi);
    let outer = tr(&derivs.d1, &pchi);
    Ok(4.0 * inner.re - 4.0 * outer.norm_sqr())
}

/// `4 p_A p_I (μ_A − μ_I)²`.
pub fn qfi_two_phase(p_a: f64, p_i: f64, mu_a: f64, mu_i: f64) -> Result<f64> {
    let tol = 1e-9;
    let in_unit = |p: f64| (-tol..=1.0 + tol).contains(&p);
    if !in_unit(p_a) || !in_unit(p_i) || p_a + p_i > 1.0 + tol {
        return Err(Error::InvalidParameter(format!(
            "phase probabilities ({p_a}, {p_i}) must lie in [0,1] with sum at most 1"
        )));
    }
    if !(mu_a.is_finite() && mu_i.is_finite()) {
        return Err(Error::InvalidParameter("rates must be finite".into()));
    }
    Ok(4.0 * p_a * p_i * (mu_a - mu_i).powi(2))
}

/// QFI curve over a time grid; output order follows `ts`.
pub fn qfi_curve(
    model: &QModel,
    g: f64,
    ts: &[f64],
    chi: &[C64],
    cfg: &StencilConfig,
    method: QfiMethod,
) -> Result<Vec<QfiPoint>> {
    match method {
        QfiMethod::Fd => ts.par_iter().map(|&t| qfi_fd(model, g, t, chi, cfg)).collect(),
        QfiMethod::SpectralFinite => ts.par_iter().map(|&t| qfi_spectral_finite(model, g, t, chi, cfg)).collect(),
        QfiMethod::AsymptoticLinearization => {
            let r = qfi_asymptotic_rate(model, g, cfg)?;
            Ok(ts
                .iter()
                .map(|&t| QfiPoint {
                    t,
                    value: r.rate * t,
                    method,
                    diagnostics: QfiDiagnostics { h: r.h, ..Default::default() },
                })
                .collect())
        }
        QfiMethod::QuadraticCoefficient => {
            let c2 = qfi_quadratic_regime(model, g, chi, cfg)?;
            Ok(ts
                .iter()
                .map(|&t| QfiPoint { t, value: c2 * t * t, method, diagnostics: QfiDiagnostics::default() })
                .collect())
        }
        QfiMethod::Variance4 => ts
            .par_iter()
            .map(|&t| crate::counting::qfi_variance4(model, g, t, chi, cfg))
            .collect(),
    }
}

/// Least-squares slope of `log F` against `log t`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, f)| *t > 0.0 && *f > 0.0)
        .map(|(t, f)| (t.ln(), f.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Logarithmically spaced grid.
pub fn log_grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    let (a, b) = (start.ln(), stop.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use num_traits::Zero;

    use super::*;
    use crate::lindblad::OperatorFamily;
    use crate::models::{builtin, Builtin};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn two_phase_arithmetic() {
        assert_eq!(qfi_two_phase(0.5, 0.5, 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(qfi_two_phase(1.0, 0.0, 3.0, 1.0).unwrap(), 0.0);
        assert!(qfi_two_phase(0.7, 0.7, 1.0, 0.0).is_err());
        assert!(qfi_two_phase(-0.1, 0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn poisson_fidelity_and_qfi() {
        let m = builtin(Builtin::Poisson { mu: 1.0 }).unwrap();
        let chi = [C64::new(1.0, 0.0)];
        let (t, dphi) = (3.0, 0.4);
        let f = fidelity(&m, dphi, 0.0, t, &chi).unwrap();
        let expect = ((C64::new(0.0, -dphi)).exp() - 1.0).scale(t).exp();
        assert!((f - expect).norm() < 1e-12);
        let q = qfi_fd(&m, 0.0, 10.0, &chi, &StencilConfig::default()).unwrap();
        assert!(rel(q.value, 40.0) < 1e-6, "{}", q.value);
        let s = qfi_spectral_finite(&m, 0.0, 10.0, &chi, &StencilConfig::default());
        // d = 1: only the stationary mode exists
        assert!(rel(s.unwrap().value, 40.0) < 1e-6);
    }

    #[test]
    fn parameter_free_model_has_zero_qfi() {
        let h = OperatorFamily::constant(CMatrix::from_fn(2, 2, |i, j| C64::new((i + j) as f64, 0.0))).unwrap();
        let l = OperatorFamily::constant(CMatrix::from_fn(2, 2, |i, j| C64::new(if i < j { 1.0 } else { 0.0 }, 0.0))).unwrap();
        let m = QModel::new(h, vec![l], None).unwrap();
        let chi = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let q = qfi_fd(&m, 0.2, 7.0, &chi, &StencilConfig::default()).unwrap();
        assert!(q.value.abs() < 1e-9);
    }

    #[test]
    fn hamiltonian_derivative_matches_polynomial() {
        let h0 = CMatrix::from_fn(2, 2, |i, j| C64::new(if i == j { 0.0 } else { 1.0 }, 0.0));
        let h1 = CMatrix::<f64>::diag(&[C64::new(0.5, 0.0), C64::new(-0.5, 0.0)]);
        let l = CMatrix::from_fn(2, 2, |i, j| C64::new(if i < j { 0.7 } else { 0.0 }, 0.0));
        let m = QModel::new(
            OperatorFamily::new(vec![h0, h1.clone()]).unwrap(),
            vec![OperatorFamily::constant(l).unwrap()],
            None,
        )
        .unwrap();
        let d = generator_derivatives(&m, 0.3, &StencilConfig::default()).unwrap();
        let id = CMatrix::<f64>::identity(2);
        let expect = id.kron(&h1).scale(C64::new(0.0, -1.0));
        assert!(d.d1.dist(&expect) < 1e-10);
        assert!(d.d2.max_abs() < 1e-6);
    }

    #[test]
    fn blockcat_quadratic_coefficient_is_exact() {
        let m = builtin(Builtin::BlockCat { mu_a: 1.0, mu_i: 0.1 }).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let chi = [C64::new(h, 0.0), C64::new(h, 0.0)];
        let c2 = qfi_quadratic_regime(&m, 0.0, &chi, &StencilConfig::default()).unwrap();
        assert!((c2 - 0.81).abs() < 1e-6, "{c2}");
        let one = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let c0 = qfi_quadratic_regime(&m, 0.0, &one, &StencilConfig::default()).unwrap();
        assert!(c0.abs() < 1e-9);
        assert!(matches!(
            qfi_spectral_finite(&m, 0.0, 1.0, &chi, &StencilConfig::default()),
            Err(Error::DegenerateStationary { .. })
        ));
    }

    #[test]
    fn blockcat_fd_matches_exact_variance_law() {
        // F = (μ_A − μ_I)² t² + 2(μ_A + μ_I) t for the symmetric state
        let m = builtin(Builtin::BlockCat { mu_a: 1.0, mu_i: 0.1 }).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let chi = [C64::new(h, 0.0), C64::new(h, 0.0)];
        for t in [1.0, 10.0, 50.0] {
            let q = qfi_fd(&m, 0.0, t, &chi, &StencilConfig::default()).unwrap();
            let exact = 0.81 * t * t + 2.2 * t;
            assert!(rel(q.value, exact) < 1e-6, "t={t}: {} vs {exact}", q.value);
        }
    }

    #[test]
    fn damping_methods_agree() {
        let b = Builtin::Damping { gamma: 1.0 };
        let m = builtin(b).unwrap();
        let chi = b.default_chi();
        let cfg = StencilConfig::default();
        for t in [1.0, 10.0] {
            let a = qfi_fd(&m, 0.0, t, &chi, &cfg).unwrap().value;
            let s = qfi_spectral_finite(&m, 0.0, t, &chi, &cfg).unwrap().value;
            assert!(rel(s, a) < 1e-3, "t={t}: fd {a} spectral {s}");
        }
    }

    #[test]
    fn pure_state_product_and_ghz() {
        let n = 4usize;
        let ghz = move |g: f64| {
            let mut v = vec![C64::zero(); 1 << n];
            v[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            v[(1 << n) - 1] = C64::new(0.0, -(n as f64) * g).exp() * std::f64::consts::FRAC_1_SQRT_2;
            v
        };
        let q = pure_state_qfi(&ghz, 0.1, &StencilConfig::default()).unwrap();
        assert!(rel(q.value, 16.0) < 1e-6);
        let flat = |_g: f64| vec![C64::new(1.0, 0.0), C64::zero()];
        assert!(pure_state_qfi(&flat, 0.0, &StencilConfig::default()).unwrap().value.abs() < 1e-9);
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = log_grid(1.0, 100.0, 7).into_iter().map(|t| (t, 3.0 * t * t)).collect();
        assert!((log_log_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
    }
}
