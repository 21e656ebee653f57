//! Emission counting statistics from the tilted generator, and the Wigner
//! function of the two-phase output state.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lindblad::{build_counting, check_state, vec_trace, QModel};
use crate::linalg::{matexp, CMatrix};
use crate::qfi::{QfiDiagnostics, QfiMethod, QfiPoint, StencilConfig};
use crate::C64;

/// Imaginary part of `θ(s)` above which the value is flagged.
pub const THETA_IMAG_TOL: f64 = 1e-10;
/// Largest cumulant stencil step in `s`.
pub const CUMULANT_STEP: f64 = 1e-2;
/// Cumulant step relative to the count standard deviation `1/σ`.
const CUMULANT_SPREAD_STEP: f64 = 0.05;
/// Below this magnitude `Tr e^{tL(s)}ρ` is treated as underflow.
const TRACE_FLOOR: f64 = 1e-300;

/// Channel whose emissions are counted: the phase channel, else channel 1.
pub fn counting_channel(model: &QModel) -> usize {
    model.phase_channel().unwrap_or(1)
}

/// `Θ_t(s) = log Tr{e^{tL(s)} |χ⟩⟨χ|}` (principal branch).
pub fn cgf(model: &QModel, g: f64, s: f64, t: f64, chi: &[C64]) -> Result<C64> {
    check_state(chi, model.dim(), 1e-9)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite and non-negative, got {t}")));
    }
    let rho = CMatrix::outer(chi, chi).vec();
    cgf_vec(model, g, s, t, &rho)
}

fn cgf_vec(model: &QModel, g: f64, s: f64, t: f64, rho: &[C64]) -> Result<C64> {
    if t == 0.0 {
        return Ok(vec_trace(rho).ln());
    }
    let l = build_counting(model, g, s, counting_channel(model))?;
    let (prop, log_scale) = scaled_exponential(l.matrix(), t)?;
    let z = vec_trace(&prop.matvec(rho));
    if !(z.norm() > TRACE_FLOOR) {
        return Err(Error::FidelityUnderflow { magnitude: z.norm() });
    }
    Ok(z.ln() + log_scale)
}

/// `e^{tM} = P·e^{c}` with `P` kept at unit max-entry by renormalizing
/// between squarings, so long times neither overflow nor underflow.
fn scaled_exponential(m: &CMatrix<f64>, t: f64) -> Result<(CMatrix<f64>, f64)> {
    let norm = m.norm1() * t;
    let squarings = if norm > 1.0 { norm.log2().ceil() as i32 } else { 0 };
    let mut p = matexp(&m.scale_re(t / 2f64.powi(squarings)))?;
    let mut log_scale = 0.0;
    for _ in 0..squarings {
        p = &p * &p;
        log_scale *= 2.0;
        let top = p.max_abs();
        if !(top > 0.0 && top.is_finite()) {
            return Err(Error::NonFinite("scaled exponential"));
        }
        p = p.scale_re(1.0 / top);
        log_scale += top.ln();
    }
    Ok((p, log_scale))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theta {
    pub value: f64,
    pub imag: f64,
    /// `|Im λ₁| > THETA_IMAG_TOL`.
    pub flagged: bool,
}

/// `θ(s)`: eigenvalue of largest real part of the tilted generator.
pub fn theta_asymptotic(model: &QModel, g: f64, s: f64) -> Result<Theta> {
    let l = build_counting(model, g, s, counting_channel(model))?;
    let dec = l.spectrum()?;
    dec.require_diagonalizable()?;
    let lam = dec.eigenvalue(0);
    Ok(Theta { value: lam.re, imag: lam.im, flagged: lam.im.abs() > THETA_IMAG_TOL })
}

#[derive(Debug, Clone)]
pub struct CgfScan {
    pub s_grid: Vec<f64>,
    /// `Θ_t(s)/t` with the imaginary part unwrapped along the grid; empty
    /// for an asymptotic scan.
    pub theta_t: Vec<C64>,
    /// `θ(s)`; empty for a finite-time scan.
    pub theta: Vec<f64>,
    /// `None` for the asymptotic scan.
    pub t: Option<f64>,
    /// `−∂θ/∂s` by grid differences.
    pub activity: Vec<f64>,
}

fn grid_gradient(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![f64::NAN; n];
    }
    (0..n)
        .map(|i| {
            let (a, b) = if i == 0 { (0, 1) } else if i == n - 1 { (n - 2, n - 1) } else { (i - 1, i + 1) };
            (y[b] - y[a]) / (x[b] - x[a])
        })
        .collect()
}

/// Finite-time scan of `Θ_t(s)/t`.
pub fn cgf_scan(model: &QModel, g: f64, s_grid: &[f64], t: f64, chi: &[C64]) -> Result<CgfScan> {
    check_state(chi, model.dim(), 1e-9)?;
    if !(t > 0.0) {
        return Err(Error::InvalidParameter("finite-time scan needs t > 0".into()));
    }
    let rho = CMatrix::outer(chi, chi).vec();
    let raw: Vec<C64> = s_grid
        .par_iter()
        .map(|&s| cgf_vec(model, g, s, t, &rho))
        .collect::<Result<_>>()?;
    // continuity of the branch along s
    let mut theta_t = Vec::with_capacity(raw.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for z in raw {
        let mut im = z.im + offset;
        if let Some(p) = prev {
            let jump = ((im - p) / std::f64::consts::TAU).round();
            offset -= jump * std::f64::consts::TAU;
            im -= jump * std::f64::consts::TAU;
        }
        prev = Some(im);
        theta_t.push(C64::new(z.re, im) / t);
    }
    let re: Vec<f64> = theta_t.iter().map(|z| z.re).collect();
    let activity = grid_gradient(s_grid, &re).into_iter().map(|d| -d).collect();
    Ok(CgfScan { s_grid: s_grid.to_vec(), theta_t, theta: vec![], t: Some(t), activity })
}

/// Asymptotic scan of `θ(s)`.
pub fn theta_scan(model: &QModel, g: f64, s_grid: &[f64]) -> Result<CgfScan> {
    let theta: Vec<f64> = s_grid
        .par_iter()
        .map(|&s| theta_asymptotic(model, g, s).map(|th| th.value))
        .collect::<Result<_>>()?;
    let activity = grid_gradient(s_grid, &theta).into_iter().map(|d| -d).collect();
    Ok(CgfScan { s_grid: s_grid.to_vec(), theta_t: vec![], theta, t: None, activity })
}

/// Left and right derivatives of `θ` at `s0` by second-order one-sided
/// differences with step `h`.
pub fn theta_one_sided_slopes(model: &QModel, g: f64, s0: f64, h: f64) -> Result<(f64, f64)> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("slope step must be positive".into()));
    }
    let th = |s: f64| theta_asymptotic(model, g, s).map(|x| x.value);
    let f0 = th(s0)?;
    let left = (3.0 * f0 - 4.0 * th(s0 - h)? + th(s0 - 2.0 * h)?) / (2.0 * h);
    let right = (-3.0 * f0 + 4.0 * th(s0 + h)? - th(s0 + 2.0 * h)?) / (2.0 * h);
    Ok((left, right))
}

/// `∂²θ/∂s²` at `s = 0`.
///
/// The step is shortened to `0.01·√(gap/|θ''|)` so that it stays inside the
/// region where the leading eigenvalue is isolated.
pub fn theta_curvature(model: &QModel, g: f64, cfg: &StencilConfig) -> Result<f64> {
    let th = |s: f64| theta_asymptotic(model, g, s).map(|x| x.value);
    let second = |h: f64| -> Result<f64> {
        let c = (th(h)? - 2.0 * th(0.0)? + th(-h)?) / (h * h);
        if cfg.richardson {
            let f = (th(h / 2.0)? - 2.0 * th(0.0)? + th(-h / 2.0)?) / (h * h / 4.0);
            Ok((4.0 * f - c) / 3.0)
        } else {
            Ok(c)
        }
    };
    let dec = crate::lindblad::build_liouvillian(model, g)?.spectrum()?;
    let gap = if dec.dim() > 1 { -dec.eigenvalue(1).re } else { f64::INFINITY };
    let first = second(CUMULANT_STEP)?;
    let mut h = CUMULANT_STEP;
    if first.abs() > 0.0 && gap.is_finite() && gap > 0.0 {
        h = h.min(0.01 * (gap / first.abs()).sqrt());
    }
    if h == CUMULANT_STEP {
        Ok(first)
    } else {
        second(h)
    }
}

/// `n`-th derivative at 0 from central differences on `2n+1` points.
fn central_derivative(f: &dyn Fn(f64) -> Result<f64>, order: usize, h: f64) -> Result<f64> {
    Ok(match order {
        1 => (f(h)? - f(-h)?) / (2.0 * h),
        2 => (f(h)? - 2.0 * f(0.0)? + f(-h)?) / (h * h),
        3 => (f(2.0 * h)? - 2.0 * f(h)? + 2.0 * f(-h)? - f(-2.0 * h)?) / (2.0 * h.powi(3)),
        4 => (f(2.0 * h)? - 4.0 * f(h)? + 6.0 * f(0.0)? - 4.0 * f(-h)? + f(-2.0 * h)?) / h.powi(4),
        _ => unreachable!("order checked by caller"),
    })
}

/// Count cumulants `κ_n = (−1)ⁿ ∂ⁿ_s Θ_t(s)|₀` for `n = 1..=max_order`.
///
/// The step is `min(1e-2, 0.05/σ)` with `σ` a first estimate of the count
/// standard deviation; `cfg.richardson` adds one extrapolation level.
pub fn cumulants(
    model: &QModel,
    g: f64,
    t: f64,
    chi: &[C64],
    max_order: usize,
    cfg: &StencilConfig,
) -> Result<Vec<f64>> {
    Ok(cumulants_with_step(model, g, t, chi, max_order, cfg)?.0)
}

fn cumulants_with_step(
    model: &QModel,
    g: f64,
    t: f64,
    chi: &[C64],
    max_order: usize,
    cfg: &StencilConfig,
) -> Result<(Vec<f64>, f64)> {
    if !(1..=4).contains(&max_order) {
        return Err(Error::InvalidParameter(format!("cumulant order must be in 1..=4, got {max_order}")));
    }
    check_state(chi, model.dim(), 1e-9)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite and non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok((vec![0.0; max_order], 0.0));
    }
    let rho = CMatrix::outer(chi, chi).vec();
    let f = |s: f64| cgf_vec(model, g, s, t, &rho).map(|z| z.re);
    let deriv = |order: usize, h: f64| -> Result<f64> {
        let coarse = central_derivative(&f, order, h)?;
        if cfg.richardson {
            Ok((4.0 * central_derivative(&f, order, h / 2.0)? - coarse) / 3.0)
        } else {
            Ok(coarse)
        }
    };
    let var0 = deriv(2, CUMULANT_STEP)?.abs();
    let h = if var0 > 0.0 { CUMULANT_STEP.min(CUMULANT_SPREAD_STEP / var0.sqrt()) } else { CUMULANT_STEP };
    let out = (1..=max_order)
        .map(|n| deriv(n, h).map(|d| if n % 2 == 1 { -d } else { d }))
        .collect::<Result<Vec<_>>>()?;
    Ok((out, h))
}

/// `4κ₂`: the QFI of a phase imprinted on every counted emission.
pub fn qfi_variance4(model: &QModel, g: f64, t: f64, chi: &[C64], cfg: &StencilConfig) -> Result<QfiPoint> {
    let (k, h) = cumulants_with_step(model, g, t, chi, 2, cfg)?;
    Ok(QfiPoint {
        t,
        value: 4.0 * k[1],
        method: QfiMethod::Variance4,
        diagnostics: QfiDiagnostics { h, ..Default::default() },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub nq: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl GridSpec {
    pub fn square(half_width: f64, n: usize) -> Self {
        Self { q_min: -half_width, q_max: half_width, nq: n, p_min: -half_width, p_max: half_width, np: n }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.nq >= 2
            && self.np >= 2
            && self.q_min < self.q_max
            && self.p_min < self.p_max
            && [self.q_min, self.q_max, self.p_min, self.p_max].iter().all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("Wigner grid needs at least 2 points per axis and min < max".into()))
        }
    }

    fn axis(min: f64, max: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| min + (max - min) * i as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatParameters {
    pub p_i: f64,
    pub p_a: f64,
    pub mu_i: f64,
    pub mu_a: f64,
    pub t: f64,
    pub phi: f64,
}

#[derive(Debug, Clone)]
pub struct WignerGrid {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    /// `values[i][j] = W(q[i], p[j])`.
    pub values: Vec<Vec<f64>>,
    pub parameters: CatParameters,
}

impl WignerGrid {
    /// Rectangle-rule integral over the grid.
    pub fn integral(&self) -> f64 {
        let dq = self.q[1] - self.q[0];
        let dp = self.p[1] - self.p[0];
        self.values.iter().flatten().sum::<f64>() * dq * dp
    }
}

/// Coherent amplitude `e^{iφ}√(tμ)`.
pub fn cat_amplitude(mu: f64, t: f64, phi: f64) -> C64 {
    C64::from_polar((t * mu).sqrt(), phi)
}

/// Wigner function of `√p_I|α_I⟩ + √p_A|α_A⟩` (normalized), with
/// quadratures scaled so that a coherent state has variance ½.
pub fn cat_wigner(p_i: f64, p_a: f64, mu_i: f64, mu_a: f64, t: f64, phi: f64, grid: &GridSpec) -> Result<WignerGrid> {
    grid.validate()?;
    if !(p_i >= 0.0 && p_a >= 0.0 && (p_i + p_a - 1.0).abs() <= 1e-9) {
        return Err(Error::InvalidParameter(format!("cat weights must be non-negative and sum to 1, got {p_i} + {p_a}")));
    }
    if !(mu_i >= 0.0 && mu_a >= 0.0 && t >= 0.0) || ![mu_i, mu_a, t, phi].iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidParameter("cat rates and time must be finite and non-negative".into()));
    }
    let amps = [cat_amplitude(mu_i, t, phi), cat_amplitude(mu_a, t, phi)];
    let weights = [p_i.sqrt(), p_a.sqrt()];
    let overlap = |a: C64, b: C64| -> C64 {
        // ⟨b|a⟩ in log form
        C64::new(-0.5 * a.norm_sqr() - 0.5 * b.norm_sqr(), 0.0) + b.conj() * a
    };
    let norm = 1.0 + 2.0 * weights[0] * weights[1] * overlap(amps[0], amps[1]).exp().re;
    let q = GridSpec::axis(grid.q_min, grid.q_max, grid.nq);
    let p = GridSpec::axis(grid.p_min, grid.p_max, grid.np);
    let sqrt2 = std::f64::consts::SQRT_2;
    let values = q
        .par_iter()
        .map(|&qq| {
            p.iter()
                .map(|&pp| {
                    let z = C64::new(qq, pp) / sqrt2;
                    let mut w = C64::new(0.0, 0.0);
                    for a in 0..2 {
                        for b in 0..2 {
                            let c = weights[a] * weights[b];
                            if c == 0.0 {
                                continue;
                            }
                            let (al, be) = (amps[a], amps[b]);
                            let expo = overlap(al, be) - (z - al) * (z.conj() - be.conj()) * 2.0;
                            w += expo.exp() * c;
                        }
                    }
                    w.re / (std::f64::consts::PI * norm)
                })
                .collect()
        })
        .collect();
    Ok(WignerGrid { q, p, values, parameters: CatParameters { p_i, p_a, mu_i, mu_a, t, phi } })
}
