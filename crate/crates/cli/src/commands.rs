//! One function per subcommand, each producing a [`Table`].

use dptqfi::counting::{
    cat_wigner, cgf_scan, counting_channel, cumulants, qfi_variance4, theta_one_sided_slopes, theta_scan, GridSpec,
};
use dptqfi::lindblad::build_liouvillian;
use dptqfi::mps::oracle_convergence;
use dptqfi::qfi::{
    log_grid, log_log_slope, qfi_asymptotic_rate, qfi_curve, qfi_quadratic_regime, qfi_two_phase, QfiMethod, QfiPoint,
    StencilConfig,
};
use dptqfi::spectral::{split_model, timescales, Timescales};
use dptqfi::trajectories::{intermittency_metrics, sample_batch, CountHistogram};
use dptqfi::{Error, Result};

use crate::config::{Resolved, RunConfig};
use crate::output::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Spectrum,
    Qfi,
    Cgf,
    Cumulants,
    Traj,
    Oracle,
    Phases,
    Wigner,
    Regimes,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Qfi => "qfi",
            Command::Cgf => "cgf",
            Command::Cumulants => "cumulants",
            Command::Traj => "traj",
            Command::Oracle => "oracle",
            Command::Phases => "phases",
            Command::Wigner => "wigner",
            Command::Regimes => "regimes",
        }
    }
}

/// Step of the one-sided slope estimate at `s = 0`.
const KINK_STEP: f64 = 1e-4;
/// Points per fitted slope window.
const FIT_POINTS: usize = 12;

struct Ctx<'a> {
    cfg: &'a RunConfig,
    run: Resolved,
    stencil: StencilConfig,
}

pub fn run(command: Command, cfg: &RunConfig, hash: String) -> Result<(Table, Vec<String>)> {
    let stencil = cfg.stencil.to_config();
    stencil.validate()?;
    let run = cfg.resolve()?;
    let ctx = Ctx { cfg, run, stencil };
    let mut table = match command {
        Command::Spectrum => spectrum(&ctx)?,
        Command::Qfi => qfi(&ctx)?,
        Command::Cgf => cgf(&ctx)?,
        Command::Cumulants => cumulant_table(&ctx)?,
        Command::Traj => traj(&ctx)?,
        Command::Oracle => oracle(&ctx)?,
        Command::Phases => phases(&ctx)?,
        Command::Wigner => wigner(&ctx)?,
        Command::Regimes => regimes(&ctx)?,
    };
    table.command = command.name().into();
    table.config_hash = hash;
    tolerances(&mut table, &ctx);
    Ok((table, ctx.run.warnings))
}

fn tolerances(t: &mut Table, ctx: &Ctx) {
    use dptqfi::{counting, lindblad, linalg, mps, qfi, spectral, trajectories};
    t.tol("stencil.h", ctx.stencil.h);
    t.tol("stencil.richardson", ctx.stencil.richardson.to_string());
    t.tol("stencil.max_halvings", ctx.stencil.max_halvings);
    t.tol("chi_renormalize", crate::config::RENORMALIZE_TOL);
    t.tol("hermitian", lindblad::HERMITIAN_TOL);
    t.tol("defective_condition", linalg::eig::DEFECTIVE_CONDITION);
    t.tol("expm_max_squarings", linalg::expm::MAX_SQUARINGS as usize);
    t.tol("min_gap_ratio", spectral::MIN_GAP_RATIO);
    t.tol("cluster_fraction", spectral::CLUSTER_FRACTION);
    t.tol("qfi_negative", qfi::NEGATIVE_TOL);
    t.tol("fidelity_floor", qfi::FIDELITY_FLOOR);
    t.tol("phase_winding_limit", qfi::PHASE_WINDING_LIMIT);
    t.tol("branch_overlap", qfi::BRANCH_OVERLAP);
    t.tol("route_agreement", qfi::ROUTE_TOL);
    t.tol("theta_imag", counting::THETA_IMAG_TOL);
    t.tol("cumulant_step_max", counting::CUMULANT_STEP);
    t.tol("kink_step", KINK_STEP);
    t.tol("record_budget", mps::RECORD_BUDGET as usize);
    t.tol("oracle_path_agreement", mps::PATH_TOL);
    t.tol("jump_time_resolution", trajectories::JUMP_TIME_RESOLUTION);
    t.tol("fixed_step_bound", trajectories::FIXED_STEP_BOUND);
    t.tol("bimodal_dip_ratio", trajectories::DIP_THRESHOLD);
}

fn blank() -> Table {
    Table::new("", String::new(), &[])
}

fn with_columns(columns: &[&str]) -> Table {
    let mut t = blank();
    t.columns = columns.iter().map(|s| s.to_string()).collect();
    t
}

fn t_points(ctx: &Ctx) -> Result<Vec<f64>> {
    ctx.cfg
        .t_grid
        .ok_or_else(|| Error::InvalidParameter("this command needs a t grid (--t or t_grid)".into()))?
        .points("t")
}

fn s_points(ctx: &Ctx) -> Result<Vec<f64>> {
    ctx.cfg
        .s_grid
        .ok_or_else(|| Error::InvalidParameter("this command needs an s grid (--s or s_grid)".into()))?
        .points("s")
}

fn single_t(ctx: &Ctx) -> Result<f64> {
    match ctx.cfg.t {
        Some(t) if t > 0.0 && t.is_finite() => Ok(t),
        Some(t) => Err(Error::InvalidParameter(format!("t must be positive and finite, got {t}"))),
        None => Err(Error::InvalidParameter("this command needs a time (--time or t)".into())),
    }
}

fn model_timescales(ctx: &Ctx) -> Result<Timescales> {
    timescales(&build_liouvillian(&ctx.run.model, ctx.cfg.g)?.spectrum()?)
}

fn spectrum(ctx: &Ctx) -> Result<Table> {
    let dec = build_liouvillian(&ctx.run.model, ctx.cfg.g)?.spectrum()?;
    let mut t = with_columns(&["index", "eigenvalue_re", "eigenvalue_im"]);
    for i in 0..dec.dim() {
        let z = dec.eigenvalue(i);
        t.push(vec![i.into(), z.re.into(), z.im.into()]);
    }
    match timescales(&dec) {
        Ok(ts) => {
            t.result("tau", ts.tau);
            t.result("tau_prime", ts.tau_prime);
            t.result("gap_ratio", ts.gap_ratio);
        }
        Err(e) => t.result("timescales", format!("unavailable: {e}")),
    }
    Ok(t)
}

fn parse_method(name: &str) -> Result<QfiMethod> {
    Ok(match name {
        "fd" => QfiMethod::Fd,
        "spectral_finite" => QfiMethod::SpectralFinite,
        "asymptotic_linearization" => QfiMethod::AsymptoticLinearization,
        "quadratic_coefficient" => QfiMethod::QuadraticCoefficient,
        "variance4" => QfiMethod::Variance4,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown method {other:?} (fd, spectral_finite, asymptotic_linearization, quadratic_coefficient, variance4)"
            )))
        }
    })
}

fn column_name(m: QfiMethod) -> String {
    match m {
        QfiMethod::QuadraticCoefficient => "F_quadratic_model".into(),
        QfiMethod::AsymptoticLinearization => "F_asymptotic_model".into(),
        other => format!("F_{}", other.tag()),
    }
}

fn has_stencil_diagnostics(m: QfiMethod) -> bool {
    matches!(m, QfiMethod::Fd | QfiMethod::SpectralFinite | QfiMethod::Variance4)
}

fn qfi(ctx: &Ctx) -> Result<Table> {
    let ts = t_points(ctx)?;
    if ctx.cfg.methods.is_empty() {
        return Err(Error::InvalidParameter("methods list is empty".into()));
    }
    let methods: Vec<QfiMethod> = ctx.cfg.methods.iter().map(|m| parse_method(m)).collect::<Result<_>>()?;
    let (model, g, chi) = (&ctx.run.model, ctx.cfg.g, &ctx.run.chi);
    let curves: Vec<Vec<QfiPoint>> =
        methods.iter().map(|&m| qfi_curve(model, g, &ts, chi, &ctx.stencil, m)).collect::<Result<_>>()?;

    let mut cols = vec!["t".to_string()];
    cols.extend(methods.iter().map(|&m| column_name(m)));
    let fd = methods.iter().position(|&m| m == QfiMethod::Fd);
    if fd.is_some() {
        cols.push("F_fd_per_t2".into());
    }
    for &m in methods.iter().filter(|&&m| has_stencil_diagnostics(m)) {
        for d in ["h", "imag_residue", "halvings", "clamped", "phase_winding"] {
            cols.push(format!("{d}_{}", m.tag()));
        }
    }
    let mut table = blank();
    table.columns = cols;
    for (i, &t) in ts.iter().enumerate() {
        let mut row: Vec<Cell> = vec![t.into()];
        row.extend(curves.iter().map(|c| Cell::from(c[i].value)));
        if let Some(k) = fd {
            row.push((curves[k][i].value / (t * t)).into());
        }
        for (c, _) in curves.iter().zip(&methods).filter(|(_, &m)| has_stencil_diagnostics(m)) {
            let d = &c[i].diagnostics;
            row.extend([d.h.into(), d.imag_residue.into(), d.halvings.into(), d.clamped.into(), d.phase_winding.into()]);
        }
        table.push(row);
    }
    for (c, &m) in curves.iter().zip(&methods) {
        match m {
            QfiMethod::QuadraticCoefficient => table.result("quadratic_coefficient", c[0].value / (ts[0] * ts[0])),
            QfiMethod::AsymptoticLinearization => table.result("asymptotic_rate", c[0].value / ts[0]),
            _ => {}
        }
    }
    Ok(table)
}

fn cgf(ctx: &Ctx) -> Result<Table> {
    let s = s_points(ctx)?;
    let (model, g) = (&ctx.run.model, ctx.cfg.g);
    let asym = theta_scan(model, g, &s)?;
    let finite = match ctx.cfg.t {
        Some(_) => Some(cgf_scan(model, g, &s, single_t(ctx)?, &ctx.run.chi)?),
        None => None,
    };
    let mut cols = vec!["s", "theta", "activity"];
    if finite.is_some() {
        cols.extend(["theta_t_re", "theta_t_im", "activity_t"]);
    }
    let mut t = with_columns(&cols);
    for i in 0..s.len() {
        let mut row: Vec<Cell> = vec![s[i].into(), asym.theta[i].into(), asym.activity[i].into()];
        if let Some(f) = &finite {
            row.extend([f.theta_t[i].re.into(), f.theta_t[i].im.into(), f.activity[i].into()]);
        }
        t.push(row);
    }
    t.result("counting_channel", counting_channel(model));
    if let Some(tf) = ctx.cfg.t {
        t.result("t", tf);
    }
    if s[0] < 0.0 && *s.last().unwrap() > 0.0 {
        let (left, right) = theta_one_sided_slopes(model, g, 0.0, KINK_STEP)?;
        t.result("slope_left_at_0", left);
        t.result("slope_right_at_0", right);
        t.result("kink_at_0", right - left);
    }
    Ok(t)
}

fn cumulant_table(ctx: &Ctx) -> Result<Table> {
    let ts = t_points(ctx)?;
    let order = ctx.cfg.max_order;
    if !(1..=4).contains(&order) {
        return Err(Error::InvalidParameter(format!("max_order must be 1..=4, got {order}")));
    }
    let (model, g, chi) = (&ctx.run.model, ctx.cfg.g, &ctx.run.chi);
    let mut names: Vec<String> = vec!["t".into()];
    names.extend((1..=order).map(|n| format!("kappa{n}")));
    if order >= 2 {
        names.push("F_variance4".into());
    }
    let mut t = blank();
    t.columns = names;
    for &tt in &ts {
        let k = cumulants(model, g, tt, chi, order, &ctx.stencil)?;
        let mut row: Vec<Cell> = vec![tt.into()];
        row.extend(k.iter().map(|&x| Cell::from(x)));
        if order >= 2 {
            row.push(qfi_variance4(model, g, tt, chi, &ctx.stencil)?.value.into());
        }
        t.push(row);
    }
    Ok(t)
}

fn traj(ctx: &Ctx) -> Result<Table> {
    let tf = single_t(ctx)?;
    if ctx.cfg.n_traj == 0 {
        return Err(Error::InvalidParameter("n_traj must be positive".into()));
    }
    let (model, g, chi) = (&ctx.run.model, ctx.cfg.g, &ctx.run.chi);
    let batch = sample_batch(model, g, tf, chi, ctx.cfg.n_traj, ctx.cfg.seed)?;
    let ch = counting_channel(model);
    let counts: Vec<usize> = batch.iter().map(|tr| tr.count(ch)).collect();
    let hist = CountHistogram::from_counts(&counts, tf)?;
    let mut t = with_columns(&["count", "trajectories", "smoothed"]);
    for (k, (&c, &s)) in hist.counts.iter().zip(&hist.smoothed).enumerate() {
        t.push(vec![k.into(), (c as usize).into(), s.into()]);
    }
    t.result("n_traj", hist.n_traj);
    t.result("seed", ctx.cfg.seed.to_string());
    t.result("mean", hist.mean);
    t.result("variance", hist.variance);
    t.result("variance_stderr", hist.variance_stderr);
    t.result("bandwidth", hist.bandwidth);
    let maxima: Vec<String> = hist.maxima.iter().map(|m| m.to_string()).collect();
    t.result("maxima", maxima.join(";"));
    t.result("dip_ratio", hist.dip_ratio);
    t.result("bimodal", hist.bimodal);
    t.result(
        "bimodal_rule",
        "Gaussian kernel, bandwidth max(sqrt(mean), 0.5); bimodal when two maxima and min between / smaller max <= dip threshold",
    );

    // intermittency of the first trajectory, thresholded between phase rates
    let split = split_model(model, g, chi).ok();
    let (window, threshold) = match &split {
        Some(s) => (ctx.cfg.window.unwrap_or(30.0 / s.mu_a.max(f64::MIN_POSITIVE)), 0.5 * (s.mu_a + s.mu_i)),
        None => (ctx.cfg.window.unwrap_or(tf / 20.0), hist.mean / tf),
    };
    t.result("intermittency_window", window);
    t.result("intermittency_threshold", threshold);
    match intermittency_metrics(&batch[0], window, threshold) {
        Ok(im) => {
            t.result("switches", im.switches);
            t.result("mean_active_dwell", im.mean_active);
            t.result("mean_inactive_dwell", im.mean_inactive);
            t.result("correlation_time", im.correlation_time);
        }
        Err(e) => t.result("intermittency", format!("skipped: {e}")),
    }
    if let Ok(ts) = model_timescales(ctx) {
        t.result("tau", ts.tau);
    }
    Ok(t)
}

fn oracle(ctx: &Ctx) -> Result<Table> {
    let tf = single_t(ctx)?;
    let g1 = ctx.cfg.g1.unwrap_or(ctx.cfg.g);
    let g2 = ctx.cfg.g2.unwrap_or(ctx.cfg.g + 0.1);
    if ctx.cfg.steps.is_empty() {
        return Err(Error::InvalidParameter("steps list is empty".into()));
    }
    let rows = oracle_convergence(&ctx.run.model, g1, g2, tf, &ctx.run.chi, &ctx.cfg.steps)?;
    let mut t = with_columns(&[
        "n",
        "delta_t",
        "enumerated_re",
        "enumerated_im",
        "transfer_re",
        "transfer_im",
        "continuum_re",
        "continuum_im",
        "error",
        "error_ratio",
    ]);
    for r in rows {
        t.push(vec![
            r.n.into(),
            r.delta_t.into(),
            r.enumerated.re.into(),
            r.enumerated.im.into(),
            r.transfer.re.into(),
            r.transfer.im.into(),
            r.continuum.re.into(),
            r.continuum.im.into(),
            r.error.into(),
            r.error_ratio.into(),
        ]);
    }
    t.result("g1", g1);
    t.result("g2", g2);
    t.result("t", tf);
    Ok(t)
}

fn phases(ctx: &Ctx) -> Result<Table> {
    let (model, g, chi) = (&ctx.run.model, ctx.cfg.g, &ctx.run.chi);
    let s = split_model(model, g, chi)?;
    let ts = model_timescales(ctx)?;
    let mut t = with_columns(&["quantity", "value"]);
    let mut kv = |k: &str, v: f64| t.push(vec![k.into(), v.into()]);
    kv("tau", ts.tau);
    kv("tau_prime", ts.tau_prime);
    kv("gap_ratio", ts.gap_ratio);
    kv("p_a", s.p_a);
    kv("p_i", s.p_i);
    kv("mu_a", s.mu_a);
    kv("mu_i", s.mu_i);
    kv("cluster_tol", s.cluster_tol);
    for (i, &e) in s.l2_spectrum.iter().enumerate() {
        kv(&format!("l2_eigenvalue_{i}"), e);
    }
    kv("two_phase_coefficient", qfi_two_phase(s.p_a, s.p_i, s.mu_a, s.mu_i)?);
    kv("quadratic_coefficient", qfi_quadratic_regime(model, g, chi, &ctx.stencil)?);
    Ok(t)
}

fn wigner(ctx: &Ctx) -> Result<Table> {
    let tf = single_t(ctx)?;
    let s = split_model(&ctx.run.model, ctx.cfg.g, &ctx.run.chi)?;
    let w = &ctx.cfg.wigner;
    let grid = GridSpec { q_min: w.q_min, q_max: w.q_max, nq: w.nq, p_min: w.p_min, p_max: w.p_max, np: w.np };
    let out = cat_wigner(s.p_i, s.p_a, s.mu_i, s.mu_a, tf, w.phi, &grid)?;
    let mut t = with_columns(&["q", "p", "W"]);
    for (i, &q) in out.q.iter().enumerate() {
        for (j, &p) in out.p.iter().enumerate() {
            t.push(vec![q.into(), p.into(), out.values[i][j].into()]);
        }
    }
    t.result("p_a", s.p_a);
    t.result("p_i", s.p_i);
    t.result("mu_a", s.mu_a);
    t.result("mu_i", s.mu_i);
    t.result("t", tf);
    t.result("phi", w.phi);
    t.result("integral", out.integral());
    Ok(t)
}

/// Least-squares log-log slope over `[a, b]` and the range of the local
/// slopes between neighbouring grid points.
fn fit(ctx: &Ctx, a: f64, b: f64) -> Result<(f64, f64, f64)> {
    if !(a > 0.0 && b > a && b.is_finite()) {
        return Ok((f64::NAN, f64::NAN, f64::NAN));
    }
    let ts = log_grid(a, b, FIT_POINTS);
    let curve = qfi_curve(&ctx.run.model, ctx.cfg.g, &ts, &ctx.run.chi, &ctx.stencil, QfiMethod::Fd)?;
    let pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.t, p.value)).collect();
    let local: Vec<f64> = pts.windows(2).filter_map(log_log_slope).collect();
    let lo = local.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = local.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((log_log_slope(&pts).unwrap_or(f64::NAN), lo, hi))
}

fn regimes(ctx: &Ctx) -> Result<Table> {
    let (model, g, chi) = (&ctx.run.model, ctx.cfg.g, &ctx.run.chi);
    let ts = model_timescales(ctx)?;
    let mut t = with_columns(&["t", "F_fd", "F_quadratic_model", "F_asymptotic_model"]);
    t.result("tau", ts.tau);
    t.result("tau_prime", ts.tau_prime);
    t.result("gap_ratio", ts.gap_ratio);

    let c2 = qfi_quadratic_regime(model, g, chi, &ctx.stencil);
    let rate = if ts.tau.is_finite() { qfi_asymptotic_rate(model, g, &ctx.stencil).map(|r| r.rate) } else { Ok(f64::NAN) };
    let c2 = c2.map_err(|e| t.result("quadratic_coefficient_note", e.to_string())).unwrap_or(f64::NAN);
    let rate = rate.map_err(|e| t.result("asymptotic_rate_note", e.to_string())).unwrap_or(f64::NAN);
    t.result("quadratic_coefficient", c2);
    t.result("asymptotic_rate", rate);
    if let Ok(s) = split_model(model, g, chi) {
        t.result("two_phase_coefficient", qfi_two_phase(s.p_a, s.p_i, s.mu_a, s.mu_i)?);
    }

    let (qa, qb) = if ts.tau.is_finite() {
        (5.0 * ts.tau_prime, ts.tau / 5.0)
    } else {
        (10.0 * ts.tau_prime, 1000.0 * ts.tau_prime)
    };
    t.result("quadratic_window_start", qa);
    t.result("quadratic_window_stop", qb);
    let (slope, lo, hi) = fit(ctx, qa, qb)?;
    t.result("slope_quadratic_window", slope);
    t.result("slope_quadratic_window_local_min", lo);
    t.result("slope_quadratic_window_local_max", hi);
    let (la, lb) = (20.0 * ts.tau, 200.0 * ts.tau);
    t.result("linear_window_start", la);
    t.result("linear_window_stop", lb);
    let (slope, lo, hi) = fit(ctx, la, lb)?;
    t.result("slope_linear_window", slope);
    t.result("slope_linear_window_local_min", lo);
    t.result("slope_linear_window_local_max", hi);

    let grid = match ctx.cfg.t_grid {
        Some(gc) => gc.points("t")?,
        None => log_grid(ts.tau_prime, if ts.tau.is_finite() { lb } else { qb }, 30),
    };
    let fd = qfi_curve(model, g, &grid, chi, &ctx.stencil, QfiMethod::Fd)?;
    for (p, &tt) in fd.iter().zip(&grid) {
        t.push(vec![tt.into(), p.value.into(), (c2 * tt * tt).into(), (rate * tt).into()]);
    }
    Ok(t)
}
