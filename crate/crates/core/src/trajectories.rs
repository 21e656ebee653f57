//! Quantum-jump unraveling: jump records, count statistics and intermittency.
//!
//! Trajectory `i` of a batch seeded with `seed` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` switched to stream `i`, so batches give
//! identical records whatever the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lindblad::{check_state, QModel};
use crate::linalg::{matexp, norm2, CMatrix};
use crate::{CMat, C64};

/// Relative resolution of the jump-time bisection.
pub const JUMP_TIME_RESOLUTION: f64 = 1e-10;
/// Fixed-step sampler bound on `δt · max rate`.
pub const FIXED_STEP_BOUND: f64 = 1e-3;
/// Largest smoothed dip relative to the smaller peak that counts as bimodal.
pub const DIP_THRESHOLD: f64 = 0.8;
/// Slack on the norm monotonicity check.
const NORM_SLACK: f64 = 1e-10;
/// Above this eigenvector condition number propagation falls back to `expm`.
const PROPAGATOR_CONDITION: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    /// 1-based channel index.
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub events: Vec<Jump>,
    pub t_final: f64,
    pub seed: u64,
    pub stream: u64,
    pub final_state: Vec<C64>,
}

impl Trajectory {
    /// Little-endian serialization of every field, for determinism checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(self.seed.to_le_bytes());
        out.extend(self.stream.to_le_bytes());
        out.extend(self.t_final.to_le_bytes());
        out.extend((self.events.len() as u64).to_le_bytes());
        for e in &self.events {
            out.extend(e.time.to_le_bytes());
            out.extend((e.channel as u64).to_le_bytes());
        }
        for z in &self.final_state {
            out.extend(z.re.to_le_bytes());
            out.extend(z.im.to_le_bytes());
        }
        out
    }

    pub fn count(&self, channel: usize) -> usize {
        self.events.iter().filter(|e| e.channel == channel).count()
    }

    pub fn waiting_times(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.events
            .iter()
            .map(|e| {
                let w = e.time - prev;
                prev = e.time;
                w
            })
            .collect()
    }
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Open-interval uniform draw.
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// No-jump evolution `e^{−iH_eff τ}` through an eigendecomposition of `H_eff`
/// when it is well conditioned.
enum NoJump {
    Modes { right: CMat, dual: CMat, rates: Vec<C64> },
    Dense(CMat),
}

impl NoJump {
    fn new(h_eff: &CMat) -> Result<Self> {
        let gen = h_eff.scale(C64::new(0.0, -1.0));
        let dec = crate::linalg::spectrum(&gen)?;
        if dec.condition() < PROPAGATOR_CONDITION {
            Ok(NoJump::Modes {
                right: dec.right_vectors().clone(),
                dual: dec.dual_vectors().clone(),
                rates: dec.eigenvalues().to_vec(),
            })
        } else {
            Ok(NoJump::Dense(gen))
        }
    }

    fn apply(&self, tau: f64, psi: &[C64]) -> Result<Vec<C64>> {
        match self {
            NoJump::Modes { right, dual, rates } => {
                let coeff: Vec<C64> = dual
                    .matvec(psi)
                    .into_iter()
                    .zip(rates)
                    .map(|(c, l)| c * (l * tau).exp())
                    .collect();
                Ok(right.matvec(&coeff))
            }
            NoJump::Dense(gen) => Ok(matexp(&gen.scale_re(tau))?.matvec(psi)),
        }
    }
}

struct Unraveling {
    jumps: Vec<CMat>,
    no_jump: NoJump,
    decay: CMat,
}

impl Unraveling {
    fn new(model: &QModel, g: f64) -> Result<Self> {
        Ok(Self {
            jumps: model.jumps(g),
            no_jump: NoJump::new(&model.effective_hamiltonian(g)?)?,
            decay: model.decay_operator(g),
        })
    }

    fn norm_sqr(psi: &[C64]) -> f64 {
        psi.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Apply a jump drawn with probabilities `∝ ‖L_j ψ‖²`; `None` if every
    /// channel annihilates the state.
    fn jump(&self, psi: &[C64], rng: &mut ChaCha8Rng) -> Option<(usize, Vec<C64>)> {
        let out: Vec<Vec<C64>> = self.jumps.iter().map(|l| l.matvec(psi)).collect();
        let weights: Vec<f64> = out.iter().map(|v| Self::norm_sqr(v)).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        let mut r = uniform(rng) * total;
        let mut pick = weights.len() - 1;
        for (j, w) in weights.iter().enumerate() {
            if r < *w {
                pick = j;
                break;
            }
            r -= w;
        }
        let n = weights[pick].sqrt();
        Some((pick + 1, out[pick].iter().map(|z| z / n).collect()))
    }

    fn max_rate(&self) -> Result<f64> {
        Ok(crate::linalg::eigh(&self.decay)?.0.last().copied().unwrap_or(0.0).max(0.0))
    }
}

/// Waiting-time unraveling with the default stream 0.
pub fn sample_trajectory(model: &QModel, g: f64, t: f64, chi: &[C64], seed: u64) -> Result<Trajectory> {
    sample_trajectory_stream(model, g, t, chi, seed, 0)
}

fn check_inputs(model: &QModel, t: f64, chi: &[C64]) -> Result<()> {
    check_state(chi, model.dim(), 1e-9)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("trajectory length must be finite and non-negative, got {t}")));
    }
    Ok(())
}

pub fn sample_trajectory_stream(
    model: &QModel,
    g: f64,
    t: f64,
    chi: &[C64],
    seed: u64,
    stream: u64,
) -> Result<Trajectory> {
    check_inputs(model, t, chi)?;
    let unr = Unraveling::new(model, g)?;
    run_waiting_time(&unr, t, chi, seed, stream)
}

fn run_waiting_time(unr: &Unraveling, t: f64, chi: &[C64], seed: u64, stream: u64) -> Result<Trajectory> {
    let mut rng = stream_rng(seed, stream);
    let mut psi = chi.to_vec();
    let mut now = 0.0;
    let mut events = Vec::new();
    let norm_at = |psi: &[C64], tau: f64| -> Result<(f64, Vec<C64>)> {
        let v = unr.no_jump.apply(tau, psi)?;
        let n = Unraveling::norm_sqr(&v);
        if n > 1.0 + NORM_SLACK {
            return Err(Error::NormIncrease);
        }
        Ok((n, v))
    };
    loop {
        let u = uniform(&mut rng);
        let remaining = t - now;
        let (n_end, v_end) = norm_at(&psi, remaining)?;
        if n_end > u {
            let n = n_end.sqrt();
            psi = v_end.iter().map(|z| z / n).collect();
            break;
        }
        // bracket from the instantaneous-rate guess, then bisect
        let rate = crate::linalg::inner(&psi, &unr.decay.matvec(&psi)).re;
        let mut hi = if rate > 0.0 { (-u.ln() / rate).min(remaining) } else { remaining };
        let mut lo = 0.0;
        while norm_at(&psi, hi)?.0 > u {
            lo = hi;
            hi = (2.0 * hi).min(remaining);
        }
        while hi - lo > JUMP_TIME_RESOLUTION * hi {
            let mid = 0.5 * (lo + hi);
            if norm_at(&psi, mid)?.0 > u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = hi;
        let (_, v) = norm_at(&psi, tau)?;
        match unr.jump(&v, &mut rng) {
            Some((channel, next)) => {
                now += tau;
                if events.last().is_some_and(|e: &Jump| e.time >= now) {
                    // two jumps closer than the float resolution of `now`
                    now = f64::from_bits(events.last().unwrap().time.to_bits() + 1);
                }
                events.push(Jump { time: now, channel });
                psi = next;
            }
            None => {
                return Err(Error::InvalidParameter("norm decayed on a dark subspace; jump operators vanish".into()));
            }
        }
        if now >= t {
            break;
        }
    }
    Ok(Trajectory { events, t_final: t, seed, stream, final_state: psi })
}

/// First-order fixed-step unraveling used as a cross-check; `dt` must satisfy
/// `dt · max rate ≤ 1e-3`.
pub fn sample_trajectory_fixed_step(
    model: &QModel,
    g: f64,
    t: f64,
    chi: &[C64],
    seed: u64,
    stream: u64,
    dt: f64,
) -> Result<Trajectory> {
    check_inputs(model, t, chi)?;
    let unr = Unraveling::new(model, g)?;
    let max_rate = unr.max_rate()?;
    if !(dt > 0.0) || dt * max_rate > FIXED_STEP_BOUND {
        return Err(Error::InvalidParameter(format!(
            "fixed step {dt:e} violates dt·rate ≤ {FIXED_STEP_BOUND:e} (rate {max_rate:e})"
        )));
    }
    let step = matexp(&model.effective_hamiltonian(g)?.scale(C64::new(0.0, -dt)))?;
    let n_steps = (t / dt).ceil() as usize;
    let mut rng = stream_rng(seed, stream);
    let mut psi = chi.to_vec();
    let mut events = Vec::new();
    for k in 1..=n_steps {
        let rate = crate::linalg::inner(&psi, &unr.decay.matvec(&psi)).re;
        let p = rate * dt;
        if uniform(&mut rng) < p {
            if let Some((channel, next)) = unr.jump(&psi, &mut rng) {
                events.push(Jump { time: (k as f64 * dt).min(t), channel });
                psi = next;
                continue;
            }
        }
        let v = step.matvec(&psi);
        let n = norm2(&v);
        psi = v.iter().map(|z| z / n).collect();
    }
    Ok(Trajectory { events, t_final: t, seed, stream, final_state: psi })
}

/// Trajectories `0..n_traj` of the batch `seed`, in index order.
pub fn sample_batch(model: &QModel, g: f64, t: f64, chi: &[C64], n_traj: usize, seed: u64) -> Result<Vec<Trajectory>> {
    check_inputs(model, t, chi)?;
    if n_traj == 0 {
        return Err(Error::InvalidParameter("n_traj must be at least 1".into()));
    }
    let unr = Unraveling::new(model, g)?;
    (0..n_traj as u64)
        .into_par_iter()
        .map(|i| run_waiting_time(&unr, t, chi, seed, i))
        .collect()
}

#[derive(Debug, Clone)]
pub struct AveragedState {
    pub mean: CMat,
    /// Standard errors of the real and imaginary parts, entrywise.
    pub stderr_re: Vec<f64>,
    pub stderr_im: Vec<f64>,
    pub n_traj: usize,
}

impl AveragedState {
    /// Largest `|mean − target| / max(stderr, floor)` over real and imaginary
    /// parts of all entries.
    pub fn max_z_score(&self, target: &CMat, floor: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, (m, e)) in self.mean.as_slice().iter().zip(target.as_slice()).enumerate() {
            let zr = (m.re - e.re).abs() / self.stderr_re[k].max(floor);
            let zi = (m.im - e.im).abs() / self.stderr_im[k].max(floor);
            worst = worst.max(zr).max(zi);
        }
        worst
    }
}

/// Trajectory average of `|ψ(t)⟩⟨ψ(t)|`.
pub fn average_state(model: &QModel, g: f64, t: f64, chi: &[C64], n_traj: usize, seed: u64) -> Result<AveragedState> {
    let batch = sample_batch(model, g, t, chi, n_traj, seed)?;
    let d = model.dim();
    let n = batch.len() as f64;
    let mut sum = vec![C64::new(0.0, 0.0); d * d];
    let mut sq_re = vec![0.0; d * d];
    let mut sq_im = vec![0.0; d * d];
    for tr in &batch {
        let rho = CMatrix::outer(&tr.final_state, &tr.final_state);
        for (k, z) in rho.as_slice().iter().enumerate() {
            sum[k] += z;
            sq_re[k] += z.re * z.re;
            sq_im[k] += z.im * z.im;
        }
    }
    let mean: Vec<C64> = sum.iter().map(|z| z / n).collect();
    let se = |sq: f64, m: f64| (((sq / n - m * m).max(0.0)) * n / (n - 1.0).max(1.0) / n).sqrt();
    let stderr_re = mean.iter().zip(&sq_re).map(|(m, s)| se(*s, m.re)).collect();
    let stderr_im = mean.iter().zip(&sq_im).map(|(m, s)| se(*s, m.im)).collect();
    Ok(AveragedState { mean: CMatrix::from_col_major(d, d, mean)?, stderr_re, stderr_im, n_traj })
}

#[derive(Debug, Clone)]
pub struct CountHistogram {
    /// `counts[n]` = number of trajectories with `n` channel-1 emissions.
    pub counts: Vec<u64>,
    pub n_traj: usize,
    pub t: f64,
    pub mean: f64,
    pub variance: f64,
    /// Standard error of the sample variance.
    pub variance_stderr: f64,
    /// Kernel bandwidth used for smoothing.
    pub bandwidth: f64,
    /// Smoothed density on `0..smoothed.len()`.
    pub smoothed: Vec<f64>,
    /// Positions of local maxima of the smoothed density.
    pub maxima: Vec<usize>,
    /// Minimum between the two highest maxima over the smaller of the two.
    pub dip_ratio: Option<f64>,
    pub bimodal: bool,
}

impl CountHistogram {
    pub fn from_counts(samples: &[usize], t: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("histogram needs at least one trajectory".into()));
        }
        let n = samples.len() as f64;
        let max = *samples.iter().max().unwrap();
        let mut counts = vec![0u64; max + 1];
        for &s in samples {
            counts[s] += 1;
        }
        let mean = samples.iter().sum::<usize>() as f64 / n;
        let m2 = samples.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / n;
        let m4 = samples.iter().map(|&s| (s as f64 - mean).powi(4)).sum::<f64>() / n;
        let variance = if samples.len() > 1 { m2 * n / (n - 1.0) } else { 0.0 };
        let variance_stderr = ((m4 - m2 * m2).max(0.0) / n).sqrt();

        // Gaussian smoothing with bandwidth √mean
        let bandwidth = mean.sqrt().max(0.5);
        let len = max + (3.0 * bandwidth).ceil() as usize + 1;
        let norm = 1.0 / (n * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
        let smoothed: Vec<f64> = (0..len)
            .map(|x| {
                counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(k, &c)| c as f64 * (-0.5 * ((x as f64 - k as f64) / bandwidth).powi(2)).exp())
                    .sum::<f64>()
                    * norm
            })
            .collect();
        let maxima: Vec<usize> = (0..len)
            .filter(|&i| {
                let left = if i == 0 { f64::NEG_INFINITY } else { smoothed[i - 1] };
                let right = if i + 1 == len { f64::NEG_INFINITY } else { smoothed[i + 1] };
                smoothed[i] > left && smoothed[i] >= right
            })
            .collect();
        let dip_ratio = if maxima.len() >= 2 {
            let mut by_height = maxima.clone();
            by_height.sort_by(|a, b| smoothed[*b].total_cmp(&smoothed[*a]));
            let (a, b) = (by_height[0].min(by_height[1]), by_height[0].max(by_height[1]));
            let dip = smoothed[a..=b].iter().cloned().fold(f64::INFINITY, f64::min);
            Some(dip / smoothed[a].min(smoothed[b]))
        } else {
            None
        };
        let bimodal = dip_ratio.is_some_and(|r| r <= DIP_THRESHOLD);
        Ok(Self {
            counts,
            n_traj: samples.len(),
            t,
            mean,
            variance,
            variance_stderr,
            bandwidth,
            smoothed,
            maxima,
            dip_ratio,
            bimodal,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn mean_stderr(&self) -> f64 {
        (self.variance / self.n_traj as f64).sqrt()
    }
}

/// Histogram of channel-1 counts over trajectories `(seed, 0..n_traj)`.
pub fn count_histogram(model: &QModel, g: f64, t: f64, chi: &[C64], n_traj: usize, seed: u64) -> Result<CountHistogram> {
    let batch = sample_batch(model, g, t, chi, n_traj, seed)?;
    let samples: Vec<usize> = batch.iter().map(|tr| tr.count(1)).collect();
    CountHistogram::from_counts(&samples, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample Kolmogorov-Smirnov test against `Exp(rate)`.
pub fn ks_exponential(samples: &[f64], rate: f64) -> Result<KsResult> {
    if samples.is_empty() || !(rate > 0.0) {
        return Err(Error::InvalidParameter("KS test needs samples and a positive rate".into()));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let statistic = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = 1.0 - (-rate * v).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * statistic;
    Ok(KsResult { statistic, p_value: kolmogorov_survival(lambda), n: x.len() })
}

/// `P(K > λ)` for the Kolmogorov distribution.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activity {
    Active,
    Inactive,
}

#[derive(Debug, Clone)]
pub struct IntermittencyMetrics {
    pub window: f64,
    pub threshold: f64,
    pub window_rates: Vec<f64>,
    pub phases: Vec<Activity>,
    /// Lengths of maximal active / inactive runs, in time units.
    pub active_segments: Vec<f64>,
    pub inactive_segments: Vec<f64>,
    pub switches: usize,
    /// Mean dwell times over uncensored segments (all segments when no
    /// interior one exists).
    pub mean_active: Option<f64>,
    pub mean_inactive: Option<f64>,
    /// `1 / (1/T̄_A + 1/T̄_I)`: relaxation time of a two-state switching
    /// process with these dwell times.
    pub correlation_time: Option<f64>,
}

/// Windowed channel-1 rate thresholded at `threshold`.
pub fn intermittency_metrics(traj: &Trajectory, window: f64, threshold: f64) -> Result<IntermittencyMetrics> {
    if !(window > 0.0) {
        return Err(Error::InvalidParameter("window must be positive".into()));
    }
    if window > traj.t_final {
        return Err(Error::InvalidParameter(format!(
            "window {window} exceeds the trajectory length {}",
            traj.t_final
        )));
    }
    let n_win = (traj.t_final / window).floor() as usize;
    let mut counts = vec![0usize; n_win];
    for e in traj.events.iter().filter(|e| e.channel == 1) {
        let k = (e.time / window) as usize;
        if k < n_win {
            counts[k] += 1;
        }
    }
    let window_rates: Vec<f64> = counts.iter().map(|&c| c as f64 / window).collect();
    let phases: Vec<Activity> = window_rates
        .iter()
        .map(|&r| if r >= threshold { Activity::Active } else { Activity::Inactive })
        .collect();
    // maximal runs: (phase, length, censored)
    let mut runs: Vec<(Activity, usize, bool)> = Vec::new();
    for (i, &p) in phases.iter().enumerate() {
        match runs.last_mut() {
            Some((q, len, _)) if *q == p => *len += 1,
            _ => runs.push((p, 1, i == 0)),
        }
    }
    if let Some(last) = runs.last_mut() {
        last.2 = true;
    }
    let switches = runs.len().saturating_sub(1);
    let lengths = |which: Activity, interior_only: bool| -> Vec<f64> {
        runs.iter()
            .filter(|(p, _, c)| *p == which && !(interior_only && *c))
            .map(|(_, l, _)| *l as f64 * window)
            .collect()
    };
    let active_segments = lengths(Activity::Active, false);
    let inactive_segments = lengths(Activity::Inactive, false);
    let mean_of = |which: Activity| -> Option<f64> {
        let interior = lengths(which, true);
        let pool = if interior.is_empty() { lengths(which, false) } else { interior };
        (!pool.is_empty()).then(|| pool.iter().sum::<f64>() / pool.len() as f64)
    };
    let mean_active = mean_of(Activity::Active);
    let mean_inactive = mean_of(Activity::Inactive);
    let correlation_time = match (mean_active, mean_inactive) {
        (Some(a), Some(i)) if switches > 0 => Some(1.0 / (1.0 / a + 1.0 / i)),
        _ => None,
    };
    Ok(IntermittencyMetrics {
        window,
        threshold,
        window_rates,
        phases,
        active_segments,
        inactive_segments,
        switches,
        mean_active,
        mean_inactive,
        correlation_time,
    })
}
