use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use dptqfi::counting::{cat_amplitude, cat_wigner, GridSpec};

/// Dominant angular frequency of `samples` (spacing `dx`), refined by a
/// parabola through the peak bin.
fn dominant_wavenumber(samples: &[f64], dx: f64) -> f64 {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power: Vec<f64> = buf[..n / 2].iter().map(|z| z.norm_sqr()).collect();
    let k = (1..n / 2 - 1).max_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap();
    let (l, c, r) = (power[k - 1], power[k], power[k + 1]);
    let shift = 0.5 * (l - r) / (l - 2.0 * c + r);
    2.0 * std::f64::consts::PI * (k as f64 + shift) / (n as f64 * dx)
}

#[test]
fn fringe_wavenumber_tracks_amplitude_separation() {
    let (mu_a, mu_i, t) = (1.0, 0.1, 25.0);
    let (aa, ai) = (cat_amplitude(mu_a, t, 0.0), cat_amplitude(mu_i, t, 0.0));
    let centre = std::f64::consts::SQRT_2 * 0.5 * (aa.re + ai.re);
    let n = 2048;
    let grid = GridSpec { q_min: centre - 0.01, q_max: centre + 0.01, nq: 3, p_min: -20.0, p_max: 20.0, np: n };
    let w = cat_wigner(0.5, 0.5, mu_i, mu_a, t, 0.0, &grid).unwrap();
    let dp = w.p[1] - w.p[0];
    let k = dominant_wavenumber(&w.values[1], dp);
    // interference term oscillates as cos(√2 |α_A − α_I| P)
    let expect = std::f64::consts::SQRT_2 * (aa - ai).norm();
    assert!((k - expect).abs() <= 0.05 * expect, "k = {k}, expected {expect}");
    let sep = (2.0 * t).sqrt() * (mu_a.sqrt() - mu_i.sqrt());
    assert!((expect - sep).abs() < 1e-12);
}

#[test]
fn cat_state_is_normalized_and_has_negative_fringes() {
    let w = cat_wigner(0.5, 0.5, 0.1, 1.0, 16.0, 0.0, &GridSpec::square(10.0, 281)).unwrap();
    assert!((w.integral() - 1.0).abs() < 1e-3, "{}", w.integral());
    let min = w.values.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    assert!(min < -0.05);
}

#[test]
fn equal_rates_give_a_single_coherent_peak() {
    let w = cat_wigner(0.3, 0.7, 0.5, 0.5, 6.0, 1.1, &GridSpec::square(8.0, 161)).unwrap();
    assert!(w.values.iter().flatten().all(|&v| v >= -1e-12));
    assert!((w.integral() - 1.0).abs() < 1e-3);
}
