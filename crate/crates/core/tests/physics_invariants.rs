use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dptqfi::counting::{cgf, cumulants, qfi_variance4, theta_asymptotic};
use dptqfi::lindblad::{build_liouvillian, stationary_state, OperatorFamily, QModel};
use dptqfi::linalg::{matexp, CMatrix};
use dptqfi::models::{builtin, random_model, random_state, Builtin, BUILTIN_NAMES};
use dptqfi::qfi::{qfi_curve, qfi_fd, qfi_spectral_finite, QfiMethod, StencilConfig};
use dptqfi::spectral::{metastable_split, timescales};
use dptqfi::{CMat, C64};

fn non_degenerate() -> Vec<Builtin> {
    ["poisson", "damping", "rabi", "threelevel"].iter().map(|n| Builtin::default_for(n).unwrap()).collect()
}

fn rate(model: &QModel) -> f64 {
    let rho = stationary_state(&build_liouvillian(model, 0.0).unwrap()).unwrap();
    let l = model.channel(1, 0.0).unwrap();
    (&(&l.adjoint() * &l) * &rho).trace().re
}

#[test]
fn builtins_preserve_trace_and_positivity() {
    for name in BUILTIN_NAMES {
        let b = Builtin::default_for(name).unwrap();
        let m = builtin(b).unwrap();
        let l = build_liouvillian(&m, 0.0).unwrap();
        let rho0 = dptqfi::lindblad::pure_density(&b.default_chi());
        for t in [0.1, 1.0, 10.0] {
            let rho = dptqfi::lindblad::evolve(&l, &rho0, t).unwrap();
            assert!((rho.trace() - 1.0).norm() < 1e-9, "{name}");
            assert!(dptqfi::lindblad::min_eigenvalue(&rho).unwrap() >= -1e-8, "{name}");
            assert!(rho.hermitian_deviation() < 1e-10, "{name}");
        }
    }
}

#[test]
fn fd_and_spectral_agree_on_builtins() {
    let cfg = StencilConfig::default();
    for b in non_degenerate() {
        let m = builtin(b).unwrap();
        let chi = b.default_chi();
        for t in [0.5, 5.0, 50.0] {
            let fd = qfi_fd(&m, 0.0, t, &chi, &cfg).unwrap().value;
            let sp = qfi_spectral_finite(&m, 0.0, t, &chi, &cfg).unwrap().value;
            assert!((fd - sp).abs() <= 1e-3 * fd.abs().max(1e-12), "{} t={t}: {fd} vs {sp}", b.name());
        }
    }
}

#[test]
fn phase_qfi_is_four_times_count_variance() {
    let cfg = StencilConfig::default();
    for b in non_degenerate() {
        let m = builtin(b).unwrap();
        let chi = b.default_chi();
        for t in [0.5, 5.0] {
            let fd = qfi_fd(&m, 0.0, t, &chi, &cfg).unwrap().value;
            let v4 = qfi_variance4(&m, 0.0, t, &chi, &cfg).unwrap().value;
            assert!((fd - v4).abs() <= 1e-3 * fd.abs().max(1e-9), "{} t={t}: {fd} vs {v4}", b.name());
        }
    }
}

#[test]
fn information_is_non_decreasing() {
    let cfg = StencilConfig::default();
    let ts = dptqfi::qfi::log_grid(0.1, 100.0, 15);
    for b in non_degenerate() {
        let m = builtin(b).unwrap();
        let curve = qfi_curve(&m, 0.0, &ts, &b.default_chi(), &cfg, QfiMethod::Fd).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].value >= w[0].value - 1e-6 * w[0].value.max(1.0), "{}", b.name());
        }
    }
}

#[test]
fn finite_time_cgf_approaches_theta() {
    for name in ["rabi", "threelevel"] {
        let b = Builtin::default_for(name).unwrap();
        let m = builtin(b).unwrap();
        let ts = timescales(&build_liouvillian(&m, 0.0).unwrap().spectrum().unwrap()).unwrap();
        let t = 100.0 * ts.tau;
        // threelevel is close to a transition, where θ(s > 0) is O(1/t)
        // small and the prefactor dominates
        for s in [-0.5, 0.3].into_iter().filter(|_| name == "rabi") {
            let finite = cgf(&m, 0.0, s, t, &b.default_chi()).unwrap().re / t;
            let asym = theta_asymptotic(&m, 0.0, s).unwrap().value;
            assert!((finite - asym).abs() <= 0.01 * asym.abs().max(1e-12) + 1e-12, "{name} s={s}: {finite} vs {asym} at t={t}");
        }
        // κ₁(t) = rate·t − Tr{L†L · L⁺ρ₀} + O(e^{−t/τ}) from a pure start
        let chi = b.default_chi();
        let k = cumulants(&m, 0.0, t, &chi, 1, &StencilConfig::default()).unwrap();
        let dec = build_liouvillian(&m, 0.0).unwrap().spectrum().unwrap();
        let pinv = dec.restricted_function(|z: C64| z.inv(), &[0]).unwrap();
        let lc = m.channel(1, 0.0).unwrap();
        let rho0 = CMatrix::outer(&chi, &chi).vec();
        let offset = -(&(&lc.adjoint() * &lc) * &CMatrix::devec(&pinv.matvec(&rho0)).unwrap()).trace().re;
        let corrected = (k[0] - offset) / t;
        assert!((corrected - rate(&m)).abs() <= 1e-6 * rate(&m).max(1.0), "{name}: {corrected} vs {}", rate(&m));
    }
}

#[test]
fn random_models_pass_self_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..20 {
        let m = random_model(&mut rng, 2 + i % 3, 1 + i % 2).unwrap();
        let psi = random_state(&mut rng, m.dim());
        let f = dptqfi::qfi::fidelity(&m, 0.4, 0.4, 3.0, &psi).unwrap();
        assert!((f - 1.0).norm() < 1e-9);
    }
}

fn unitary(rng: &mut ChaCha8Rng, d: usize) -> CMat {
    let m = random_model(rng, d, 1).unwrap();
    matexp(&m.hamiltonian(0.0).unwrap().scale(C64::new(0.0, 1.0))).unwrap()
}

#[test]
fn timescales_are_unitarily_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let m = random_model(&mut rng, 3, 2).unwrap();
        let u = unitary(&mut rng, 3);
        let rot = |a: &CMat| &(&u * a) * &u.adjoint();
        let h = OperatorFamily::constant(rot(&m.hamiltonian(0.0).unwrap())).unwrap();
        let jumps = m.jumps(0.0).iter().map(|l| OperatorFamily::constant(rot(l)).unwrap()).collect();
        let mr = QModel::new(h, jumps, None).unwrap();
        let a = timescales(&build_liouvillian(&m, 0.0).unwrap().spectrum().unwrap()).unwrap();
        let b = timescales(&build_liouvillian(&mr, 0.0).unwrap().spectrum().unwrap()).unwrap();
        assert!((a.lambda2 - b.lambda2).norm() < 1e-8 && (a.lambda3 - b.lambda3).norm() < 1e-8);
        assert!((a.tau - b.tau).abs() < 1e-8 * a.tau && (a.tau_prime - b.tau_prime).abs() < 1e-8 * a.tau_prime);
    }
}

/// `H = H_A ⊕ H_I`, `L = L_A ⊕ L_I` with a 2-level bright block and a
/// 1-level dim block.
#[test]
fn block_diagonal_split_recovers_blocks() {
    let z = C64::new(0.0, 0.0);
    let r = |x: f64| C64::new(x, 0.0);
    let h = CMatrix::from_rows(&[vec![z, r(0.8), z], vec![r(0.8), z, z], vec![z, z, z]]).unwrap();
    let l = CMatrix::from_rows(&[vec![z, r(1.2), z], vec![z, z, z], vec![z, z, r(0.3)]]).unwrap();
    let m = QModel::new(
        OperatorFamily::constant(h.clone()).unwrap(),
        vec![OperatorFamily::constant(l.clone()).unwrap()],
        Some(1),
    )
    .unwrap();
    let chi = [r(0.6), z, r(0.8)];
    let dec = build_liouvillian(&m, 0.0).unwrap().spectrum().unwrap();
    let s = metastable_split(&dec, &chi, 1, &m, 0.0).unwrap();
    let mut pa = CMatrix::zeros(3, 3);
    pa[(0, 0)] = r(1.0);
    pa[(1, 1)] = r(1.0);
    let mut pi = CMatrix::zeros(3, 3);
    pi[(2, 2)] = r(1.0);
    assert!(s.projector_a.dist(&pa) < 1e-9 && s.projector_i.dist(&pi) < 1e-9);
    // per-block stationary states computed on their own
    let sub = |a: &CMat| CMatrix::from_fn(2, 2, |i, j| a[(i, j)]);
    let block = QModel::new(
        OperatorFamily::constant(sub(&h)).unwrap(),
        vec![OperatorFamily::constant(sub(&l)).unwrap()],
        None,
    )
    .unwrap();
    let mu_block = rate(&block);
    assert!((s.mu_a - mu_block).abs() < 1e-9, "{} vs {mu_block}", s.mu_a);
    assert!((s.mu_i - 0.09).abs() < 1e-9);
    assert!((s.p_a - 0.36).abs() < 1e-9 && (s.p_i - 0.64).abs() < 1e-9);
}
