use num_complex::Complex;
use proptest::prelude::*;

use dptqfi::linalg::{eigh, matexp, spectrum, CMatrix};
use dptqfi::{CMat, C64};

fn matrix(n: usize, scale: f64) -> impl Strategy<Value = CMat> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
        CMatrix::from_col_major(n, n, v.into_iter().map(|(a, b)| C64::new(a, b) * scale).collect()).unwrap()
    })
}

fn unitary(a: &CMat) -> CMat {
    // exp of an anti-Hermitian matrix
    let h = a.hermitian_part();
    matexp(&h.scale(C64::new(0.0, 1.0))).unwrap()
}

fn sorted(mut v: Vec<C64>) -> Vec<C64> {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expm_matches_spectral_sum(a in (2usize..=6).prop_flat_map(|n| matrix(n, 1.5))) {
        let d = spectrum(&a).unwrap();
        prop_assume!(!d.is_defective());
        let via = d.restricted_function(|z: C64| z.exp(), &[]).unwrap();
        let direct = matexp(&a).unwrap();
        prop_assert!(via.dist(&direct) <= 1e-7 * direct.norm_fro());
    }

    #[test]
    fn expm_inverse_pair(a in (1usize..=5).prop_flat_map(|n| matrix(n, 2.0))) {
        let a = a.scale_re(10.0f64.min(10.0 / a.norm_fro().max(1e-12)));
        let p = &matexp(&a).unwrap() * &matexp(&a.scale_re(-1.0)).unwrap();
        prop_assert!(p.dist(&CMatrix::identity(a.rows())) <= 1e-10 * p.norm_fro().max(1.0));
    }

    #[test]
    fn spectrum_is_similarity_invariant(
        (a, u) in (2usize..=6).prop_flat_map(|n| (matrix(n, 1.0), matrix(n, 2.0)))
    ) {
        let q = unitary(&u);
        let b = &(&q * &a) * &q.adjoint();
        let ea = sorted(spectrum(&a).unwrap().eigenvalues().to_vec());
        let eb = sorted(spectrum(&b).unwrap().eigenvalues().to_vec());
        let gap = ea.iter().zip(&eb).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(gap < 1e-8, "gap {gap}");
    }

    #[test]
    fn decomposition_invariants(a in (1usize..=8).prop_flat_map(|n| matrix(n, 1.0))) {
        let d = spectrum(&a).unwrap();
        let n = a.rows();
        let sum: C64 = d.eigenvalues().iter().sum();
        prop_assert!((sum - a.trace()).norm() <= 1e-8 * a.norm_fro().max(1.0));
        for w in d.eigenvalues().windows(2) {
            prop_assert!(w[0].re >= w[1].re - d.group_tol());
        }
        for j in 0..n {
            for k in 0..n {
                if j != k && d.group_of(j).is_some_and(|g| g.contains(&k)) {
                    continue;
                }
                let ov = dptqfi::linalg::inner(&d.left_vector(j), d.right_vector(k));
                let target = if j == k { 1.0 } else { 0.0 };
                prop_assert!((ov - target).norm() <= 1e-8);
            }
        }
        if !d.is_defective() {
            prop_assert!(d.reconstruct().unwrap().dist(&a) <= 1e-7 * a.norm_fro().max(1.0));
        }
    }

    #[test]
    fn hermitian_eigh_reconstructs(a in (1usize..=6).prop_flat_map(|n| matrix(n, 1.0))) {
        let h = a.hermitian_part();
        let (vals, vecs) = eigh(&h).unwrap();
        let diag: Vec<C64> = vals.iter().map(|&v| C64::new(v, 0.0)).collect();
        let back = &(&vecs * &CMatrix::diag(&diag)) * &vecs.adjoint();
        prop_assert!(back.dist(&h) <= 1e-10 * h.norm_fro().max(1.0));
        prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn single_precision_instantiation() {
    let a: CMatrix<f32> = CMatrix::from_rows(&[
        vec![Complex::new(1.0f32, 0.0), Complex::new(2.0, 0.0)],
        vec![Complex::new(0.0, 0.0), Complex::new(-1.0, 0.0)],
    ])
    .unwrap();
    let ev = spectrum(&a).unwrap();
    assert!((ev.eigenvalue(0) - Complex::new(1.0f32, 0.0)).norm() < 1e-5);
    assert!((ev.eigenvalue(1) - Complex::new(-1.0f32, 0.0)).norm() < 1e-5);
    let e = matexp(&a).unwrap();
    assert!((e[(0, 0)].re - 1.0f32.exp()).abs() < 1e-5);
}

#[test]
fn diagonal_and_nilpotent_exponentials() {
    let d = CMatrix::diag(&[C64::new(1.0, 2.0), C64::new(-3.0, 0.0)]);
    let e = matexp(&d).unwrap();
    assert!((e[(0, 0)] - C64::new(1.0, 2.0).exp()).norm() < 1e-14);
    assert!((e[(1, 1)].re - (-3.0f64).exp()).abs() < 1e-15);
    let n = CMatrix::from_rows(&[
        vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
    ])
    .unwrap();
    let en = matexp(&n).unwrap();
    assert!((en[(0, 1)].re - 1.0).abs() < 1e-15 && (en[(0, 0)].re - 1.0).abs() < 1e-15);
}
