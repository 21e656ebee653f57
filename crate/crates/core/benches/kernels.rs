use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dptqfi::lindblad::build_liouvillian;
use dptqfi::linalg::{matexp, spectrum};
use dptqfi::models::random_model;

fn kernels(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("superoperator");
    for d in [2usize, 3, 4] {
        let m = random_model(&mut rng, d, 2).unwrap();
        let l = build_liouvillian(&m, 0.1).unwrap().into_matrix();
        let lt = l.scale_re(5.0);
        group.bench_with_input(BenchmarkId::new("matexp", d), &lt, |b, a| b.iter(|| matexp(black_box(a)).unwrap()));
        group.bench_with_input(BenchmarkId::new("spectrum", d), &l, |b, a| b.iter(|| spectrum(black_box(a)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
