use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use cocycle_core::cocycle::{Coboundary, MatrixCocycle};
use cocycle_core::density::{theorem1_exceptional_set, Theorem1Options};
use cocycle_core::met::{lyapunov_spectrum_qr, QrOptions};
use cocycle_core::{FiberPoint, SuspensionFlow};

fn evolve(c: &mut Criterion) {
    let flow = SuspensionFlow::golden_sine();
    let x = FiberPoint::new(0.3, 0.45);
    c.bench_function("evolve t=1e4", |b| b.iter(|| flow.evolve(black_box(x), black_box(1e4)).unwrap()));
}

fn matrix(c: &mut Criterion) {
    let a = MatrixCocycle::random_sl2(SuspensionFlow::golden_sine(), 2, 8).unwrap();
    let x = FiberPoint::new(0.3, 0.45);
    c.bench_function("graded product t=1e3", |b| b.iter(|| a.graded(black_box(1e3), x).unwrap()));
    c.bench_function("qr spectrum t=1e3", |b| {
        b.iter(|| lyapunov_spectrum_qr(&a, x, black_box(1e3), QrOptions::default()).unwrap())
    });
}

fn scan(c: &mut Criterion) {
    let cob = Coboundary::example1();
    let x = FiberPoint::new(0.3, 0.45);
    let mut g = c.benchmark_group("exceptional");
    g.sample_size(10);
    g.bench_function("theorem1 set H=100", |b| {
        b.iter(|| theorem1_exceptional_set(&cob, x, None, black_box(100.0), Theorem1Options::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, evolve, matrix, scan);
criterion_main!(benches);
