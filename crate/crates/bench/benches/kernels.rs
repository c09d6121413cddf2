use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use fracperc_core::connectivity::{label_cells, set_crosses};
use fracperc_core::estimators::{enumerate_exact, minimal_crossing_k, site_threshold, ExactModel};
use fracperc_core::goodness::{check_nu_good, good_probability};
use fracperc_core::models::{sample_fat, sample_k, sample_mfp};
use fracperc_core::RetentionSchedule;

fn sampling(c: &mut Criterion) {
    c.bench_function("sample mfp N=3 n=5 p=0.8", |b| b.iter(|| sample_mfp(0.8, 3, 2, 5, black_box(7)).unwrap()));
    c.bench_function("sample k N=4 n=4 k=13", |b| b.iter(|| sample_k(13, 4, 2, 4, black_box(7)).unwrap()));
    let sched = RetentionSchedule::geometric_complement(0.5, 0.5);
    c.bench_function("sample fat N=2 n=8", |b| b.iter(|| sample_fat(&sched, 2, 2, 8, black_box(7)).unwrap()));
}

fn connectivity(c: &mut Criterion) {
    let g = sample_mfp(0.85, 3, 2, 5, 11).unwrap();
    c.bench_function("label clusters 243x243", |b| b.iter(|| label_cells(black_box(g.cells()))));
    c.bench_function("crossing 243x243", |b| b.iter(|| set_crosses(black_box(g.cells()), 0)));
    c.bench_function("site threshold M=128", |b| b.iter(|| site_threshold(2, 128, black_box(3))));
}

fn analysis(c: &mut Criterion) {
    c.bench_function("minimal crossing k N=4 n=4", |b| b.iter(|| minimal_crossing_k(4, 2, 4, black_box(5)).unwrap()));
    let g = sample_k(7, 3, 2, 4, 2).unwrap();
    c.bench_function("nu-good N=3 n=4 k=7", |b| b.iter(|| check_nu_good(black_box(&g), 1).unwrap()));
    c.bench_function("good recursion m=20", |b| b.iter(|| good_probability(black_box(0.8), 2, 2, 2, 20).unwrap()));
    c.bench_function("enumerate k=3 N=2 n=2", |b| {
        b.iter(|| enumerate_exact(black_box(&ExactModel::K(3)), 2, 2, 2).unwrap())
    });
}

criterion_group!(benches, sampling, connectivity, analysis);
criterion_main!(benches);
