use criterion::{criterion_group, criterion_main, Criterion};
use robust_auction::orderstat::{consistent_iid, h_inverse};
use robust_auction::revenue::{mc_expected_revenue, spa_expected_revenue};
use robust_auction::{AmbiguitySpec, Dist, Mechanism, ProductDist, TieBreak};
use std::hint::black_box;

fn bench_inversion(c: &mut Criterion) {
    c.bench_function("h_inverse n=10 k=2", |b| b.iter(|| h_inverse(10, 2, black_box(0.37)).unwrap()));
    let spec = AmbiguitySpec::new(4, 2, Dist::exponential(1.0, 4096).unwrap()).unwrap();
    c.bench_function("consistent_iid exp(1) n=4", |b| b.iter(|| consistent_iid(black_box(&spec))));
}

fn bench_revenue(c: &mut Criterion) {
    let pd = ProductDist::iid(Dist::uniform(0.0, 1.0).unwrap(), 5).unwrap();
    c.bench_function("spa closed form uniform n=5", |b| b.iter(|| spa_expected_revenue(black_box(0.4), &pd)));
    let fd = Dist::two_point(1.0, 0.8, 2.0).unwrap();
    let m = Mechanism::myerson(fd.clone(), TieBreak::Uniform);
    let pd3 = ProductDist::iid(fd, 3).unwrap();
    c.bench_function("myerson monte carlo 1e4", |b| b.iter(|| mc_expected_revenue(&m, &pd3, 10_000, black_box(1)).unwrap()));
}

criterion_group!(benches, bench_inversion, bench_revenue);
criterion_main!(benches);
