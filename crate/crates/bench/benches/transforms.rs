use std::hint::black_box;

use bifree::idlaw::{make_compound_poisson, Ray};
use bifree::limits::{self, iid_array};
use bifree::stable::{self, StableSpec};
use bifree::transforms::{self, linspace};
use bifree::{bi_free_convolve, free_convolve, probes, Axis, PlanarMeasure, Term, TruncatedCone, Vec2};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn two_atom() -> PlanarMeasure {
    PlanarMeasure::new(vec![(Vec2::new(1.0, 1.0), 0.5), (Vec2::new(-1.0, -1.0), 0.5)]).unwrap()
}

fn spread(atoms: usize) -> PlanarMeasure {
    let pts = (0..atoms)
        .map(|k| {
            let a = k as f64 * 2.399963;
            (Vec2::new(a.cos(), (1.7 * a).sin()), 1.0)
        })
        .collect();
    PlanarMeasure::normalized(pts).unwrap()
}

fn point_transforms(c: &mut Criterion) {
    let mut g = c.benchmark_group("point");
    let probes = probes::tensor(4.0);
    for atoms in [2usize, 16, 128] {
        let mu = spread(atoms);
        let cone = TruncatedCone::for_planar(&mu);
        g.bench_with_input(BenchmarkId::new("cauchy2d", atoms), &mu, |b, mu| {
            b.iter(|| probes.iter().map(|p| transforms::cauchy2d(mu, *p).unwrap()).sum::<bifree::Complex64>())
        });
        g.bench_with_input(BenchmarkId::new("bi_free_phi", atoms), &mu, |b, mu| {
            b.iter(|| {
                probes
                    .iter()
                    .map(|p| transforms::bi_free_phi(mu, *p, &cone).unwrap())
                    .sum::<bifree::Complex64>()
            })
        });
    }
    let jump = two_atom();
    let poisson = make_compound_poisson(1.0, &jump).unwrap();
    g.bench_function("triplet_phi/atomic", |b| {
        b.iter(|| probes.iter().map(|p| poisson.bi_free_phi(*p).unwrap()).sum::<bifree::Complex64>())
    });
    let radial = stable::stable_triplet(&StableSpec::radial(1.5, StableSpec::uniform_rays(8, 0.125), Vec2::ZERO)).unwrap();
    g.bench_function("triplet_phi/radial", |b| {
        b.iter(|| probes.iter().map(|p| radial.bi_free_phi(*p).unwrap()).sum::<bifree::Complex64>())
    });
    g.finish();
}

fn densities(c: &mut Criterion) {
    let mut g = c.benchmark_group("density");
    g.sample_size(10);
    let mu = two_atom();
    let line = free_convolve(mu.marginal(Axis::S), mu.marginal(Axis::S));
    let axis = linspace(-4.0, 4.0, 801);
    g.bench_function("free_marginal/801", |b| b.iter(|| line.density(black_box(&axis), 0.05).unwrap()));
    let rep = bi_free_convolve(vec![Term::Measure(mu.clone()), Term::Measure(mu)], Vec2::ZERO).unwrap();
    for n in [32usize, 64] {
        let s = linspace(-4.0, 4.0, n);
        g.bench_with_input(BenchmarkId::new("bi_free_grid", n), &s, |b, s| {
            b.iter(|| rep.density(s, s, 0.05).unwrap())
        });
    }
    g.finish();
}

fn pipelines(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    let clt = iid_array(&two_atom(), |k| 1.0 / (k as f64).sqrt(), &[64, 256, 1024, 4096]).unwrap();
    g.bench_function("condition_report/clt", |b| b.iter(|| limits::condition_report(black_box(&clt)).unwrap()));
    let spec = StableSpec::radial(
        1.0,
        vec![Ray { angle: 0.0, m: 0.5 }, Ray { angle: std::f64::consts::PI, m: 0.5 }],
        Vec2::ZERO,
    );
    let pr = probes::tensor(1.0);
    g.bench_function("check_stability/alpha1", |b| {
        b.iter(|| stable::check_stability(&spec, 1.0, 2.0, black_box(&pr)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, point_transforms, densities, pipelines);
criterion_main!(benches);
