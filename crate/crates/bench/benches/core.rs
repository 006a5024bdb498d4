use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use icse_bench::{random_qp, study_problem};
use icse_core::orthant::{self, StandardDraws};
use icse_core::shrinkage::{self, IcseConfig};
use icse_core::{solve_qp, Matrix, Vector};

fn qp(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_qp");
    for (m, p) in [(2, 2), (5, 4), (8, 8), (13, 10)] {
        let (problem, cons) = random_qp(m, p, 7);
        group.bench_with_input(BenchmarkId::from_parameter(format!("m{m}_p{p}")), &(), |b, _| {
            b.iter(|| solve_qp(&problem, &cons).unwrap())
        });
    }
    group.finish();
}

fn orthant_masks(c: &mut Criterion) {
    let mut group = c.benchmark_group("orthant_100k");
    group.sample_size(10);
    for p in [3, 5, 10] {
        let cov = Matrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.3 });
        let mean = Vector::from_fn(p, |i, _| 0.1 * i as f64 - 0.2);
        let draws = StandardDraws::new(1, &[], 100_000, p);
        group.bench_with_input(BenchmarkId::from_parameter(p), &(), |b, _| {
            b.iter(|| orthant::mask_probabilities(&mean, &cov, &draws).unwrap())
        });
    }
    group.finish();
}

fn icse(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_icse");
    group.sample_size(10);
    for k1 in [5, 10] {
        let (problem, cons) = study_problem(k1, -0.2);
        let cfg = IcseConfig::default();
        group.bench_with_input(BenchmarkId::from_parameter(format!("k1_{k1}")), &(), |b, _| {
            b.iter(|| shrinkage::fit_icse(&problem, &cons, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, qp, orthant_masks, icse);
criterion_main!(benches);
