use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fedelastic_core::data::make_synthetic;
use fedelastic_core::meter::{empirical_entropy, threshold, DEFAULT_BIN};
use fedelastic_core::model::{self, ModelSpec};
use fedelastic_core::seed::{stream, Purpose};
use fedelastic_core::solver::{solve_local, LocalProblem, LocalVariant, SolveBudget};

fn mlp_gradient(c: &mut Criterion) {
    let spec = ModelSpec::mlp(784, vec![200, 100], 10);
    let data = make_synthetic(10, 784, 50, 1.0, 1).unwrap();
    let theta = spec.init_params(&mut stream(1, Purpose::Init, 0, 0));
    c.bench_function("mlp_grad_784x200x100_batch50", |b| {
        b.iter(|| model::grad(&spec, black_box(&theta), &data).unwrap())
    });
}

fn metering(c: &mut Criterion) {
    let spec = ModelSpec::mnist_mlp();
    let delta: Vec<f64> = spec
        .init_params(&mut stream(2, Purpose::Init, 0, 0))
        .iter()
        .map(|v| 0.05 * v)
        .collect();
    c.bench_function("threshold_mnist_mlp", |b| b.iter(|| threshold(black_box(&delta), 1e-3)));
    c.bench_function("entropy_mnist_mlp", |b| {
        b.iter(|| empirical_entropy(black_box(&delta), DEFAULT_BIN).unwrap())
    });
}

fn local_solve(c: &mut Criterion) {
    let spec = ModelSpec::logistic(20, 5);
    let data = make_synthetic(5, 20, 600, 1.0, 3).unwrap();
    let anchor = vec![0.0; spec.param_count()];
    let cache = vec![0.01; spec.param_count()];
    let problem = LocalProblem {
        spec: &spec,
        data: &data,
        anchor: &anchor,
        lambda1: 1e-4,
        lambda2: 0.05,
        variant: LocalVariant::FedDyn { grad_cache: &cache },
    };
    let budget = SolveBudget::new(5, 10, 0.1);
    c.bench_function("local_solve_logistic_600x5_epochs", |b| {
        b.iter(|| solve_local(&problem, &budget, &mut stream(4, Purpose::LocalSolve, 1, 0)).unwrap())
    });
}

criterion_group!(benches, mlp_gradient, metering, local_solve);
criterion_main!(benches);
