use criterion::{black_box, criterion_group, criterion_main, Criterion};

use coopt::continuous_dynamics::grid_points;
use coopt::model::games;
use coopt::{
    build_grid_hamiltonian, evolve_linear, expected_return_update, expected_return_update_factorized,
    iterate_to_fixed_point, jacobi_eigen, EvolveOptions, GameModel, IterationConfig, StrategyProfile,
};
use coopt_bench::pairwise_chain;

fn expected_returns(c: &mut Criterion) {
    let model = pairwise_chain(6, 4);
    let dense = model.densified().unwrap();
    let profile = StrategyProfile::random(&model, 1);
    c.bench_function("expected returns factorized 6x4", |b| {
        b.iter(|| expected_return_update_factorized(black_box(&model), black_box(&profile)).unwrap())
    });
    c.bench_function("expected returns dense 6x4", |b| {
        b.iter(|| expected_return_update(black_box(&dense), black_box(&profile)).unwrap())
    });
}

fn fixed_point(c: &mut Criterion) {
    let pd = GameModel::validate(games::prisoners_dilemma(5.0, 3.0, 1.0, 0.0)).unwrap();
    let init = StrategyProfile::uniform(&pd);
    c.bench_function("prisoners dilemma fixed point alpha=1", |b| {
        b.iter(|| iterate_to_fixed_point(&pd, &IterationConfig::new(1.0), black_box(&init)).unwrap())
    });
}

fn harmonic_oscillator(c: &mut Criterion) {
    let xs = grid_points(-8.0, 8.0, 201);
    let v: Vec<f64> = xs.iter().map(|x| 0.5 * x * x).collect();
    let h = build_grid_hamiltonian(-8.0, 8.0, 201, &v).unwrap();
    let mut group = c.benchmark_group("harmonic oscillator 201");
    group.sample_size(10);
    group.bench_function("jacobi", |b| b.iter(|| jacobi_eigen(black_box(&h)).unwrap()));
    let psi0 = vec![1.0 / (201f64).sqrt(); 201];
    let opts = EvolveOptions { dt: Some(0.9 / h.gershgorin_radius()), ..Default::default() };
    group.bench_function("imaginary time evolution", |b| {
        b.iter(|| evolve_linear(black_box(&h), &psi0, &opts).unwrap())
    });
    group.finish();
}

criterion_group!(benches, expected_returns, fixed_point, harmonic_oscillator);
criterion_main!(benches);
