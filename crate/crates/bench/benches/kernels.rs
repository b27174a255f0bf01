use std::hint::black_box;

use advmanifold::attack::{brute_force_oracle, OracleMode};
use advmanifold::attack::PenalizedAttack;
use advmanifold::risk::{excess_risk_mc, AttackSpec};
use advmanifold::shift::{simulate_minmax, MinmaxConfig};
use advmanifold::spectral::eigh_sym;
use advmanifold::{Budget, GaussianModel, Matrix, ShiftMode, Strategy, Vector};
use criterion::{criterion_group, criterion_main, Criterion};

fn spd(d: usize) -> Matrix {
    let g = Matrix::from_fn(d, d, |i, j| ((i * 13 + j * 7) as f64 * 0.37).sin());
    &g * g.transpose() + Matrix::identity(d, d) * 0.1
}

fn spectral(c: &mut Criterion) {
    for d in [10, 50, 200] {
        let m = spd(d);
        c.bench_function(&format!("eigh_sym d={d}"), |b| b.iter(|| eigh_sym(black_box(&m)).unwrap()));
    }
}

fn attack(c: &mut Criterion) {
    let d = 20;
    let theta = GaussianModel::new(Vector::zeros(d), spd(d)).unwrap();
    let map = theta.decomposition().eigenvectors().columns(0, 5).into_owned();
    let problem = PenalizedAttack::new(&theta, &map).unwrap();
    let x = Vector::from_fn(d, |i, _| (i as f64 * 0.3).cos());
    c.bench_function("solve_multiplier d=20 q=5", |b| b.iter(|| problem.solve_multiplier(black_box(&x), 0.5).unwrap()));

    let small = GaussianModel::new(Vector::zeros(3), spd(3)).unwrap();
    let map3 = Matrix::identity(3, 3);
    let x3 = Vector::from_vec(vec![1.0, -0.5, 0.25]);
    c.bench_function("grid oracle d=3", |b| {
        b.iter(|| brute_force_oracle(&small, &map3, black_box(&x3), 0.5, OracleMode::Grid { points_per_axis: 41 }).unwrap())
    });
}

fn monte_carlo(c: &mut Criterion) {
    let theta = GaussianModel::new(Vector::zeros(3), Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 1.0, 0.0]))).unwrap();
    let spec = AttackSpec::Generative { q: 2, strategy: Strategy::One, multiplier: 3.0 };
    let mut group = c.benchmark_group("excess_risk_mc");
    group.sample_size(10);
    group.bench_function("n=100k rank-2", |b| b.iter(|| excess_risk_mc(&theta, spec, black_box(100_000), 3).unwrap()));
    group.finish();
}

fn minmax(c: &mut Criterion) {
    let theta = GaussianModel::new(Vector::zeros(10), spd(10)).unwrap();
    let config = MinmaxConfig {
        mode: ShiftMode::Eigenspace,
        q: 5,
        budget: Budget::Multiplier(20.0),
        tol: 1e-10,
        max_iter: 10_000,
    };
    c.bench_function("simulate_minmax d=10 q=5", |b| b.iter(|| simulate_minmax(black_box(&theta), &config).unwrap()));
}

criterion_group!(benches, spectral, attack, monte_carlo, minmax);
criterion_main!(benches);
