use asymfilter_bench::cubic_fixture;
use asymfilter_core::expansion::{
    build_j_terms, derive_closure, wick_moment, AsymptoticFilter, ExpansionLimits,
};
use asymfilter_core::linear::{kalman_bucy, rts_smooth, solve_gamma};
use asymfilter_core::nalgebra::DMatrix;
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn linear(c: &mut Criterion) {
    let (model, grid, path) = cubic_fixture(100.0, 0.01);
    let lin = model.linear_part(grid).unwrap();
    c.bench_function("riccati_10k_steps", |b| {
        b.iter(|| solve_gamma(black_box(&lin)).unwrap())
    });
    let gamma = solve_gamma(&lin).unwrap();
    c.bench_function("kalman_bucy_10k_steps", |b| {
        b.iter(|| kalman_bucy(black_box(&lin), &gamma, &path.y).unwrap())
    });
    let f = kalman_bucy(&lin, &gamma, &path.y).unwrap();
    c.bench_function("rts_10k_steps", |b| {
        b.iter(|| rts_smooth(black_box(&lin), &f, grid.n_steps()).unwrap())
    });
}

fn expansion(c: &mut Criterion) {
    let limits = ExpansionLimits::default();
    let (model, grid, path) = cubic_fixture(10.0, 0.01);
    let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 2.0, 0.2, 0.1, 0.2, 0.5]);
    c.bench_function("wick_degree_10", |b| {
        b.iter(|| wick_moment(black_box(&[0.1, -0.2, 0.3]), &cov, &[4, 3, 3]).unwrap())
    });
    c.bench_function("cubic_order2_closure", |b| {
        b.iter(|| {
            let j = build_j_terms(black_box(&model.g), 2, &limits).unwrap();
            derive_closure(j.all(), &limits).unwrap()
        })
    });
    let filter = AsymptoticFilter::new(&model, grid, 2, &limits).unwrap();
    let dy = path.dy();
    c.bench_function("cubic_order2_filter_1k_steps", |b| {
        b.iter(|| filter.coefficients(black_box(&dy)).unwrap())
    });
}

criterion_group!(benches, linear, expansion);
criterion_main!(benches);
