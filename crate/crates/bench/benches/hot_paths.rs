use consensus_kit_bench::{balanced_problem, balanced_system, complete_graph, cycle_graph};
use consensus_kit_core::{
    chromatic_polynomial_at, classify_edges, count_regions_repulsive, min_energy_coefficients,
    SimConfig,
};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn region_counting(c: &mut Criterion) {
    let mut group = c.benchmark_group("regions");
    for n in [5, 6, 7] {
        let g = complete_graph(n);
        group.bench_with_input(BenchmarkId::new("complete", n), &g, |b, g| {
            b.iter(|| count_regions_repulsive(black_box(g)).unwrap())
        });
    }
    let c12 = cycle_graph(12);
    group.bench_function("cycle_12", |b| {
        b.iter(|| count_regions_repulsive(black_box(&c12)).unwrap())
    });
    group.finish();
}

fn chromatic_route(c: &mut Criterion) {
    let mut group = c.benchmark_group("chromatic_at_minus_one");
    for n in [6, 8, 10] {
        let g = complete_graph(n);
        group.bench_with_input(BenchmarkId::new("complete", n), &g, |b, g| {
            b.iter(|| chromatic_polynomial_at(black_box(g), -1).unwrap())
        });
    }
    group.finish();
}

fn coefficient_synthesis(c: &mut Criterion) {
    let p = balanced_problem();
    let partition = classify_edges(&p, 0.1).unwrap();
    c.bench_function("shape_balanced", |b| {
        b.iter(|| {
            min_energy_coefficients(black_box(&p), 0.1, &partition, None, 0.01, true).unwrap()
        })
    });
}

fn integration(c: &mut Criterion) {
    let sys = balanced_system();
    let theta0 = balanced_problem().target_phases();

    c.bench_function("rk4_step", |b| {
        b.iter(|| sys.rk4_step(black_box(&theta0), 1e-3).unwrap())
    });

    let cfg = SimConfig { step: 1e-3, t_end: 1.0, record_stride: 10, ..SimConfig::default() };
    c.bench_function("simulate_1s_horizon", |b| {
        b.iter(|| sys.simulate(black_box(&theta0), &cfg).unwrap())
    });
}

criterion_group!(
    benches,
    region_counting,
    chromatic_route,
    coefficient_synthesis,
    integration
);
criterion_main!(benches);
