//! Costs of the four hot paths: sampling a certified expander layer,
//! materializing a transfer operator, pushing a measure down one level
//! at a time, and the Monte Carlo visit counter.
//!
//! Sample sizes are kept small; the interesting quantity is the order
//! of magnitude per input size, not microsecond precision.

use criterion::{criterion_group, criterion_main, Criterion};
use liouville_core::graph::build_expander_layer;
use liouville_core::{
    build_graph, mc_expected_visits, propagate_measure, transfer_matrix, ExpanderConfig,
    ExpanderModel, HarmonicMeasure, VertexId, WalkConfig,
};

fn bench_build_layer(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_expander_layer");
    group.sample_size(10);
    for m in [64u64, 256] {
        group.bench_function(format!("pairing_m{m}"), |b| {
            b.iter(|| build_expander_layer(m, ExpanderModel::Pairing, 0.02, 100, 1).unwrap());
        });
    }
    group.finish();
}

fn bench_transfer_matrix(c: &mut Criterion) {
    let g = build_graph(7, 1, &ExpanderConfig::default()).unwrap();
    let mut group = c.benchmark_group("transfer_matrix");
    group.sample_size(10);
    for n in [4u32, 6] {
        group.bench_function(format!("n{n}"), |b| {
            b.iter(|| transfer_matrix(&g, n).unwrap());
        });
    }
    group.finish();
}

fn bench_propagate_measure(c: &mut Criterion) {
    let g = build_graph(8, 1, &ExpanderConfig::default()).unwrap();
    let mut group = c.benchmark_group("propagate_measure");
    group.sample_size(10);
    group.bench_function("root_to_level8", |b| {
        b.iter(|| {
            let mut mu = HarmonicMeasure::point_mass(VertexId::ROOT);
            for _ in 0..8 {
                mu = propagate_measure(&g, &mu).unwrap();
            }
            mu
        });
    });
    group.finish();
}

fn bench_mc_visits(c: &mut Criterion) {
    let g = build_graph(5, 1, &ExpanderConfig::default()).unwrap();
    let cfg = WalkConfig::new(7, 5_000);
    let mut group = c.benchmark_group("mc_expected_visits");
    group.sample_size(10);
    group.bench_function("level2_5k_walks", |b| {
        b.iter(|| mc_expected_visits(&g, VertexId::new(3, 0), &cfg).unwrap());
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_build_layer,
    bench_transfer_matrix,
    bench_propagate_measure,
    bench_mc_visits
);
criterion_main!(benches);
