use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qmas_core::{
    formation_field, quantize_field, relative_positions, run, sample_scenario, voronoi_zero_bound,
    ActionSet, FormationSpec, Graph, GraphKind, McConfig, Mode, StackedVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quantizer(c: &mut Criterion) {
    let set = ActionSet::triangle(1.0, 0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let etas: Vec<[f64; 2]> = (0..1024)
        .map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])
        .collect();
    c.bench_function("nearest_select/triangle x1024", |b| {
        b.iter(|| {
            etas.iter()
                .map(|eta| set.nearest_select_index(black_box(eta)))
                .sum::<usize>()
        })
    });
}

fn field(c: &mut Criterion) {
    let mut group = c.benchmark_group("formation_field+quantize");
    for n in [4, 7, 16] {
        let g = Graph::generate(GraphKind::TriangulatedPolygon, n).unwrap();
        let spec = FormationSpec::regular_polygon(&g, 1.0).unwrap();
        let sets: Vec<ActionSet> = (0..n)
            .map(|i| ActionSet::triangle(1.0 / n as f64, i as f64).unwrap())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let x = StackedVector::agents((0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect(), 2)
            .unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                let z = relative_positions(&g, black_box(&x)).unwrap();
                let e = qmas_core::formation_error(&z, &spec).unwrap();
                let eta = formation_field(&g, &z, &e).unwrap();
                quantize_field(&eta, &sets).unwrap()
            })
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("run");
    group.sample_size(10);
    for mode in [Mode::ConsensusQuantized, Mode::FormationQuantized] {
        let cfg = McConfig {
            master_seed: 42,
            agent_range: [5, 5],
            ..McConfig::for_mode(mode)
        };
        let sim = sample_scenario(&cfg, 0).unwrap().sim;
        group.bench_function(mode.to_string(), |b| {
            b.iter(|| run(black_box(&sim)).unwrap())
        });
    }
    group.finish();
}

fn voronoi(c: &mut Criterion) {
    let triangle = ActionSet::triangle(1.0, 0.7).unwrap().to_points();
    let octagon: Vec<Vec<f64>> = std::iter::once(vec![0.0, 0.0])
        .chain((0..8).map(|k| {
            let a = std::f64::consts::TAU * k as f64 / 8.0;
            vec![a.cos(), a.sin()]
        }))
        .collect();
    c.bench_function("voronoi_zero_bound/triangle", |b| {
        b.iter(|| voronoi_zero_bound(black_box(&triangle)).unwrap())
    });
    c.bench_function("voronoi_zero_bound/octagon", |b| {
        b.iter(|| voronoi_zero_bound(black_box(&octagon)).unwrap())
    });
}

criterion_group!(benches, quantizer, field, simulation, voronoi);
criterion_main!(benches);
