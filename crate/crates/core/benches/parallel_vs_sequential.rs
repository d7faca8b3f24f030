use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use p2p_patterns::par;
use p2p_patterns::scenario::{self, OverlayKind, Scenario};
use p2p_patterns::swarm::{SwarmConfig, SwarmSim, DEFAULT_PIECE_SIZE};
use p2p_patterns::topology::{generate_ba, generate_er, metrics, metrics_sequential, BaParams, ErParams};

fn topology_metrics(c: &mut Criterion) {
    let mut group = c.benchmark_group("topology_metrics");
    group.sample_size(10);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
    let graphs = [
        ("er_1000", generate_er(ErParams { n: 1000, alpha: 8.0 }, &mut rng).unwrap()),
        ("ba_2000", generate_ba(BaParams { n: 2000, m_attach: 2, n0: 3 }, &mut rng).unwrap()),
    ];
    for (name, g) in &graphs {
        group.bench_with_input(BenchmarkId::new("parallel", name), g, |b, g| b.iter(|| metrics(black_box(g))));
        group.bench_with_input(BenchmarkId::new("sequential", name), g, |b, g| {
            b.iter(|| metrics_sequential(black_box(g)))
        });
    }
    group.finish();
}

fn multi_seed(c: &mut Criterion) {
    let mut group = c.benchmark_group("multi_seed_runs");
    group.sample_size(10);
    let swarm = SwarmConfig { total_size: 32 * DEFAULT_PIECE_SIZE, ..SwarmConfig::default() };
    group.bench_function("swarm_x8/parallel", |b| {
        b.iter(|| par::map_range(8, |i| SwarmSim::new(swarm.clone()).unwrap().run(i as u64).end_time))
    });
    group.bench_function("swarm_x8/sequential", |b| {
        b.iter(|| par::map_range_seq(8, |i| SwarmSim::new(swarm.clone()).unwrap().run(i as u64).end_time))
    });

    let mut s = Scenario { overlay: OverlayKind::Dum, nodes: 200, duration_s: 120.0, ..Scenario::default() };
    s.churn.mean_session_s = Some(300.0);
    let seeds: Vec<u64> = (0..8).collect();
    group.bench_function("dum_scenario_x8/parallel", |b| b.iter(|| scenario::run_batch(&s, &seeds).len()));
    group.bench_function("dum_scenario_x8/sequential", |b| {
        b.iter(|| seeds.iter().filter(|&&seed| scenario::run(&Scenario { seed, ..s.clone() }).is_ok()).count())
    });
    group.finish();
}

criterion_group!(benches, topology_metrics, multi_seed);
criterion_main!(benches);
