//! Replica fan-out throughput: the rayon path against the sequential
//! fallback, on the two workloads that dominate wall time in practice.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use snlab::graphs::{BoundaryPolicy, GraphFamily, VertexId, Window};
use snlab::kernels::WalkKernel;
use snlab::replicas::{replica_seed, run_replicas, run_replicas_seq};
use snlab::snsim::{run_pair_replica, CouplingStream, PairSweepConfig};

fn pair_replica_work(window: &Window, kernel: WalkKernel, r: u32) -> bool {
    let lambdas = [0.5, 1.5];
    let cfg = PairSweepConfig {
        window,
        kernel,
        lambdas: &lambdas,
        horizon: 64,
        u: VertexId(0),
        v: VertexId(4),
        force_occupancy: true,
    };
    let stream = CouplingStream::new(replica_seed(17, r));
    run_pair_replica(&stream, &cfg).unwrap()[1].connected_at.is_some()
}

fn bench_pair_connectivity(c: &mut Criterion) {
    let window = Window::full(GraphFamily::Cycle { length: 512 }, BoundaryPolicy::Reject)
        .unwrap();
    let kernel = WalkKernel::half_holding(2);
    let replicas = 64u32;
    let mut group = c.benchmark_group("pair_connectivity_replicas");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("parallel", replicas), &replicas, |b, &n| {
        b.iter(|| run_replicas(n, |r| pair_replica_work(&window, kernel, r)))
    });
    group.bench_with_input(BenchmarkId::new("sequential", replicas), &replicas, |b, &n| {
        b.iter(|| run_replicas_seq(n, |r| pair_replica_work(&window, kernel, r)))
    });
    group.finish();
}

fn brw_work(r: u32) -> u32 {
    let kernel = WalkKernel::half_holding(3);
    let mut sim = snlab::brw::BrwSim::new(kernel, 0.5, replica_seed(23, r)).unwrap();
    let mut total = 0;
    for _ in 0..8 {
        total += sim.step_generation().unwrap().at_root_after_step;
    }
    total
}

fn bench_brw_generations(c: &mut Criterion) {
    let replicas = 2_000u32;
    let mut group = c.benchmark_group("brw_generations_replicas");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("parallel", replicas), &replicas, |b, &n| {
        b.iter(|| run_replicas(n, brw_work))
    });
    group.bench_with_input(BenchmarkId::new("sequential", replicas), &replicas, |b, &n| {
        b.iter(|| run_replicas_seq(n, brw_work))
    });
    group.finish();
}

criterion_group!(benches, bench_pair_connectivity, bench_brw_generations);
criterion_main!(benches);
