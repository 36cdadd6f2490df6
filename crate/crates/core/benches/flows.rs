use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hlx_core::hopflax::{flow_up, FlowParams};
use hlx_core::solver::{solver_params, sweep, SolveConfig};
use hlx_core::{Grid, HamiltonianModel, ScalarField};

// One-thread pool vs the full pool. Built with --no-default-features both
// rows run the sequential path.
fn pools() -> Vec<(usize, rayon::ThreadPool)> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut sizes = vec![1, all];
    sizes.dedup();
    sizes.into_iter().map(|n| (n, rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap())).collect()
}

fn field(n: usize) -> ScalarField {
    let g = Grid::new_2d(n, n, [-1.0, -1.0], [1.0, 1.0]).unwrap();
    let mut u = ScalarField::from_fn(&g, |x| (3.0 * x[0]).sin() * (2.0 * x[1]).cos() + 0.3 * x[0] * x[1]);
    u.mask_edges();
    u
}

fn bench_flow_up(c: &mut Criterion) {
    let h = HamiltonianModel::half_square(2).unwrap();
    let u = field(65);
    let fp = FlowParams::for_field(&h, &u, 0.1).unwrap();
    let mut group = c.benchmark_group("flow_up_65");
    for (n, pool) in pools() {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}t")), &n, |b, _| {
            b.iter(|| pool.install(|| flow_up(&u, &fp).unwrap()))
        });
    }
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let h = HamiltonianModel::euclidean(2).unwrap();
    let u = field(65);
    let fp = solver_params(&h, &u, &SolveConfig::default()).unwrap();
    let mut group = c.benchmark_group("sweep_65");
    for (n, pool) in pools() {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}t")), &n, |b, _| {
            b.iter(|| pool.install(|| sweep(&fp, &u, 1.0)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_flow_up, bench_sweep);
criterion_main!(benches);
