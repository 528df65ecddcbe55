use criterion::{criterion_group, criterion_main, Criterion};
use formation_core::sim::montecarlo::{monte_carlo_with, Execution, MonteCarloConfig};
use formation_core::sim::presets::planar_hexagon_quads;

fn campaign(c: &mut Criterion) {
    let mut base = planar_hexagon_quads().unwrap();
    base.sim.t_end = 2.0;
    let cfg = MonteCarloConfig::new(8, 5.0, 1);
    let mut g = c.benchmark_group("monte_carlo_8x2s");
    g.sample_size(10);
    g.bench_function("sequential", |b| b.iter(|| monte_carlo_with(&base, &cfg, Execution::Sequential).unwrap()));
    #[cfg(feature = "parallel")]
    g.bench_function("parallel", |b| b.iter(|| monte_carlo_with(&base, &cfg, Execution::Parallel).unwrap()));
    g.finish();
}

criterion_group!(benches, campaign);
criterion_main!(benches);
