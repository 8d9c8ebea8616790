use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ikep_core::campaign::{run_campaign, CampaignConfig};
use ikep_core::game::GameOracle;
use ikep_core::graph::{generate_pool, GeneratorConfig};
use ikep_core::packing::ExchangeBound;
use ikep_core::par::Execution;
use ikep_core::simulator::{Concept, Scenario};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn coalition_values(c: &mut Criterion) {
    let mut group = c.benchmark_group("all_coalition_values");
    group.sample_size(10);
    for countries in [8, 10] {
        let cfg = GeneratorConfig { pairs: 60, countries, initial_fraction: 1.0, ..GeneratorConfig::default() };
        let oracle = GameOracle::new(generate_pool(&cfg, 11).unwrap().graph).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, countries), &exec, |b, &exec| {
                b.iter(|| oracle.all_coalition_values(exec))
            });
        }
    }
    group.finish();
}

fn seed_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("campaign_seed_sweep");
    group.sample_size(10);
    let cfg = CampaignConfig {
        seeds: (1..=8).collect(),
        pairs: 40,
        countries: vec![4],
        concepts: vec![Concept::Shapley],
        scenarios: vec![Scenario::ARBITRARY, Scenario::LEXMIN_CREDITS],
        bounds: vec![ExchangeBound::Infinity],
        rounds: 8,
        ..CampaignConfig::default()
    };
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| run_campaign(&cfg, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, coalition_values, seed_sweep);
criterion_main!(benches);
