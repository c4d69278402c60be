//! Search machinery: frontier extraction at scale, controller updates,
//! cardinality evaluation.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mnasfpn_bench::random_candidates;
use mnasfpn_core::search::{pareto_frontier, Controller, PolicyConfig, PolicyGradientController};
use mnasfpn_core::space::{cardinality, token_schema, Preset, SearchSpaceDef};

fn bench_frontier(c: &mut Criterion) {
    let mut group = c.benchmark_group("pareto_frontier");
    for n in [1_000usize, 10_000, 100_000] {
        let candidates = random_candidates(n, 42);
        group.bench_with_input(BenchmarkId::from_parameter(n), &candidates, |b, cands| {
            b.iter(|| pareto_frontier(black_box(cands)).len())
        });
    }
    group.finish();
}

fn bench_controller(c: &mut Criterion) {
    let schema = token_schema(&SearchSpaceDef::preset(Preset::MnasFpn));
    c.bench_function("policy_propose", |b| {
        let mut ctl = PolicyGradientController::new(schema.clone(), PolicyConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        b.iter(|| ctl.propose(&mut rng))
    });

    c.bench_function("policy_observe_batch_25", |b| {
        let mut ctl = PolicyGradientController::new(schema.clone(), PolicyConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch: Vec<_> = (0..25)
            .map(|i| (ctl.propose(&mut rng), i as f64 / 25.0))
            .collect();
        b.iter(|| ctl.observe(black_box(&batch)))
    });
}

fn bench_cardinality(c: &mut Criterion) {
    c.bench_function("cardinality/all_presets", |b| {
        b.iter(|| {
            Preset::ALL
                .iter()
                .map(|&p| cardinality(&SearchSpaceDef::preset(p)).bits())
                .sum::<u64>()
        })
    });
}

criterion_group!(benches, bench_frontier, bench_controller, bench_cardinality);
criterion_main!(benches);
