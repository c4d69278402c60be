//! Shared fixtures for the benchmark targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mnasfpn_core::arch::{decode_genome, expand_network, NetworkPlan, PlanParams, ResolvedGraph};
use mnasfpn_core::search::{Candidate, CandidateMeta};
use mnasfpn_core::space::{sample_uniform, Genome, Preset, SearchSpaceDef};

pub fn mnasfpn_space() -> SearchSpaceDef {
    SearchSpaceDef::preset(Preset::MnasFpn)
}

pub fn sampled_graph(space: &SearchSpaceDef, seed: u64, repeats: u32) -> ResolvedGraph {
    let genome = sample_uniform(space, seed);
    realize(space, &genome, repeats)
}

pub fn realize(space: &SearchSpaceDef, genome: &Genome, repeats: u32) -> ResolvedGraph {
    let cell = decode_genome(genome, space, &PlanParams { input_image_size: 320, repeats })
        .expect("sampled genomes decode");
    expand_network(&NetworkPlan::new(cell, repeats, space.flavor), space.sdo_enabled)
        .expect("sampled cells expand")
}

/// Random (latency, quality) candidates for frontier benchmarks.
pub fn random_candidates(n: usize, seed: u64) -> Vec<Candidate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| Candidate {
            genome: Genome::new(vec![]),
            quality: rng.gen_range(0.0..1.0),
            latency_ms: rng.gen_range(50.0..500.0),
            reward: 0.0,
            meta: CandidateMeta { step: i as u64, repeats: 1, seed },
        })
        .collect()
}
