//! Property tests over the core invariants: frontier correctness against a
//! brute-force oracle, reward shaping laws, and genome codec round-trips.

use proptest::prelude::*;

use mnasfpn_core::search::{pareto_frontier, reward, Candidate, CandidateMeta, RewardConfig};
use mnasfpn_core::space::{sample_uniform, token_schema, Genome, Preset, SearchSpaceDef};
use mnasfpn_core::{decode_genome, encode_genome, PlanParams};

fn candidate(latency_ms: f64, quality: f64, step: u64) -> Candidate {
    Candidate {
        genome: Genome::new(vec![0]),
        quality,
        latency_ms,
        reward: quality,
        meta: CandidateMeta { step, repeats: 1, seed: 0 },
    }
}

/// O(n^2) pairwise-dominance oracle: keep candidates no other candidate
/// dominates, first-seen on full ties.
fn frontier_oracle(cands: &[Candidate]) -> Vec<u64> {
    let dominates = |a: &Candidate, b: &Candidate| {
        a.latency_ms <= b.latency_ms
            && a.quality >= b.quality
            && (a.latency_ms < b.latency_ms || a.quality > b.quality)
    };
    let mut kept = Vec::new();
    'outer: for (i, c) in cands.iter().enumerate() {
        for (j, other) in cands.iter().enumerate() {
            if i != j && dominates(other, c) {
                continue 'outer;
            }
            // Full tie: only the earliest survives.
            if j < i && other.latency_ms == c.latency_ms && other.quality == c.quality {
                continue 'outer;
            }
        }
        kept.push(c.meta.step);
    }
    kept
}

proptest! {
    #[test]
    fn frontier_matches_brute_force(points in prop::collection::vec((0u32..500, 0u32..500), 0..120)) {
        // Coarse grids force plenty of exact ties.
        let cands: Vec<Candidate> = points
            .iter()
            .enumerate()
            .map(|(i, &(l, q))| candidate(50.0 + l as f64, q as f64 / 500.0, i as u64))
            .collect();
        let fast: Vec<u64> = pareto_frontier(&cands).members().iter().map(|c| c.meta.step).collect();
        let mut oracle = frontier_oracle(&cands);
        oracle.sort_unstable();
        let mut fast_sorted = fast.clone();
        fast_sorted.sort_unstable();
        prop_assert_eq!(fast_sorted, oracle);
    }

    #[test]
    fn reward_is_monotone(q in 0.0f64..1.0, lat in 1.0f64..1000.0, dq in 1e-6f64..0.5, dl in 1e-3f64..500.0) {
        let config = RewardConfig { latency_exponent: -0.3 };
        let base = reward(q, lat, &config).unwrap();
        if q + dq <= 1.0 {
            prop_assert!(reward(q + dq, lat, &config).unwrap() > base);
        }
        if q > 0.0 {
            prop_assert!(reward(q, lat + dl, &config).unwrap() < base);
        }
    }

    #[test]
    fn reward_rescaling_preserves_the_argmax(
        seed in 0u64..10_000,
        scale in 0.01f64..100.0,
        n in 2usize..40,
    ) {
        let config = RewardConfig { latency_exponent: -0.3 };
        let mut best_plain = (0usize, f64::NEG_INFINITY);
        let mut best_scaled = (0usize, f64::NEG_INFINITY);
        for i in 0..n {
            let mix = |salt: u64| -> f64 {
                // Cheap deterministic pseudo-randoms for the pair.
                let x = seed
                    .wrapping_mul(0x9e3779b97f4a7c15)
                    .wrapping_add((i as u64) << 32 | salt)
                    .wrapping_mul(0xbf58476d1ce4e5b9);
                (x >> 11) as f64 / (1u64 << 53) as f64
            };
            let q = mix(1);
            let lat = 50.0 + 400.0 * mix(2);
            let plain = reward(q, lat, &config).unwrap();
            let scaled = reward(q, lat * scale, &config).unwrap();
            // Value covariance: scaling all latencies by s multiplies the
            // reward by s^w.
            let expected = plain * scale.powf(config.latency_exponent);
            prop_assert!((scaled - expected).abs() <= 1e-12 * expected.abs().max(1.0));
            if plain > best_plain.1 {
                best_plain = (i, plain);
            }
            if scaled > best_scaled.1 {
                best_scaled = (i, scaled);
            }
        }
        prop_assert_eq!(best_plain.0, best_scaled.0);
    }

    #[test]
    fn genome_roundtrip_all_presets(seed in 0u64..5_000) {
        for preset in Preset::ALL {
            let space = SearchSpaceDef::preset(preset);
            let genome = sample_uniform(&space, seed);
            let cell = decode_genome(&genome, &space, &PlanParams::default()).unwrap();
            let back = encode_genome(&cell, &space).unwrap();
            prop_assert_eq!(&back, &genome, "{} seed {}", preset, seed);
        }
    }

    #[test]
    fn token_mutations_stay_in_schema_or_fail_loudly(seed in 0u64..2_000, bump in 1u32..7) {
        // Any token pushed beyond its slot's range must be rejected with
        // the offending index, never decoded silently.
        let space = SearchSpaceDef::preset(Preset::MnasFpn);
        let schema = token_schema(&space);
        let mut genome = sample_uniform(&space, seed);
        let slot = (seed as usize) % schema.len();
        genome.tokens[slot] = schema.slots()[slot].choices as u32 - 1 + bump;
        match decode_genome(&genome, &space, &PlanParams::default()) {
            Err(mnasfpn_core::Error::TokenOutOfRange { index, .. }) => {
                prop_assert_eq!(index, slot);
            }
            other => prop_assert!(false, "expected TokenOutOfRange, got {:?}", other.map(|_| ())),
        }
    }
}
