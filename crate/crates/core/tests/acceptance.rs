//! Acceptance suite: one test per release criterion, each printing a
//! `criterion N: PASS` line with the measured figures. Run with
//! `cargo test -p mnasfpn-core --test acceptance -- --nocapture`.

use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mnasfpn_core::arch::{
    decode_genome, encode_genome, expand_network, parse_graph_text, write_graph_text,
    FeatureShape, FeatureSpec, NetworkPlan, Node, OpKind, PlanParams, PortRef,
};
use mnasfpn_core::cost::{
    estimate_latency, graph_madds, merge_path_madds, synth_lut_for_space, LatencyModel,
    LatencyTable,
};
use mnasfpn_core::evaluator::{SurrogateEvaluator, SurrogateSpec};
use mnasfpn_core::search::{
    pareto_frontier, read_history, reward, run_search, Candidate, CandidateMeta, ControllerKind,
    RewardConfig, SearchConfig,
};
use mnasfpn_core::space::{
    cardinality, combinatorics::rank_subset, sample_uniform, token_schema, Genome, Preset,
    SearchSpaceDef, SlotKind,
};

// ---------------------------------------------------------------------------
// 1. Cardinality formulas: exact big-integer evaluation, zero tolerance.
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_cardinality_formulas() {
    let start = Instant::now();

    let pair_product: u64 = (0..9u64)
        .map(|i| mnasfpn_core::space::combinatorics::binomial(i + 4, 2))
        .product();
    assert_eq!(pair_product, 3_112_013_520_000, "product of the nine pair counts");

    let lite = cardinality(&SearchSpaceDef::preset(Preset::NasFpnLiteS));
    let noexp = cardinality(&SearchSpaceDef::preset(Preset::NoExpand));
    let mnas = cardinality(&SearchSpaceDef::preset(Preset::MnasFpn));
    let conn = cardinality(&SearchSpaceDef::preset(Preset::ConnSearch));

    assert_eq!(&noexp % &lite, BigUint::from(0u8));
    assert_eq!(&noexp / &lite, BigUint::from(118_098u32), "no-expand / nas-fpnlite-s");
    assert_eq!(&mnas % &noexp, BigUint::from(0u8));
    assert_eq!(&mnas / &noexp, BigUint::from(40_353_607u32), "mnasfpn / no-expand = 7^9");
    assert_eq!(&conn % &mnas, BigUint::from(0u8));
    assert_eq!(&conn / &mnas, BigUint::from(2_571_912_000u64), "conn-search / mnasfpn");

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}, budget 1s");

    // The quoted ballpark sizes are printed for reference; exact values
    // intentionally do not have to agree with them.
    for preset in Preset::ALL {
        let exact = cardinality(&SearchSpaceDef::preset(preset));
        let quoted = preset.quoted_size_estimate();
        let ratio = exact.to_string().parse::<f64>().unwrap_or(f64::INFINITY) / quoted;
        println!("  {preset}: exact {exact} vs quoted {quoted:.1e} (exact/quoted {ratio:.3})");
    }
    println!(
        "criterion 1: PASS — cardinality factors exact (pair product 3,112,013,520,000; \
         ratios 118098, 7^9, 2,571,912,000) in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// 2. SDO dominance: resize-first strictly cheaper on every down-sampling
//    grid point.
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_sdo_dominance() {
    let start = Instant::now();
    let mut cases = 0u32;
    for k in [2u32, 4, 8] {
        for c in [16u32, 32, 48, 64, 80, 96] {
            for f in [16u32, 32, 64, 96, 128, 256, 512] {
                for r in [5u32, 10, 20, 40] {
                    let input = FeatureSpec { level: 3, resolution: r * k, channels: c };
                    let with_sdo = merge_path_madds(&input, r, f, true).unwrap();
                    let without = merge_path_madds(&input, r, f, false).unwrap();
                    assert!(
                        with_sdo.madds < without.madds,
                        "violation at k={k} C={c} F={f} R={r}: {} !< {}",
                        with_sdo.madds,
                        without.madds
                    );
                    cases += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert_eq!(cases, 504, "3 ratios x 6 C x 7 F x 4 R");
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}, budget 1s");
    println!(
        "criterion 2: PASS — resize-then-conv strictly cheaper in all {cases} \
         down-sampling cases in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// 3. Disabling SDO strictly increases head MAdds for the discovered
//    single-block architecture at repeats 4 and 5.
// ---------------------------------------------------------------------------

/// Hand-encoded genome for the discovered single-block cell: one internal
/// block at R=20, F=96, k=3, sum merge, C=48; outputs wired so the
/// expansion is dominated by down-sampling paths.
fn single_block_genome(space: &SearchSpaceDef) -> Genome {
    let schema = token_schema(space);
    let tokens = schema
        .slots()
        .iter()
        .map(|slot| match (slot.kind, slot.node) {
            (SlotKind::Channels, _) => 2,                                      // C = 48
            (SlotKind::OutputOrder, _) => 0,                                   // levels 3..6 in order
            (SlotKind::InputPair, Some(0)) => rank_subset(&[0, 1], 4) as u32,  // C3 + C4
            (SlotKind::InputPair, Some(5)) => rank_subset(&[0, 4], 9) as u32,  // P3: C3 + block
            (SlotKind::InputPair, Some(6)) => rank_subset(&[0, 4], 10) as u32, // P4: C3 + block
            (SlotKind::InputPair, Some(7)) => rank_subset(&[1, 4], 11) as u32, // P5: C4 + block
            (SlotKind::InputPair, Some(8)) => rank_subset(&[2, 4], 12) as u32, // P6: C5 + block
            (SlotKind::Expansion, _) => 3,                                     // F = 96
            (SlotKind::Resolution, Some(0)) => 1,                              // R = 20
            _ => 0,                                                            // k=3, sum, dead blocks
        })
        .collect();
    Genome::new(tokens)
}

#[test]
fn criterion_3_no_sdo_ablation_direction() {
    let space = SearchSpaceDef::preset(Preset::MnasFpn);
    let genome = single_block_genome(&space);
    let cell = decode_genome(&genome, &space, &PlanParams::default()).unwrap();
    assert_eq!(cell.shared_channels, 48);
    assert_eq!(cell.internal_blocks[0].intermediate_resolution, 20);
    assert_eq!(cell.internal_blocks[0].expansion_channels, 96);
    assert_eq!(cell.internal_blocks[0].kernel, 3);

    let mut figures = Vec::new();
    for repeats in [4u32, 5] {
        let plan = NetworkPlan::new(cell.clone(), repeats, space.flavor);
        let with_sdo = graph_madds(&expand_network(&plan, true).unwrap());
        let without = graph_madds(&expand_network(&plan, false).unwrap());
        assert!(
            without > with_sdo,
            "repeats {repeats}: disabling SDO must increase MAdds ({without} !> {with_sdo})"
        );
        figures.push(format!(
            "repeats {repeats}: {:.1}M -> {:.1}M",
            with_sdo as f64 / 1e6,
            without as f64 / 1e6
        ));
    }
    println!(
        "criterion 3: PASS — disabling SDO increases head MAdds ({})",
        figures.join("; ")
    );
}

// ---------------------------------------------------------------------------
// 4. Reward function: frozen value, monotonicity, rescaling argmax
//    invariance.
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_reward_function() {
    let config = RewardConfig { latency_exponent: -0.3 };

    // Frozen via high-precision evaluation of 0.25 * 180^(-0.3).
    let r = reward(0.25, 180.0, &config).unwrap();
    assert!(
        (r - 0.052645136629033017).abs() < 1e-6,
        "reward(0.25, 180) = {r}, expected ~0.0526451"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100_000 {
        let q: f64 = rng.gen_range(0.0..1.0);
        let lat: f64 = rng.gen_range(1.0..1000.0);
        let base = reward(q, lat, &config).unwrap();
        let dq: f64 = rng.gen_range(1e-9..(1.0 - q).max(2e-9));
        let dl: f64 = rng.gen_range(1e-6..500.0);
        assert!(reward((q + dq).min(1.0), lat, &config).unwrap() >= base);
        if q > 0.0 {
            assert!(reward(q, lat + dl, &config).unwrap() < base);
        }
    }

    for set in 0..1_000 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + set);
        let n = rng.gen_range(2..50);
        let scale: f64 = rng.gen_range(0.01..100.0);
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen_range(0.001..1.0), rng.gen_range(10.0..500.0)))
            .collect();
        let argmax = |s: f64| -> usize {
            pairs
                .iter()
                .enumerate()
                .map(|(i, &(q, lat))| (i, reward(q, lat * s, &config).unwrap()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap()
                .0
        };
        assert_eq!(argmax(1.0), argmax(scale), "rescaling changed the argmax");
    }
    println!(
        "criterion 4: PASS — reward(0.25, 180) within 1e-6; monotone over 1e5 pairs; \
         argmax invariant under rescaling over 1e3 sets"
    );
}

// ---------------------------------------------------------------------------
// 5. Pareto frontier equals the O(n^2) dominance oracle at scale.
// ---------------------------------------------------------------------------

fn frontier_oracle_steps(cands: &[Candidate]) -> Vec<u64> {
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
            if j < i && other.latency_ms == c.latency_ms && other.quality == c.quality {
                continue 'outer;
            }
        }
        kept.push(c.meta.step);
    }
    kept.sort_unstable();
    kept
}

#[test]
fn criterion_5_pareto_frontier_oracle() {
    let start = Instant::now();
    for set in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(set);
        let cands: Vec<Candidate> = (0..10_000)
            .map(|i| Candidate {
                genome: Genome::new(vec![]),
                quality: (rng.gen_range(0..2000) as f64) / 2000.0,
                latency_ms: 50.0 + rng.gen_range(0..4000) as f64 / 10.0,
                reward: 0.0,
                meta: CandidateMeta { step: i, repeats: 1, seed: set },
            })
            .collect();
        let mut fast: Vec<u64> =
            pareto_frontier(&cands).members().iter().map(|c| c.meta.step).collect();
        fast.sort_unstable();
        assert_eq!(fast, frontier_oracle_steps(&cands), "set {set}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}, budget 10s");
    println!(
        "criterion 5: PASS — frontier equals the O(n^2) oracle on 100 sets of 10^4 candidates \
         in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// 6. The policy-gradient controller beats random search on the planted
//    surrogate at 95% confidence over 20 paired seeds.
// ---------------------------------------------------------------------------

fn best_reward(kind: ControllerKind, seed: u64, budget: u64) -> f64 {
    let space = SearchSpaceDef::preset(Preset::MnasFpn);
    let mut config = SearchConfig::new(space.clone());
    config.budget = budget;
    config.batch_size = 25;
    config.controller = kind;
    config.seed = seed;
    let lut = synth_lut_for_space(&space, 320, &LatencyModel::default(), 120.0).unwrap();
    let evaluator = SurrogateEvaluator { spec: SurrogateSpec::planted(&space, seed) };
    run_search(&config, &evaluator, &lut)
        .unwrap()
        .history
        .iter()
        .filter_map(|r| r.reward)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn criterion_6_controller_learns() {
    let start = Instant::now();
    let diffs: Vec<f64> = (0..20u64)
        .map(|seed| {
            best_reward(ControllerKind::PolicyGradient, seed, 2000)
                - best_reward(ControllerKind::Random, seed, 2000)
        })
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = mean / (var.sqrt() / n.sqrt());

    // One-sided t critical value at 95%, 19 degrees of freedom.
    const T_CRIT: f64 = 1.729;
    let elapsed = start.elapsed();
    assert!(
        t > T_CRIT,
        "paired t = {t:.3} does not exceed {T_CRIT} (mean diff {mean:.5})"
    );
    assert!(elapsed < Duration::from_secs(300), "took {elapsed:?}, budget 5min");
    println!(
        "criterion 6: PASS — policy gradient beats random: mean best-reward diff {mean:+.5}, \
         paired t {t:.1} > {T_CRIT} over 20 seeds, in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// 7. Connectivity-based LUT: estimates ignore unreachable nodes and equal
//    their own breakdown exactly.
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_lut_connectivity() {
    let space = SearchSpaceDef::preset(Preset::MnasFpn);
    let lut = synth_lut_for_space(&space, 320, &LatencyModel::default(), 120.0).unwrap();
    for seed in 0..100u64 {
        let genome = sample_uniform(&space, seed);
        let cell = decode_genome(&genome, &space, &PlanParams::default()).unwrap();
        let plan = NetworkPlan::new(cell, 1 + (seed % 2) as u32, space.flavor);
        let graph = expand_network(&plan, true).unwrap();
        let base = estimate_latency(&graph, &lut).unwrap();

        // Inject unreachable blocks with signatures the table has never
        // seen; connectivity must keep them out of the lookup entirely.
        let mut with_dead = graph.clone();
        for extra in 0..3 {
            let shape = FeatureShape { resolution: 20, channels: 7777 + extra };
            with_dead.nodes.push(Node {
                kind: OpKind::DepthwiseConv,
                inputs: vec![PortRef::Input(4)],
                input_shape: shape,
                output_shape: shape,
                kernel: 3,
                stride: 1,
                label: format!("dead{extra}"),
            });
        }
        let injected = estimate_latency(&with_dead, &lut).unwrap();
        assert_eq!(base.total_ms, injected.total_ms, "seed {seed}");
        assert_eq!(base.rows, injected.rows, "seed {seed}");

        let row_sum: f64 =
            base.overhead_ms + base.rows.iter().map(|r| r.latency_ms).sum::<f64>();
        assert_eq!(base.total_ms, row_sum, "seed {seed}: breakdown must sum exactly");
    }
    println!(
        "criterion 7: PASS — latency invariant under dead-block injection and exactly equal \
         to its breakdown over 100 genomes"
    );
}

// ---------------------------------------------------------------------------
// 8. Determinism and resume.
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_determinism_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let make_config = |path: std::path::PathBuf| {
        let space = SearchSpaceDef::preset(Preset::MnasFpn);
        let mut config = SearchConfig::new(space);
        config.budget = 60;
        config.batch_size = 20;
        config.seed = 11;
        config.history_path = Some(path);
        config
    };
    let space = SearchSpaceDef::preset(Preset::MnasFpn);
    let lut = synth_lut_for_space(&space, 320, &LatencyModel::default(), 120.0).unwrap();
    let evaluator = SurrogateEvaluator { spec: SurrogateSpec::planted(&space, 11) };

    // Identical seeds: byte-identical history files.
    let path_a = dir.path().join("a.jsonl");
    let path_b = dir.path().join("b.jsonl");
    run_search(&make_config(path_a.clone()), &evaluator, &lut).unwrap();
    run_search(&make_config(path_b.clone()), &evaluator, &lut).unwrap();
    let bytes_a = std::fs::read(&path_a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&path_b).unwrap(), "same seed must be byte-identical");

    // Kill mid-run (including mid-batch) and resume: same final candidates.
    for cut in [13usize, 20, 41] {
        let path_cut = dir.path().join(format!("cut{cut}.jsonl"));
        let full_text = String::from_utf8(bytes_a.clone()).unwrap();
        let truncated: String = full_text.lines().take(cut).map(|l| format!("{l}\n")).collect();
        std::fs::write(&path_cut, truncated).unwrap();
        run_search(&make_config(path_cut.clone()), &evaluator, &lut).unwrap();
        assert_eq!(
            std::fs::read(&path_cut).unwrap(),
            bytes_a,
            "resume after kill at {cut} records diverged"
        );
    }

    // Resume re-evaluates nothing: records stay unique per step.
    let records = read_history(&path_a).unwrap();
    let mut steps: Vec<u64> = records.iter().map(|r| r.step).collect();
    steps.dedup();
    assert_eq!(steps.len(), 60);
    println!(
        "criterion 8: PASS — byte-identical reruns; resume after kills at 13/20/41 of 60 \
         records reproduces the uninterrupted history"
    );
}

// ---------------------------------------------------------------------------
// 9. Round-trips: genome codec identity and graph export stability.
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_roundtrips() {
    for preset in Preset::ALL {
        let space = SearchSpaceDef::preset(preset);
        for seed in 0..1000u64 {
            let genome = sample_uniform(&space, seed);
            let cell = decode_genome(&genome, &space, &PlanParams::default()).unwrap();
            let report = mnasfpn_core::validate_cell(&cell, &space);
            assert!(report.is_empty(), "{preset} seed {seed}: {report}");
            let back = encode_genome(&cell, &space).unwrap();
            assert_eq!(genome, back, "{preset} seed {seed}");
        }
        for seed in 0..5u64 {
            let genome = sample_uniform(&space, seed);
            let cell = decode_genome(&genome, &space, &PlanParams::default()).unwrap();
            let graph = expand_network(
                &NetworkPlan::new(cell, 2, space.flavor),
                space.sdo_enabled,
            )
            .unwrap();
            let text = write_graph_text(&graph);
            let reparsed = parse_graph_text(&text).unwrap();
            assert_eq!(write_graph_text(&reparsed), text, "{preset} seed {seed}");
            assert_eq!(reparsed, graph);
        }
    }
    // LUT files re-serialize stably too.
    let space = SearchSpaceDef::preset(Preset::MnasFpn);
    let model = LatencyModel { noise_fraction: 0.15, seed: 3, ..LatencyModel::default() };
    let lut = synth_lut_for_space(&space, 320, &model, 111.5).unwrap();
    let text = lut.write_text();
    assert_eq!(LatencyTable::parse_text(&text, "t").unwrap().write_text(), text);
    println!(
        "criterion 9: PASS — encode/decode identity over 1000 samples x 4 presets; graph and \
         LUT exports stable under re-serialization"
    );
}
