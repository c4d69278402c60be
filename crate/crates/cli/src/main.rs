//! Batch command-line surface for the search engine: searching, sampling,
//! costing, cardinality, SDO verification and exports.

mod manifest;

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use manifest::RunManifest;
use mnasfpn_core::arch::{
    decode_genome, expand_network, write_graph_dot, write_graph_text, FeatureSpec, NetworkPlan,
    PlanParams,
};
use mnasfpn_core::cost::{
    cost_report, merge_path_madds, synth_lut, synth_lut_for_space, LatencyModel, LatencyTable,
};
use mnasfpn_core::evaluator::{
    Evaluator, ExchangeConfig, ExchangeEvaluator, SurrogateEvaluator, SurrogateSpec,
};
use mnasfpn_core::search::{
    pareto_frontier, read_history, run_search, select_at_latency, sweep_repeats,
    Candidate, CandidateMeta, ControllerKind, Frontier, HistoryRecord, RewardConfig, SearchConfig,
};
use mnasfpn_core::space::{
    cardinality, read_genome_file, sample_uniform, write_genome_file, Genome, Preset,
    SearchSpaceDef,
};

#[derive(Parser)]
#[command(
    name = "mnasfpn",
    version,
    about = "Latency-aware architecture search for feature-pyramid detection heads"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a latency-aware architecture search.
    Search(Box<SearchArgs>),
    /// Sample genomes uniformly from a space.
    Sample(SampleArgs),
    /// Cost genomes: MAdds, parameters and (with a table) latency.
    Cost(CostArgs),
    /// Print the exact size of a search space.
    Cardinality(CardinalityArgs),
    /// Recompute the Pareto frontier from a history file.
    Frontier(FrontierArgs),
    /// Pick the best frontier candidates at target latencies.
    Select(SelectArgs),
    /// Re-cost and re-evaluate picked candidates across repeat counts.
    SweepRepeats(SweepRepeatsArgs),
    /// Export a genome's operator graph as structured text or DOT.
    Export(ExportArgs),
    /// Exhaustively verify the size-dependent-ordering cost rule.
    VerifySdo(VerifySdoArgs),
    /// Latency lookup table tools.
    Lut(LutArgs),
}

/// Resolve `--space`: a preset name or a path to a space JSON file.
fn load_space(spec: &str) -> Result<SearchSpaceDef> {
    if let Ok(space) = SearchSpaceDef::from_preset_name(spec) {
        return Ok(space);
    }
    let path = Path::new(spec);
    if path.exists() {
        return Ok(SearchSpaceDef::load(path)?);
    }
    bail!(
        "`{spec}` is neither a preset ({}) nor an existing space file",
        Preset::ALL.map(|p| p.name()).join(", ")
    );
}

#[derive(Args, Clone)]
struct EvaluatorArgs {
    /// Quality signal: `surrogate` or `exchange`.
    #[arg(long, default_value = "surrogate")]
    evaluator: String,
    /// Exchange directory for `--evaluator exchange`.
    #[arg(long)]
    exchange_dir: Option<PathBuf>,
    /// Response timeout for the exchange protocol.
    #[arg(long, default_value_t = 3_600_000)]
    timeout_ms: u64,
    /// Poll interval for the exchange protocol.
    #[arg(long, default_value_t = 100)]
    poll_ms: u64,
    /// Seed of the surrogate's planted optimum; defaults to --seed.
    #[arg(long)]
    surrogate_seed: Option<u64>,
}

struct BoundEvaluator {
    evaluator: Box<dyn Evaluator>,
    /// `surrogate` or `exchange:<dir>`, for the manifest.
    description: String,
    surrogate: Option<SurrogateSpec>,
}

impl EvaluatorArgs {
    fn bind(&self, space: &SearchSpaceDef, default_seed: u64) -> Result<BoundEvaluator> {
        match self.evaluator.as_str() {
            "surrogate" => {
                let spec =
                    SurrogateSpec::planted(space, self.surrogate_seed.unwrap_or(default_seed));
                Ok(BoundEvaluator {
                    evaluator: Box::new(SurrogateEvaluator { spec: spec.clone() }),
                    description: "surrogate".to_string(),
                    surrogate: Some(spec),
                })
            }
            "exchange" => {
                let dir = self
                    .exchange_dir
                    .clone()
                    .ok_or_else(|| anyhow!("--evaluator exchange requires --exchange-dir"))?;
                let config = ExchangeConfig {
                    dir: dir.clone(),
                    timeout: Duration::from_millis(self.timeout_ms),
                    poll_interval: Duration::from_millis(self.poll_ms),
                };
                Ok(BoundEvaluator {
                    evaluator: Box::new(ExchangeEvaluator { config }),
                    description: format!("exchange:{}", dir.display()),
                    surrogate: None,
                })
            }
            other => bail!("unknown evaluator `{other}` (expected `surrogate` or `exchange`)"),
        }
    }
}

fn bind_from_manifest(m: &RunManifest) -> Result<BoundEvaluator> {
    match m.evaluator.as_deref() {
        Some("surrogate") | None => {
            let spec = m
                .surrogate
                .clone()
                .ok_or_else(|| anyhow!("manifest lacks the surrogate section"))?;
            Ok(BoundEvaluator {
                evaluator: Box::new(SurrogateEvaluator { spec: spec.clone() }),
                description: "surrogate".to_string(),
                surrogate: Some(spec),
            })
        }
        Some(desc) => {
            let dir = desc
                .strip_prefix("exchange:")
                .ok_or_else(|| anyhow!("unknown evaluator `{desc}` in manifest"))?;
            Ok(BoundEvaluator {
                evaluator: Box::new(ExchangeEvaluator {
                    config: ExchangeConfig::new(PathBuf::from(dir)),
                }),
                description: desc.to_string(),
                surrogate: None,
            })
        }
    }
}

#[derive(Args)]
struct SearchArgs {
    /// Search space preset name or space JSON path.
    #[arg(long, required_unless_present = "from_manifest")]
    space: Option<String>,
    /// Reproduce a previous run from its manifest; other flags are ignored.
    #[arg(long)]
    from_manifest: Option<PathBuf>,
    /// Total candidates to evaluate.
    #[arg(long, default_value_t = 200)]
    budget: u64,
    /// Candidates per controller update.
    #[arg(long, default_value_t = 25)]
    batch_size: u64,
    /// Controller: policy-gradient, random or evolution.
    #[arg(long, default_value = "policy-gradient")]
    controller: String,
    /// Latency exponent w of the reward (w <= 0).
    #[arg(long, default_value_t = -0.3, allow_negative_numbers = true)]
    w: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Latency lookup table file.
    #[arg(long, required_unless_present = "from_manifest")]
    lut: Option<PathBuf>,
    /// Append-only history log (JSONL); an existing file is resumed.
    #[arg(long, required_unless_present = "from_manifest")]
    history: Option<PathBuf>,
    /// Cell repeats when realizing candidates.
    #[arg(long, default_value_t = 1)]
    repeats: u32,
    /// Input image side length in pixels.
    #[arg(long, default_value_t = 320)]
    image: u32,
    /// Worker threads for evaluation; determinism is guaranteed at 1.
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    /// Policy-gradient learning rate.
    #[arg(long, default_value_t = 0.15)]
    lr: f64,
    /// Policy-gradient entropy bonus weight.
    #[arg(long, default_value_t = 0.01)]
    entropy_weight: f64,
    #[command(flatten)]
    evaluator: EvaluatorArgs,
    /// Also write the final frontier table to this file.
    #[arg(long)]
    frontier_out: Option<PathBuf>,
}

fn cmd_search(args: &SearchArgs) -> Result<()> {
    let (config, bound, lut_path, frontier_out);
    if let Some(manifest_path) = &args.from_manifest {
        let m = RunManifest::load(manifest_path)?;
        bound = bind_from_manifest(&m)?;
        lut_path = m.lut.clone().ok_or_else(|| anyhow!("manifest lacks a lut path"))?;
        frontier_out = None;
        let space = m
            .space
            .clone()
            .ok_or_else(|| anyhow!("manifest lacks a space definition"))?;
        let mut c = SearchConfig::new(space);
        c.budget = m.budget.unwrap_or(c.budget);
        c.batch_size = m.batch_size.unwrap_or(c.batch_size);
        c.controller = m
            .controller
            .as_deref()
            .unwrap_or("policy-gradient")
            .parse::<ControllerKind>()?;
        c.reward = RewardConfig {
            latency_exponent: m.latency_exponent.unwrap_or(-0.3),
        };
        c.seed = m.seed.unwrap_or(0);
        c.repeats = m.repeats.as_deref().and_then(|r| r.first().copied()).unwrap_or(1);
        c.input_image_size = m.input_image_size.unwrap_or(320);
        c.parallelism = m.parallelism.unwrap_or(1);
        c.history_path = Some(m.history.clone().ok_or_else(|| anyhow!("manifest lacks a history path"))?);
        config = c;
    } else {
        let space = load_space(args.space.as_deref().expect("clap enforces --space"))?;
        bound = args.evaluator.bind(&space, args.seed)?;
        lut_path = args.lut.clone().expect("clap enforces --lut");
        frontier_out = args.frontier_out.clone();
        let mut c = SearchConfig::new(space);
        c.budget = args.budget;
        c.batch_size = args.batch_size;
        c.controller = args.controller.parse::<ControllerKind>()?;
        c.reward = RewardConfig { latency_exponent: args.w };
        c.seed = args.seed;
        c.repeats = args.repeats;
        c.input_image_size = args.image;
        c.parallelism = args.parallelism;
        c.policy.learning_rate = args.lr;
        c.policy.entropy_weight = args.entropy_weight;
        c.history_path = Some(args.history.clone().expect("clap enforces --history"));
        config = c;
    }

    let history_path = config.history_path.clone().unwrap();
    let lut = LatencyTable::load(&lut_path)?;

    let mut m = RunManifest::new("search", config.space.clone());
    m.seed = Some(config.seed);
    m.budget = Some(config.budget);
    m.batch_size = Some(config.batch_size);
    m.controller = Some(config.controller.to_string());
    m.latency_exponent = Some(config.reward.latency_exponent);
    m.repeats = Some(vec![config.repeats]);
    m.input_image_size = Some(config.input_image_size);
    m.parallelism = Some(config.parallelism);
    m.lut = Some(lut_path.clone());
    m.evaluator = Some(bound.description.clone());
    m.surrogate = bound.surrogate.clone();
    m.history = Some(history_path.clone());
    m.outputs = std::iter::once(history_path.clone())
        .chain(frontier_out.clone())
        .collect();
    m.write_next_to(&history_path)?;

    let outcome = run_search(&config, bound.evaluator.as_ref(), &lut)?;
    let ok = outcome.history.iter().filter(|r| r.is_ok()).count();
    let best = outcome
        .history
        .iter()
        .filter_map(|r| r.reward)
        .fold(f64::NEG_INFINITY, f64::max);
    println!(
        "evaluated {} candidates ({} ok, {} failed); best reward {:.6}",
        outcome.history.len(),
        ok,
        outcome.history.len() - ok,
        best
    );
    println!("frontier ({} members):", outcome.frontier.len());
    print!("{}", outcome.frontier.to_table());
    if let Some(path) = &frontier_out {
        std::fs::write(path, outcome.frontier.to_table())?;
        println!("frontier table written to {}", path.display());
    }
    println!("history written to {}", history_path.display());
    Ok(())
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    space: String,
    /// Seed of the first genome; genome i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Output genome file (one token sequence per line); stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_sample(args: &SampleArgs) -> Result<()> {
    let space = load_space(&args.space)?;
    let genomes: Vec<Genome> = (0..args.count)
        .map(|i| sample_uniform(&space, args.seed + i))
        .collect();
    match &args.out {
        Some(path) => {
            write_genome_file(path, &genomes)?;
            let mut m = RunManifest::new("sample", space);
            m.seed = Some(args.seed);
            m.outputs = vec![path.clone()];
            m.write_next_to(path)?;
            println!("{} genomes written to {}", genomes.len(), path.display());
        }
        None => {
            for g in &genomes {
                println!("{g}");
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SdoMode {
    On,
    Off,
}

#[derive(Args)]
struct CostArgs {
    #[arg(long)]
    space: String,
    /// Genome file to cost.
    #[arg(long)]
    genome_file: PathBuf,
    /// Genome line to cost in detail; with several genomes and no index, a
    /// summary row is printed per genome.
    #[arg(long)]
    index: Option<usize>,
    #[arg(long, default_value_t = 1)]
    repeats: u32,
    #[arg(long, default_value_t = 320)]
    image: u32,
    /// Latency lookup table; omit to report MAdds/params only.
    #[arg(long)]
    lut: Option<PathBuf>,
    /// Override the space's size-dependent-ordering flag.
    #[arg(long, value_enum)]
    sdo: Option<SdoMode>,
    /// Write the per-node table to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn realize_genome(
    space: &SearchSpaceDef,
    genome: &Genome,
    repeats: u32,
    image: u32,
    sdo: Option<SdoMode>,
) -> Result<mnasfpn_core::ResolvedGraph> {
    let params = PlanParams { input_image_size: image, repeats };
    let cell = decode_genome(genome, space, &params)?;
    let sdo_enabled = match sdo {
        Some(SdoMode::On) => true,
        Some(SdoMode::Off) => false,
        None => space.sdo_enabled,
    };
    Ok(expand_network(&NetworkPlan::new(cell, repeats, space.flavor), sdo_enabled)?)
}

fn cmd_cost(args: &CostArgs) -> Result<()> {
    let space = load_space(&args.space)?;
    let genomes = read_genome_file(&args.genome_file)?;
    if genomes.is_empty() {
        bail!("{} contains no genomes", args.genome_file.display());
    }
    let lut = args.lut.as_deref().map(LatencyTable::load).transpose()?;

    if genomes.len() > 1 && args.index.is_none() {
        println!("genome\tmadds\tparams\tlatency_ms");
        for (i, genome) in genomes.iter().enumerate() {
            let graph = realize_genome(&space, genome, args.repeats, args.image, args.sdo)?;
            let report = cost_report(&graph, lut.as_ref())?;
            let ms = report
                .latency_ms
                .map(|v| v.to_string())
                .unwrap_or_else(|| "-".to_string());
            println!("{i}\t{}\t{}\t{ms}", report.madds, report.params);
        }
        return Ok(());
    }

    let index = args.index.unwrap_or(0);
    let genome = genomes
        .get(index)
        .ok_or_else(|| anyhow!("genome index {index} out of range ({} genomes)", genomes.len()))?;
    let graph = realize_genome(&space, genome, args.repeats, args.image, args.sdo)?;
    let report = cost_report(&graph, lut.as_ref())?;
    let table = report.to_table();
    match &args.out {
        Some(path) => {
            std::fs::write(path, &table)?;
            let mut m = RunManifest::new("cost", space);
            m.repeats = Some(vec![args.repeats]);
            m.input_image_size = Some(args.image);
            m.lut = args.lut.clone();
            m.outputs = vec![path.clone()];
            m.write_next_to(path)?;
            println!("cost table written to {}", path.display());
        }
        None => print!("{table}"),
    }
    println!(
        "total: {} MAdds, {} params{}",
        report.madds,
        report.params,
        report
            .latency_ms
            .map(|v| format!(", {v:.3} ms"))
            .unwrap_or_default()
    );
    Ok(())
}

#[derive(Args)]
struct CardinalityArgs {
    #[arg(long)]
    space: String,
}

fn cmd_cardinality(args: &CardinalityArgs) -> Result<()> {
    let space = load_space(&args.space)?;
    let exact = cardinality(&space);
    println!("space: {}", space.name);
    println!("cardinality: {exact}");
    if let Ok(preset) = args.space.parse::<Preset>() {
        let quoted = preset.quoted_size_estimate();
        let approx: f64 = exact.to_string().parse().unwrap_or(f64::INFINITY);
        println!("quoted estimate: {quoted:.1e} (exact / quoted = {:.4})", approx / quoted);
    }
    Ok(())
}

fn candidates_from_records(records: &[HistoryRecord]) -> Vec<Candidate> {
    records
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| Candidate {
            genome: Genome::new(r.genome.clone()),
            quality: r.quality.unwrap(),
            latency_ms: r.latency_ms.unwrap(),
            reward: r.reward.unwrap(),
            meta: CandidateMeta { step: r.step, repeats: r.repeats, seed: 0 },
        })
        .collect()
}

fn frontier_from_history(path: &Path) -> Result<(Vec<Candidate>, Frontier)> {
    let records = read_history(path)?;
    let candidates = candidates_from_records(&records);
    if candidates.is_empty() {
        bail!("{} holds no successful evaluations", path.display());
    }
    let frontier = pareto_frontier(&candidates);
    Ok((candidates, frontier))
}

#[derive(Args)]
struct FrontierArgs {
    /// History file to recompute the frontier from.
    #[arg(long)]
    history: PathBuf,
    /// Write the frontier table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_frontier(args: &FrontierArgs) -> Result<()> {
    let (candidates, frontier) = frontier_from_history(&args.history)?;
    let table = frontier.to_table();
    match &args.out {
        Some(path) => {
            std::fs::write(path, &table)?;
            let mut m = RunManifest::bare("frontier");
            m.history = Some(args.history.clone());
            m.outputs = vec![path.clone()];
            m.write_next_to(path)?;
            println!(
                "frontier of {} candidates ({} members) written to {}",
                candidates.len(),
                frontier.len(),
                path.display()
            );
        }
        None => print!("{table}"),
    }
    Ok(())
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    history: PathBuf,
    /// Target latencies in ms, e.g. `--targets 166,173,180`.
    #[arg(long, value_delimiter = ',', required = true)]
    targets: Vec<f64>,
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    let (_, frontier) = frontier_from_history(&args.history)?;
    println!("target_ms\tstep\tlatency_ms\tquality\treward\tgenome");
    for (target, pick) in select_at_latency(&frontier, &args.targets) {
        match pick {
            Some(c) => println!(
                "{target}\t{}\t{}\t{}\t{}\t{}",
                c.meta.step, c.latency_ms, c.quality, c.reward, c.genome
            ),
            None => println!("{target}\t-\t-\t-\t-\t-"),
        }
    }
    Ok(())
}

#[derive(Args)]
struct SweepRepeatsArgs {
    #[arg(long)]
    space: String,
    #[arg(long)]
    history: PathBuf,
    /// Pick frontier candidates at these target latencies.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<f64>>,
    /// Or pick history records by step.
    #[arg(long, value_delimiter = ',')]
    steps: Option<Vec<u64>>,
    /// Repeat counts to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [3u32, 4, 5])]
    repeats: Vec<u32>,
    #[arg(long)]
    lut: PathBuf,
    #[arg(long, default_value_t = 320)]
    image: u32,
    /// Latency exponent w of the reward.
    #[arg(long, default_value_t = -0.3, allow_negative_numbers = true)]
    w: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    evaluator: EvaluatorArgs,
    /// Write the sweep table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_sweep_repeats(args: &SweepRepeatsArgs) -> Result<()> {
    let space = load_space(&args.space)?;
    let (candidates, frontier) = frontier_from_history(&args.history)?;

    let bases: Vec<Candidate> = match (&args.targets, &args.steps) {
        (Some(targets), None) => select_at_latency(&frontier, targets)
            .into_iter()
            .filter_map(|(_, pick)| pick.cloned())
            .collect(),
        (None, Some(steps)) => {
            let mut picked = Vec::new();
            for &step in steps {
                let c = candidates
                    .iter()
                    .find(|c| c.meta.step == step)
                    .ok_or_else(|| anyhow!("no successful record with step {step}"))?;
                picked.push(c.clone());
            }
            picked
        }
        _ => bail!("pass exactly one of --targets or --steps"),
    };
    // Several targets can resolve to the same frontier member; sweep each
    // base once.
    let mut bases = bases;
    let mut seen = Vec::new();
    bases.retain(|c| {
        let fresh = !seen.contains(&c.meta.step);
        seen.push(c.meta.step);
        fresh
    });
    if bases.is_empty() {
        bail!("no candidates qualify at the given targets");
    }

    let lut = LatencyTable::load(&args.lut)?;
    let bound = args.evaluator.bind(&space, args.seed)?;
    let reward_config = RewardConfig { latency_exponent: args.w };

    if let Some(path) = &args.out {
        let mut m = RunManifest::new("sweep-repeats", space.clone());
        m.seed = Some(args.seed);
        m.latency_exponent = Some(args.w);
        m.repeats = Some(args.repeats.clone());
        m.input_image_size = Some(args.image);
        m.lut = Some(args.lut.clone());
        m.evaluator = Some(bound.description.clone());
        m.surrogate = bound.surrogate.clone();
        m.history = Some(args.history.clone());
        m.outputs = vec![path.clone()];
        m.write_next_to(path)?;
    }

    let sweep = sweep_repeats(
        &bases,
        &args.repeats,
        &space,
        args.image,
        bound.evaluator.as_ref(),
        &lut,
        &reward_config,
    )?;

    let mut table = String::from("step\trepeats\tlatency_ms\tquality\treward\ton_frontier\n");
    for c in &sweep.candidates {
        let on_frontier = sweep
            .frontier
            .members()
            .iter()
            .any(|m| m.meta.step == c.meta.step && m.meta.repeats == c.meta.repeats);
        table.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            c.meta.step,
            c.meta.repeats,
            c.latency_ms,
            c.quality,
            c.reward,
            if on_frontier { "yes" } else { "no" }
        ));
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, &table)?;
            println!(
                "{} swept candidates ({} on the frontier) written to {}",
                sweep.candidates.len(),
                sweep.frontier.len(),
                path.display()
            );
        }
        None => print!("{table}"),
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExportFormat {
    Text,
    Dot,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    space: String,
    #[arg(long)]
    genome_file: PathBuf,
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long, value_enum, default_value_t = ExportFormat::Text)]
    format: ExportFormat,
    #[arg(long, default_value_t = 1)]
    repeats: u32,
    #[arg(long, default_value_t = 320)]
    image: u32,
    /// Override the space's size-dependent-ordering flag.
    #[arg(long, value_enum)]
    sdo: Option<SdoMode>,
    /// Output file; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_export(args: &ExportArgs) -> Result<()> {
    let space = load_space(&args.space)?;
    let genomes = read_genome_file(&args.genome_file)?;
    let genome = genomes.get(args.index).ok_or_else(|| {
        anyhow!("genome index {} out of range ({} genomes)", args.index, genomes.len())
    })?;
    let graph = realize_genome(&space, genome, args.repeats, args.image, args.sdo)?;
    let rendered = match args.format {
        ExportFormat::Text => write_graph_text(&graph),
        ExportFormat::Dot => write_graph_dot(&graph),
    };
    match &args.out {
        Some(path) => {
            std::fs::write(path, &rendered)?;
            let mut m = RunManifest::new("export", space);
            m.repeats = Some(vec![args.repeats]);
            m.input_image_size = Some(args.image);
            m.outputs = vec![path.clone()];
            m.write_next_to(path)?;
            println!("graph written to {}", path.display());
        }
        None => print!("{rendered}"),
    }
    Ok(())
}

#[derive(Args)]
struct VerifySdoArgs {
    /// Verification grid; only `default` is defined.
    #[arg(long, default_value = "default")]
    grid: String,
}

fn cmd_verify_sdo(args: &VerifySdoArgs) -> Result<()> {
    if args.grid != "default" {
        bail!("unknown grid `{}` (only `default` is defined)", args.grid);
    }
    let ratios = [2u32, 4, 8];
    let channels = [16u32, 32, 48, 64, 80, 96];
    let expansions = [16u32, 32, 64, 96, 128, 256, 512];
    let resolutions = [5u32, 10, 20, 40];
    let mut cases = 0u32;
    for k in ratios {
        for c in channels {
            for f in expansions {
                for r in resolutions {
                    let input = FeatureSpec { level: 3, resolution: r * k, channels: c };
                    let with_sdo = merge_path_madds(&input, r, f, true)?;
                    let without = merge_path_madds(&input, r, f, false)?;
                    if with_sdo.madds >= without.madds {
                        bail!(
                            "FAIL: k={k} C={c} F={f} R={r}: resize-first {} is not cheaper than \
                             conv-first {}",
                            with_sdo.madds,
                            without.madds
                        );
                    }
                    cases += 1;
                }
            }
        }
    }
    println!(
        "PASS: resize-then-conv strictly cheaper in all {cases} down-sampling cases \
         (k in {{2,4,8}}, C x F from the preset sets, R in {{5,10,20,40}})"
    );
    Ok(())
}

#[derive(Args)]
struct LutArgs {
    #[command(subcommand)]
    command: LutCommand,
}

#[derive(Subcommand)]
enum LutCommand {
    /// Generate a synthetic latency table for a space.
    Synth(LutSynthArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LutCoverage {
    /// Every signature the space can produce.
    Universe,
    /// Signatures appearing in a sample of decoded genomes.
    Sample,
}

#[derive(Args)]
struct LutSynthArgs {
    #[arg(long)]
    space: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 320)]
    image: u32,
    /// Proportionality constant, ms per MAdd.
    #[arg(long, default_value_t = 1e-6)]
    ms_per_madd: f64,
    /// Fixed per-op cost in ms.
    #[arg(long, default_value_t = 0.05)]
    fixed_ms: f64,
    /// Relative noise amplitude in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Seed of the noise term.
    #[arg(long, default_value_t = 0)]
    lut_seed: u64,
    /// Constant overhead in ms (backbone + predictor + runtime).
    #[arg(long, default_value_t = 120.0)]
    overhead: f64,
    #[arg(long, value_enum, default_value_t = LutCoverage::Universe)]
    coverage: LutCoverage,
    /// Genomes to sample for `--coverage sample`.
    #[arg(long, default_value_t = 256)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    sample_seed: u64,
    #[arg(long, default_value_t = 1)]
    repeats: u32,
}

fn cmd_lut_synth(args: &LutSynthArgs) -> Result<()> {
    let space = load_space(&args.space)?;
    if !(0.0..1.0).contains(&args.noise) {
        bail!("--noise must be in [0, 1)");
    }
    if args.ms_per_madd <= 0.0 || args.fixed_ms < 0.0 || args.overhead < 0.0 {
        bail!("latency model parameters must be positive");
    }
    let model = LatencyModel {
        ms_per_madd: args.ms_per_madd,
        fixed_ms_per_op: args.fixed_ms,
        noise_fraction: args.noise,
        seed: args.lut_seed,
    };
    let table = match args.coverage {
        LutCoverage::Universe => synth_lut_for_space(&space, args.image, &model, args.overhead)?,
        LutCoverage::Sample => {
            let graphs: Vec<_> = (0..args.samples)
                .map(|i| {
                    let genome = sample_uniform(&space, args.sample_seed + i);
                    realize_genome(&space, &genome, args.repeats, args.image, None)
                })
                .collect::<Result<_>>()?;
            synth_lut(&graphs, &model, args.overhead)
        }
    };
    table.save(&args.out)?;
    let mut m = RunManifest::new("lut-synth", space);
    m.seed = Some(args.lut_seed);
    m.input_image_size = Some(args.image);
    m.repeats = Some(vec![args.repeats]);
    m.outputs = vec![args.out.clone()];
    m.write_next_to(&args.out)?;
    println!(
        "latency table with {} entries (overhead {} ms) written to {}",
        table.len(),
        args.overhead,
        args.out.display()
    );
    Ok(())
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Search(args) => cmd_search(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Cost(args) => cmd_cost(args),
        Command::Cardinality(args) => cmd_cardinality(args),
        Command::Frontier(args) => cmd_frontier(args),
        Command::Select(args) => cmd_select(args),
        Command::SweepRepeats(args) => cmd_sweep_repeats(args),
        Command::Export(args) => cmd_export(args),
        Command::VerifySdo(args) => cmd_verify_sdo(args),
        Command::Lut(args) => match &args.command {
            LutCommand::Synth(synth) => cmd_lut_synth(synth),
        },
    }
}
