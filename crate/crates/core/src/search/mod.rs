//! Latency-aware search: reward shaping, the controller loop with a
//! resumable history, Pareto frontier extraction, target-latency selection
//! and repeat sweeps.

mod controller;
mod history;

pub use controller::{
    make_controller, Controller, ControllerKind, EvolutionConfig, EvolutionController,
    PolicyConfig, PolicyGradientController, RandomController,
};
pub use history::{append_records, read_history, render_record, HistoryRecord};

use std::fs::OpenOptions;
use std::path::PathBuf;
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arch::{decode_genome, expand_network, NetworkPlan, PlanParams, ResolvedGraph};
use crate::cost::{estimate_latency, LatencyTable};
use crate::error::{Error, Result};
use crate::evaluator::{EvalStatus, Evaluator};
use crate::space::{token_schema, Genome, SearchSpaceDef};
use crate::util::StableMix;

/// Reward shaping: `quality * latency^w` with `w <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// The latency exponent w; more negative trades accuracy for speed.
    pub latency_exponent: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig { latency_exponent: -0.3 }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latency_exponent > 0.0 || !self.latency_exponent.is_finite() {
            return Err(Error::Config(format!(
                "latency exponent must be <= 0, got {}",
                self.latency_exponent
            )));
        }
        Ok(())
    }
}

/// `quality * latency_ms^w`; latency must be positive.
pub fn reward(quality: f64, latency_ms: f64, config: &RewardConfig) -> Result<f64> {
    if latency_ms.is_nan() || latency_ms <= 0.0 {
        return Err(Error::NonPositiveLatency(latency_ms));
    }
    Ok(quality * latency_ms.powf(config.latency_exponent))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateMeta {
    pub step: u64,
    pub repeats: u32,
    pub seed: u64,
}

/// An evaluated architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub genome: Genome,
    pub quality: f64,
    pub latency_ms: f64,
    pub reward: f64,
    pub meta: CandidateMeta,
}

/// Pareto-nondominated candidates, ascending in latency; quality strictly
/// increases along the frontier.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Frontier {
    members: Vec<Candidate>,
}

impl Frontier {
    pub fn members(&self) -> &[Candidate] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Tabular export: latency, quality, reward, candidate id (step).
    pub fn to_table(&self) -> String {
        let mut out = String::from("latency_ms\tquality\treward\tstep\tgenome\n");
        for c in &self.members {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                c.latency_ms, c.quality, c.reward, c.meta.step, c.genome
            ));
        }
        out
    }
}

/// Extract the candidates not dominated in (latency, quality); a candidate
/// dominates another when it is no slower and no worse, and strictly better
/// on at least one axis. Exact ties keep the earliest-seen candidate.
pub fn pareto_frontier(candidates: &[Candidate]) -> Frontier {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[a]
            .latency_ms
            .total_cmp(&candidates[b].latency_ms)
            .then(candidates[b].quality.total_cmp(&candidates[a].quality))
            .then(a.cmp(&b))
    });
    let mut members: Vec<Candidate> = Vec::new();
    for idx in order {
        let c = &candidates[idx];
        let dominated = members
            .last()
            .is_some_and(|best| best.quality >= c.quality);
        if !dominated {
            members.push(c.clone());
        }
    }
    Frontier { members }
}

/// For each target, the frontier member with the highest quality among
/// those with latency at or below the target; `None` where no member
/// qualifies.
pub fn select_at_latency<'a>(
    frontier: &'a Frontier,
    targets: &[f64],
) -> Vec<(f64, Option<&'a Candidate>)> {
    targets
        .iter()
        .map(|&target| {
            let pick = frontier
                .members
                .iter()
                .take_while(|c| c.latency_ms <= target)
                .last();
            (target, pick)
        })
        .collect()
}

/// Full configuration of one search run.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub space: SearchSpaceDef,
    /// Total candidates to evaluate.
    pub budget: u64,
    /// Candidates per controller update.
    pub batch_size: u64,
    pub controller: ControllerKind,
    pub policy: PolicyConfig,
    pub evolution: EvolutionConfig,
    pub reward: RewardConfig,
    pub seed: u64,
    /// Cell repeats used when realizing candidates.
    pub repeats: u32,
    pub input_image_size: u32,
    /// Worker threads for candidate evaluation. History files are written
    /// in step order regardless; full determinism is guaranteed at 1.
    pub parallelism: usize,
    /// Append-only history log; enables resume. In-memory only when unset.
    pub history_path: Option<PathBuf>,
}

impl SearchConfig {
    pub fn new(space: SearchSpaceDef) -> SearchConfig {
        SearchConfig {
            space,
            budget: 200,
            batch_size: 25,
            controller: ControllerKind::PolicyGradient,
            policy: PolicyConfig::default(),
            evolution: EvolutionConfig::default(),
            reward: RewardConfig::default(),
            seed: 0,
            repeats: 1,
            input_image_size: 320,
            parallelism: 1,
            history_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        self.reward.validate()?;
        if self.batch_size < 1 || self.budget < self.batch_size {
            return Err(Error::Config(format!(
                "budget ({}) must be >= batch size ({}) >= 1",
                self.budget, self.batch_size
            )));
        }
        if self.repeats < 1 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        if self.parallelism < 1 {
            return Err(Error::Config("parallelism must be >= 1".into()));
        }
        Ok(())
    }
}

/// Everything a finished (or resumed) run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub history: Vec<HistoryRecord>,
    pub frontier: Frontier,
}

/// Derive the per-step RNG: proposals depend only on (seed, step) and the
/// controller state, which is what makes interrupted runs resumable.
fn step_rng(seed: u64, step: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(StableMix::new(seed).mix_u64(step).finish())
}

fn candidate_id(seed: u64, step: u64) -> String {
    format!("s{seed}-{step:06}")
}

/// Decode, expand, cost and score one genome. Evaluator failures become
/// failed records; infrastructure errors (decode, expansion, LUT miss)
/// abort the run.
fn evaluate_candidate(
    config: &SearchConfig,
    evaluator: &dyn Evaluator,
    lut: &LatencyTable,
    step: u64,
    genome: &Genome,
) -> Result<HistoryRecord> {
    let graph = realize(&config.space, genome, config.repeats, config.input_image_size)?;
    let latency_ms = estimate_latency(&graph, lut)?.total_ms;
    let id = candidate_id(config.seed, step);
    let evaluation = evaluator.evaluate(&id, genome, &graph, latency_ms);

    let record = match evaluation.status {
        EvalStatus::Ok => {
            if !(0.0..=1.0).contains(&evaluation.quality) || !evaluation.quality.is_finite() {
                HistoryRecord {
                    step,
                    genome: genome.tokens.clone(),
                    repeats: config.repeats,
                    status: "failed".into(),
                    quality: None,
                    latency_ms: Some(latency_ms),
                    reward: None,
                    error: Some(format!("quality {} out of range [0,1]", evaluation.quality)),
                }
            } else {
                let reward = reward(evaluation.quality, latency_ms, &config.reward)?;
                HistoryRecord {
                    step,
                    genome: genome.tokens.clone(),
                    repeats: config.repeats,
                    status: "ok".into(),
                    quality: Some(evaluation.quality),
                    latency_ms: Some(latency_ms),
                    reward: Some(reward),
                    error: None,
                }
            }
        }
        EvalStatus::Failed(message) => HistoryRecord {
            step,
            genome: genome.tokens.clone(),
            repeats: config.repeats,
            status: "failed".into(),
            quality: None,
            latency_ms: Some(latency_ms),
            reward: None,
            error: Some(message),
        },
    };
    Ok(record)
}

fn realize(
    space: &SearchSpaceDef,
    genome: &Genome,
    repeats: u32,
    input_image_size: u32,
) -> Result<ResolvedGraph> {
    let params = PlanParams { input_image_size, repeats };
    let cell = decode_genome(genome, space, &params)?;
    expand_network(&NetworkPlan::new(cell, repeats, space.flavor), space.sdo_enabled)
}

fn ok_pairs(records: &[HistoryRecord]) -> Vec<(Genome, f64)> {
    records
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| (Genome::new(r.genome.clone()), r.reward.expect("ok record has reward")))
        .collect()
}

fn record_to_candidate(record: &HistoryRecord, seed: u64) -> Candidate {
    Candidate {
        genome: Genome::new(record.genome.clone()),
        quality: record.quality.expect("ok record has quality"),
        latency_ms: record.latency_ms.expect("ok record has latency"),
        reward: record.reward.expect("ok record has reward"),
        meta: CandidateMeta { step: record.step, repeats: record.repeats, seed },
    }
}

/// Evaluate a contiguous span of proposed genomes, optionally across a
/// worker pool; results come back in step order either way.
fn evaluate_span(
    config: &SearchConfig,
    evaluator: &dyn Evaluator,
    lut: &LatencyTable,
    first_step: u64,
    genomes: &[Genome],
) -> Result<Vec<HistoryRecord>> {
    let workers = config.parallelism.min(genomes.len().max(1));
    if workers <= 1 {
        return genomes
            .iter()
            .enumerate()
            .map(|(i, g)| evaluate_candidate(config, evaluator, lut, first_step + i as u64, g))
            .collect();
    }

    let slots: Mutex<Vec<Option<Result<HistoryRecord>>>> =
        Mutex::new((0..genomes.len()).map(|_| None).collect());
    let next: Mutex<usize> = Mutex::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = {
                    let mut guard = next.lock().unwrap();
                    let i = *guard;
                    if i >= genomes.len() {
                        return;
                    }
                    *guard += 1;
                    i
                };
                let result =
                    evaluate_candidate(config, evaluator, lut, first_step + i as u64, &genomes[i]);
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("worker filled every slot"))
        .collect()
}

/// Run (or resume) a search. Exactly `budget` candidates end up recorded;
/// the controller is updated after every complete batch; the frontier is
/// computed over the full ok history.
///
/// When the history file already holds records, they are replayed into the
/// controller instead of re-evaluated, and the run continues from the next
/// step; identical configurations therefore produce identical final
/// candidate sets whether or not they were interrupted.
pub fn run_search(
    config: &SearchConfig,
    evaluator: &dyn Evaluator,
    lut: &LatencyTable,
) -> Result<SearchOutcome> {
    config.validate()?;
    let schema = token_schema(&config.space);

    let mut records: Vec<HistoryRecord> = match &config.history_path {
        Some(path) if path.exists() => read_history(path)?,
        _ => Vec::new(),
    };
    if records.len() as u64 > config.budget {
        return Err(Error::Config(format!(
            "history already holds {} records, beyond the budget of {}",
            records.len(),
            config.budget
        )));
    }
    // The manifest is the authoritative binding between a history file and
    // its space; this schema check catches accidental mixups early.
    for record in &records {
        if let Err(e) = schema.check(&config.space.name, &Genome::new(record.genome.clone())) {
            return Err(Error::Config(format!(
                "history record {} does not fit space `{}` ({e}); \
                 refusing to resume against a different space",
                record.step, config.space.name,
            )));
        }
    }

    let mut writer = match &config.history_path {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            Some(OpenOptions::new().create(true).append(true).open(path)?)
        }
        None => None,
    };

    let mut controller = make_controller(
        config.controller,
        schema.clone(),
        config.policy,
        config.evolution,
    );

    let batch = config.batch_size;
    let mut batch_start = 0u64;
    while batch_start < config.budget {
        let batch_end = (batch_start + batch).min(config.budget);
        let done = records.len() as u64;

        if batch_end > done {
            let first_new = done.max(batch_start);
            let mut genomes = Vec::with_capacity((batch_end - first_new) as usize);
            for step in first_new..batch_end {
                let mut rng = step_rng(config.seed, step);
                genomes.push(controller.propose(&mut rng));
            }
            let new_records = evaluate_span(config, evaluator, lut, first_new, &genomes)?;
            if let Some(w) = writer.as_mut() {
                append_records(w, &new_records)?;
            }
            records.extend(new_records);
        }

        // Update only on complete batches; a trailing partial batch (budget
        // not divisible by batch size) leaves the policy untouched.
        if batch_end - batch_start == batch {
            controller.observe(&ok_pairs(&records[batch_start as usize..batch_end as usize]));
        }
        batch_start = batch_end;
    }

    let candidates: Vec<Candidate> = records
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| record_to_candidate(r, config.seed))
        .collect();
    Ok(SearchOutcome { history: records, frontier: pareto_frontier(&candidates) })
}

/// Result of re-costing frontier picks at different repeat counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// One candidate per (base, repeats) pair, in input order.
    pub candidates: Vec<Candidate>,
    /// Frontier over the sweep results.
    pub frontier: Frontier,
}

/// Re-expand, re-cost and re-evaluate each base candidate at every repeat
/// count, then extract the frontier of the union.
pub fn sweep_repeats(
    bases: &[Candidate],
    repeats_list: &[u32],
    space: &SearchSpaceDef,
    input_image_size: u32,
    evaluator: &dyn Evaluator,
    lut: &LatencyTable,
    reward_config: &RewardConfig,
) -> Result<SweepOutcome> {
    if repeats_list.iter().any(|&r| r < 1) {
        return Err(Error::Config("repeats must be >= 1".into()));
    }
    let mut candidates = Vec::with_capacity(bases.len() * repeats_list.len());
    for base in bases {
        for &repeats in repeats_list {
            let graph = realize(space, &base.genome, repeats, input_image_size)?;
            let latency_ms = estimate_latency(&graph, lut)?.total_ms;
            let id = format!("sweep-{}-r{repeats}", base.meta.step);
            let evaluation = evaluator.evaluate(&id, &base.genome, &graph, latency_ms);
            match evaluation.status {
                EvalStatus::Ok => {
                    let reward = reward(evaluation.quality, latency_ms, reward_config)?;
                    candidates.push(Candidate {
                        genome: base.genome.clone(),
                        quality: evaluation.quality,
                        latency_ms,
                        reward,
                        meta: CandidateMeta {
                            step: base.meta.step,
                            repeats,
                            seed: base.meta.seed,
                        },
                    });
                }
                EvalStatus::Failed(message) => {
                    return Err(Error::Config(format!("sweep evaluation failed for {id}: {message}")))
                }
            }
        }
    }
    let frontier = pareto_frontier(&candidates);
    Ok(SweepOutcome { candidates, frontier })
}
