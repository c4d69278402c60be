//! Candidate-proposing controllers: clipped policy gradient over per-slot
//! categorical distributions, uniform random search, and regularized
//! evolution.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::space::{sample_with_rng, Genome, TokenSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    PolicyGradient,
    Random,
    Evolution,
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControllerKind::PolicyGradient => "policy-gradient",
            ControllerKind::Random => "random",
            ControllerKind::Evolution => "evolution",
        })
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ControllerKind, Error> {
        Ok(match s {
            "policy-gradient" => ControllerKind::PolicyGradient,
            "random" => ControllerKind::Random,
            "evolution" => ControllerKind::Evolution,
            other => return Err(Error::Config(format!("unknown controller `{other}`"))),
        })
    }
}

/// Proposes genomes and learns from evaluated batches. Proposals draw all
/// randomness from the rng handed in, so callers control determinism.
pub trait Controller: Send {
    fn propose(&mut self, rng: &mut ChaCha8Rng) -> Genome;

    /// Digest one completed batch of `(genome, reward)` pairs. Rewards must
    /// be finite; the batch may be empty if every evaluation failed.
    fn observe(&mut self, batch: &[(Genome, f64)]);
}

/// Hyperparameters of the clipped policy-gradient update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub learning_rate: f64,
    /// Clip width of the likelihood-ratio surrogate.
    pub clip_ratio: f64,
    pub entropy_weight: f64,
    /// Momentum of the moving-average reward baseline.
    pub baseline_momentum: f64,
    /// Gradient-ascent passes per batch.
    pub update_epochs: usize,
    /// Scale advantages by their batch standard deviation.
    pub normalize_advantages: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            learning_rate: 0.15,
            clip_ratio: 0.2,
            entropy_weight: 0.01,
            baseline_momentum: 0.7,
            update_epochs: 4,
            normalize_advantages: true,
        }
    }
}

/// Factorized categorical policy: one logit vector per genome slot, updated
/// by gradient ascent on the clipped-ratio surrogate with a moving-average
/// reward baseline and an entropy bonus.
pub struct PolicyGradientController {
    logits: Vec<Vec<f64>>,
    baseline: f64,
    config: PolicyConfig,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

impl PolicyGradientController {
    pub fn new(schema: TokenSchema, config: PolicyConfig) -> PolicyGradientController {
        let logits = schema
            .slots()
            .iter()
            .map(|slot| vec![0.0; slot.choices as usize])
            .collect();
        PolicyGradientController { logits, baseline: 0.0, config }
    }

    /// Current per-slot categorical distributions.
    pub fn slot_distributions(&self) -> Vec<Vec<f64>> {
        self.logits.iter().map(|l| softmax(l)).collect()
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }
}

impl Controller for PolicyGradientController {
    fn propose(&mut self, rng: &mut ChaCha8Rng) -> Genome {
        let tokens = self
            .logits
            .iter()
            .map(|logits| {
                let probs = softmax(logits);
                let mut u: f64 = rng.gen();
                for (token, &p) in probs.iter().enumerate() {
                    if u < p {
                        return token as u32;
                    }
                    u -= p;
                }
                (probs.len() - 1) as u32
            })
            .collect();
        Genome::new(tokens)
    }

    fn observe(&mut self, batch: &[(Genome, f64)]) {
        if batch.is_empty() {
            return;
        }
        debug_assert!(batch.iter().all(|(_, r)| r.is_finite()));
        let mean: f64 = batch.iter().map(|(_, r)| r).sum::<f64>() / batch.len() as f64;
        let m = self.config.baseline_momentum;
        self.baseline = m * self.baseline + (1.0 - m) * mean;

        let mut advantages: Vec<f64> = batch.iter().map(|(_, r)| r - self.baseline).collect();
        if self.config.normalize_advantages && batch.len() > 1 {
            let adv_mean = advantages.iter().sum::<f64>() / advantages.len() as f64;
            let var = advantages.iter().map(|a| (a - adv_mean).powi(2)).sum::<f64>()
                / advantages.len() as f64;
            let std = var.sqrt();
            if std > 1e-12 {
                for a in advantages.iter_mut() {
                    *a /= std;
                }
            }
        }

        // Behavior-policy probabilities of the chosen tokens, frozen at the
        // start of the update.
        let old_probs: Vec<Vec<f64>> = (0..self.logits.len())
            .map(|slot| {
                let probs = softmax(&self.logits[slot]);
                batch
                    .iter()
                    .map(|(g, _)| probs[g.tokens[slot] as usize])
                    .collect()
            })
            .collect();

        let clip_lo = 1.0 - self.config.clip_ratio;
        let clip_hi = 1.0 + self.config.clip_ratio;
        let scale = self.config.learning_rate / batch.len() as f64;

        for _ in 0..self.config.update_epochs {
            for (slot, logits) in self.logits.iter_mut().enumerate() {
                let probs = softmax(logits);
                let mut grad = vec![0.0; logits.len()];
                for (i, (genome, _)) in batch.iter().enumerate() {
                    let token = genome.tokens[slot] as usize;
                    let ratio = probs[token] / old_probs[slot][i];
                    let advantage = advantages[i];
                    let unclipped = ratio * advantage;
                    let clipped = ratio.clamp(clip_lo, clip_hi) * advantage;
                    // The surrogate is min(unclipped, clipped); gradient
                    // flows only while the unclipped branch is active.
                    if unclipped <= clipped {
                        for (k, g) in grad.iter_mut().enumerate() {
                            let indicator = if k == token { 1.0 } else { 0.0 };
                            *g += advantage * ratio * (indicator - probs[k]);
                        }
                    }
                }
                let entropy: f64 = -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>();
                for (k, logit) in logits.iter_mut().enumerate() {
                    let entropy_grad = -probs[k] * (probs[k].max(1e-300).ln() + entropy);
                    *logit += scale * grad[k]
                        + self.config.learning_rate * self.config.entropy_weight * entropy_grad;
                }
            }
        }
    }
}

/// Uniform random search.
pub struct RandomController {
    schema: TokenSchema,
}

impl RandomController {
    pub fn new(schema: TokenSchema) -> RandomController {
        RandomController { schema }
    }
}

impl Controller for RandomController {
    fn propose(&mut self, rng: &mut ChaCha8Rng) -> Genome {
        sample_with_rng(&self.schema, rng)
    }

    fn observe(&mut self, _batch: &[(Genome, f64)]) {}
}

/// Regularized-evolution hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    /// Sliding window of recent candidates that can parent a child.
    pub population_size: usize,
    /// Tournament entrants per proposal.
    pub tournament_size: usize,
    /// Token positions mutated per child.
    pub mutations: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig { population_size: 64, tournament_size: 8, mutations: 1 }
    }
}

/// Aging evolution: propose mutants of tournament winners drawn from a
/// sliding population window; the oldest members age out.
pub struct EvolutionController {
    schema: TokenSchema,
    config: EvolutionConfig,
    population: VecDeque<(Genome, f64)>,
}

impl EvolutionController {
    pub fn new(schema: TokenSchema, config: EvolutionConfig) -> EvolutionController {
        EvolutionController { schema, config, population: VecDeque::new() }
    }

    pub fn population_len(&self) -> usize {
        self.population.len()
    }
}

impl Controller for EvolutionController {
    fn propose(&mut self, rng: &mut ChaCha8Rng) -> Genome {
        if self.population.len() < self.config.population_size {
            return sample_with_rng(&self.schema, rng);
        }
        let mut best: Option<&(Genome, f64)> = None;
        for _ in 0..self.config.tournament_size {
            let pick = &self.population[rng.gen_range(0..self.population.len())];
            if best.is_none_or(|b| pick.1 > b.1) {
                best = Some(pick);
            }
        }
        let mut child = best.expect("non-empty population").0.clone();
        for _ in 0..self.config.mutations {
            let slot = rng.gen_range(0..self.schema.len());
            let choices = self.schema.slots()[slot].choices;
            if choices < 2 {
                continue;
            }
            let current = child.tokens[slot];
            let mut replacement = rng.gen_range(0..choices - 1) as u32;
            if replacement >= current {
                replacement += 1;
            }
            child.tokens[slot] = replacement;
        }
        child
    }

    fn observe(&mut self, batch: &[(Genome, f64)]) {
        for (genome, reward) in batch {
            self.population.push_back((genome.clone(), *reward));
        }
        while self.population.len() > self.config.population_size {
            self.population.pop_front();
        }
    }
}

/// Instantiate the controller named by the config.
pub fn make_controller(
    kind: ControllerKind,
    schema: TokenSchema,
    policy: PolicyConfig,
    evolution: EvolutionConfig,
) -> Box<dyn Controller> {
    match kind {
        ControllerKind::PolicyGradient => Box::new(PolicyGradientController::new(schema, policy)),
        ControllerKind::Random => Box::new(RandomController::new(schema)),
        ControllerKind::Evolution => Box::new(EvolutionController::new(schema, evolution)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{token_schema, Preset, SearchSpaceDef};
    use rand::SeedableRng;

    fn schema() -> TokenSchema {
        token_schema(&SearchSpaceDef::preset(Preset::MnasFpn))
    }

    fn distinct_pair(schema: &TokenSchema) -> (Genome, Genome) {
        let zeros = Genome::new(vec![0; schema.len()]);
        let ones = Genome::new(vec![1; schema.len()]);
        (zeros, ones)
    }

    #[test]
    fn positive_advantage_raises_token_probability() {
        let schema = schema();
        let mut ctl = PolicyGradientController::new(schema.clone(), PolicyConfig::default());
        let (hi, lo) = distinct_pair(&schema);
        let before = ctl.slot_distributions();
        ctl.observe(&[(hi.clone(), 1.0), (lo.clone(), 0.0), (lo.clone(), 0.0)]);
        let after = ctl.slot_distributions();
        for slot in 0..schema.len() {
            assert!(
                after[slot][0] > before[slot][0],
                "slot {slot}: p(high-reward token) did not increase"
            );
            assert!(after[slot][1] < before[slot][1]);
        }
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let schema = schema();
        let config = PolicyConfig { learning_rate: 0.0, ..PolicyConfig::default() };
        let mut ctl = PolicyGradientController::new(schema.clone(), config);
        let before = ctl.slot_distributions();
        let (hi, lo) = distinct_pair(&schema);
        ctl.observe(&[(hi, 1.0), (lo, 0.0)]);
        assert_eq!(ctl.slot_distributions(), before);
    }

    #[test]
    fn constant_batch_probability_is_monotone() {
        // Property of the clipped surrogate itself, so the entropy bonus
        // (which deliberately pushes back toward uniform) is off.
        let schema = schema();
        let config = PolicyConfig { entropy_weight: 0.0, ..PolicyConfig::default() };
        let mut ctl = PolicyGradientController::new(schema.clone(), config);
        let genome = Genome::new(vec![0; schema.len()]);
        let mut last: Vec<f64> = ctl.slot_distributions().iter().map(|d| d[0]).collect();
        for round in 0..50 {
            ctl.observe(&[(genome.clone(), 1.0)]);
            let now: Vec<f64> = ctl.slot_distributions().iter().map(|d| d[0]).collect();
            for (slot, (&a, &b)) in now.iter().zip(&last).enumerate() {
                assert!(
                    a >= b - 1e-12,
                    "round {round} slot {slot}: probability decreased {b} -> {a}"
                );
            }
            last = now;
        }
        // The baseline converges to the constant reward, so probabilities
        // stabilize rather than collapse to 1.
        assert!(ctl.baseline() > 0.9);
    }

    #[test]
    fn distributions_stay_valid_under_many_updates() {
        let schema = schema();
        let mut ctl = PolicyGradientController::new(schema.clone(), PolicyConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for step in 0..100 {
            let batch: Vec<(Genome, f64)> = (0..8)
                .map(|i| (ctl.propose(&mut rng), ((step + i) % 7) as f64 / 7.0))
                .collect();
            ctl.observe(&batch);
        }
        for (slot, dist) in ctl.slot_distributions().iter().enumerate() {
            let sum: f64 = dist.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "slot {slot} sums to {sum}");
            assert!(dist.iter().all(|&p| p >= 0.0), "slot {slot} has negative probability");
        }
    }

    #[test]
    fn proposals_respect_the_schema() {
        let schema = schema();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut policy = PolicyGradientController::new(schema.clone(), PolicyConfig::default());
        let mut evo = EvolutionController::new(schema.clone(), EvolutionConfig::default());
        let mut random = RandomController::new(schema.clone());
        for _ in 0..50 {
            for genome in [
                policy.propose(&mut rng),
                evo.propose(&mut rng),
                random.propose(&mut rng),
            ] {
                schema.check("mnasfpn", &genome).unwrap();
            }
        }
    }

    #[test]
    fn evolution_population_is_a_sliding_window() {
        let schema = schema();
        let config = EvolutionConfig { population_size: 10, ..EvolutionConfig::default() };
        let mut evo = EvolutionController::new(schema.clone(), config);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let batch: Vec<(Genome, f64)> =
                (0..4).map(|i| (evo.propose(&mut rng), i as f64)).collect();
            evo.observe(&batch);
        }
        assert_eq!(evo.population_len(), 10);
    }

    #[test]
    fn evolution_mutates_single_slots_once_warm() {
        let schema = schema();
        let config = EvolutionConfig { population_size: 4, tournament_size: 2, mutations: 1 };
        let mut evo = EvolutionController::new(schema.clone(), config);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let parent = Genome::new(vec![0; schema.len()]);
        evo.observe(&vec![(parent.clone(), 1.0); 4]);
        for _ in 0..20 {
            let child = evo.propose(&mut rng);
            let differing = child
                .tokens
                .iter()
                .zip(&parent.tokens)
                .filter(|(a, b)| a != b)
                .count();
            assert_eq!(differing, 1, "child must differ in exactly one slot");
        }
    }
}
