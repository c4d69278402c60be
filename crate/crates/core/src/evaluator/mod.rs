//! Quality signals for candidates: a deterministic synthetic surrogate for
//! desk-scale runs, and a file-exchange protocol for plugging in real
//! trainers.

mod exchange;

pub use exchange::{external_evaluate, EvalRequest, ExchangeConfig, ExchangeEvaluator};

use serde::{Deserialize, Serialize};

use crate::arch::{OpKind, ResolvedGraph};
use crate::cost::graph_madds;
use crate::space::{sample_uniform, Genome, SearchSpaceDef};
use crate::util::StableMix;

/// Outcome of evaluating one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Proxy quality score in [0, 1]; meaningful only when status is ok.
    pub quality: f64,
    /// Estimated latency, echoed from the cost module.
    pub latency_ms: f64,
    pub status: EvalStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalStatus {
    Ok,
    Failed(String),
}

impl Evaluation {
    pub fn ok(quality: f64, latency_ms: f64) -> Evaluation {
        Evaluation { quality, latency_ms, status: EvalStatus::Ok }
    }

    pub fn failed(message: impl Into<String>, latency_ms: f64) -> Evaluation {
        Evaluation { quality: 0.0, latency_ms, status: EvalStatus::Failed(message.into()) }
    }

    pub fn is_ok(&self) -> bool {
        self.status == EvalStatus::Ok
    }
}

/// Anything that can score a candidate. Implementations must be safely
/// invocable from multiple worker threads.
pub trait Evaluator: Sync {
    fn evaluate(
        &self,
        candidate_id: &str,
        genome: &Genome,
        graph: &ResolvedGraph,
        latency_ms: f64,
    ) -> Evaluation;
}

/// Parameters of the synthetic quality surrogate.
///
/// The surrogate is a seeded smooth function of four graph/genome features:
/// token agreement with a planted optimum, saturating MAdds, a block-count
/// overcapacity penalty and a preferred-resolution bonus. It makes no claim
/// about real detection quality; it exists so search behavior is testable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub seed: u64,
    /// Genome the surrogate rewards agreement with. When absent, agreement
    /// contributes nothing.
    pub planted_optimum: Option<Genome>,
    pub base: f64,
    pub agreement_weight: f64,
    pub madds_weight: f64,
    /// MAdds count at which the saturating capacity term reaches one half.
    pub madds_scale: f64,
    pub overcapacity_weight: f64,
    /// Depthwise-conv count above which the overcapacity penalty starts.
    pub capacity_soft_limit: usize,
    pub resolution_weight: f64,
    pub preferred_resolution: u32,
    /// Amplitude of the seeded per-genome perturbation; 0 disables it.
    pub noise_amplitude: f64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        SurrogateSpec {
            seed: 0,
            planted_optimum: None,
            base: 0.05,
            agreement_weight: 0.6,
            madds_weight: 0.2,
            madds_scale: 5e8,
            overcapacity_weight: 0.1,
            capacity_soft_limit: 12,
            resolution_weight: 0.1,
            preferred_resolution: 20,
            noise_amplitude: 0.0,
        }
    }
}

impl SurrogateSpec {
    /// A surrogate with a planted optimum drawn uniformly from the space.
    /// Agreement dominates, so a controller has a learnable signal.
    pub fn planted(space: &SearchSpaceDef, seed: u64) -> SurrogateSpec {
        SurrogateSpec {
            seed,
            planted_optimum: Some(sample_uniform(space, seed)),
            base: 0.05,
            agreement_weight: 0.8,
            madds_weight: 0.05,
            resolution_weight: 0.05,
            overcapacity_weight: 0.02,
            noise_amplitude: 0.01,
            ..SurrogateSpec::default()
        }
    }
}

/// Fraction of token positions agreeing with the planted optimum.
fn token_agreement(genome: &Genome, planted: &Genome) -> f64 {
    if genome.tokens.is_empty() || planted.tokens.is_empty() {
        return 0.0;
    }
    let matches = genome
        .tokens
        .iter()
        .zip(&planted.tokens)
        .filter(|(a, b)| a == b)
        .count();
    matches as f64 / genome.tokens.len().max(planted.tokens.len()) as f64
}

/// Deterministic surrogate quality score, clamped to [0, 1]. Identical
/// inputs give identical scores across runs and platforms.
pub fn surrogate_evaluate(
    graph: &ResolvedGraph,
    genome: &Genome,
    spec: &SurrogateSpec,
    latency_ms: f64,
) -> Evaluation {
    let agreement = spec
        .planted_optimum
        .as_ref()
        .map(|p| token_agreement(genome, p))
        .unwrap_or(0.0);

    let madds = graph_madds(graph) as f64;
    let capacity = madds / (madds + spec.madds_scale);

    let depthwise = graph
        .nodes
        .iter()
        .filter(|n| n.kind == OpKind::DepthwiseConv)
        .count();
    let at_preferred = graph
        .nodes
        .iter()
        .filter(|n| {
            n.kind == OpKind::DepthwiseConv
                && n.output_shape.resolution == spec.preferred_resolution
        })
        .count();
    let resolution_preference = if depthwise == 0 {
        0.0
    } else {
        at_preferred as f64 / depthwise as f64
    };
    let overcapacity = if depthwise > spec.capacity_soft_limit {
        (depthwise - spec.capacity_soft_limit) as f64 / spec.capacity_soft_limit as f64
    } else {
        0.0
    };

    let mut score = spec.base
        + spec.agreement_weight * agreement
        + spec.madds_weight * capacity
        + spec.resolution_weight * resolution_preference
        - spec.overcapacity_weight * overcapacity;

    if spec.noise_amplitude != 0.0 {
        let mut mix = StableMix::new(spec.seed);
        for &t in &genome.tokens {
            mix = mix.mix_u32(t);
        }
        score += spec.noise_amplitude * (2.0 * mix.finish01() - 1.0);
    }

    Evaluation::ok(score.clamp(0.0, 1.0), latency_ms)
}

/// `Evaluator` adapter over the surrogate.
#[derive(Debug, Clone)]
pub struct SurrogateEvaluator {
    pub spec: SurrogateSpec,
}

impl Evaluator for SurrogateEvaluator {
    fn evaluate(
        &self,
        _candidate_id: &str,
        genome: &Genome,
        graph: &ResolvedGraph,
        latency_ms: f64,
    ) -> Evaluation {
        surrogate_evaluate(graph, genome, &self.spec, latency_ms)
    }
}
