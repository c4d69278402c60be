//! Latency-aware neural architecture search for feature-pyramid detection heads.
//!
//! The crate is organized around the lifecycle of a candidate architecture:
//!
//! 1. [`space`] defines a search space (choice sets, in-degree, SDO flag),
//!    its flat genome encoding, uniform sampling and exact cardinality.
//! 2. [`arch`] decodes a genome into a validated cell, prunes dead blocks,
//!    and expands the cell into a concrete operator graph with size-dependent
//!    ordering of resize and 1x1 convolutions.
//! 3. [`cost`] computes MAdds and parameter counts for a graph and estimates
//!    latency through a connectivity-based lookup table.
//! 4. [`evaluator`] supplies the quality signal: a deterministic synthetic
//!    surrogate for desk-scale runs, and a file-exchange protocol for real
//!    trainers.
//! 5. [`search`] drives the loop: reward shaping, controllers
//!    (policy-gradient, random, evolution), Pareto frontiers, target-latency
//!    selection, repeat sweeps and a resumable history log.

pub mod arch;
pub mod cost;
pub mod error;
pub mod evaluator;
pub mod search;
pub mod space;

mod util;

pub use arch::{
    decode_genome, encode_genome, expand_network, level_resolution, prune_unused_blocks,
    resolve_sdo_order, validate_cell, Block, Cell, FeatureSpec, NetworkPlan, OutputBlock,
    PlanParams, ResizeOrder, ResolvedGraph,
};
pub use cost::{
    estimate_latency, graph_madds, graph_params, merge_path_madds, synth_lut, CostReport,
    LatencyModel, LatencyTable, OpSignature,
};
pub use error::{Error, Result};
pub use evaluator::{
    surrogate_evaluate, Evaluation, EvalStatus, Evaluator, SurrogateEvaluator, SurrogateSpec,
};
pub use search::{
    pareto_frontier, reward, run_search, select_at_latency, sweep_repeats, Candidate, Frontier,
    RewardConfig, SearchConfig, SearchOutcome,
};
pub use space::{
    cardinality, sample_uniform, token_schema, Genome, MergeOp, Preset, SearchSpaceDef,
    SpaceFlavor, TokenSchema,
};
