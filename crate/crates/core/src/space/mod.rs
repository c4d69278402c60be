//! Search space definitions, genome token schemas, uniform sampling and
//! exact cardinality.
//!
//! A space is parameterized by its choice sets (kernel sizes, shared channel
//! count C, expansion sizes F), the SDO flag, the maximum merge in-degree D
//! and the internal block budget. Four presets are built in; arbitrary
//! spaces can be loaded from JSON.

pub mod combinatorics;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use combinatorics::{binomial, binomial_big};

/// Pyramid levels consumed and produced by every cell, coarse to fine stride.
pub const PYRAMID_LEVELS: [u8; 4] = [3, 4, 5, 6];

/// Number of output feature maps per cell (one per pyramid level).
pub const OUTPUT_COUNT: usize = 4;

/// Feature-merging operations a block may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeOp {
    Sum,
    SqueezeExcite,
}

impl fmt::Display for MergeOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MergeOp::Sum => write!(f, "sum"),
            MergeOp::SqueezeExcite => write!(f, "squeeze-excite"),
        }
    }
}

/// Semantics applied to blocks that no output consumes, and to cell
/// input/output skip connections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceFlavor {
    /// Unconsumed blocks are discarded and every output level receives a
    /// cell-wide residual from the same-resolution cell input.
    ResidualPruning,
    /// Unconsumed intermediate features are recycled into the
    /// same-resolution output; no cell-wide residuals.
    FeatureRecycling,
}

/// The four built-in search space presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    NasFpnLiteS,
    NoExpand,
    MnasFpn,
    ConnSearch,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::NasFpnLiteS,
        Preset::NoExpand,
        Preset::MnasFpn,
        Preset::ConnSearch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::NasFpnLiteS => "nas-fpnlite-s",
            Preset::NoExpand => "no-expand",
            Preset::MnasFpn => "mnasfpn",
            Preset::ConnSearch => "conn-search",
        }
    }

    /// The commonly quoted order-of-magnitude size for this preset.
    ///
    /// These ballpark figures do not all agree with exact evaluation of the
    /// counting formula (see `cardinality`); the `cardinality` CLI command
    /// prints both side by side.
    pub fn quoted_size_estimate(self) -> f64 {
        match self {
            Preset::NasFpnLiteS => 2e22,
            Preset::NoExpand => 2.4e27,
            Preset::MnasFpn => 1e31,
            Preset::ConnSearch => 3e42,
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nas-fpnlite-s" => Ok(Preset::NasFpnLiteS),
            "no-expand" => Ok(Preset::NoExpand),
            "mnasfpn" => Ok(Preset::MnasFpn),
            "conn-search" => Ok(Preset::ConnSearch),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A search space: every choice set a genome draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpaceDef {
    pub name: String,
    /// Odd depthwise kernel sizes.
    pub kernel_choices: Vec<u32>,
    /// Choices for the globally shared channel count C.
    pub channel_choices: Vec<u32>,
    /// Choices for the intermediate (expansion) channel count F.
    /// Empty enforces F = C for every block.
    pub expansion_choices: Vec<u32>,
    /// Whether resize and 1x1 convolution are reordered by size-dependent
    /// ordering; when false the order is fixed to 1x1-then-resize.
    pub sdo_enabled: bool,
    /// Maximum number of distinct features a block may merge (D >= 2).
    pub max_in_degree: usize,
    /// Number of internal (non-output) block slots per cell.
    pub internal_block_budget: usize,
    pub merge_op_choices: Vec<MergeOp>,
    /// Number of resolution choices per internal block; bound to the four
    /// pyramid level resolutions.
    #[serde(default = "default_resolution_choices")]
    pub resolution_choice_count: usize,
    pub flavor: SpaceFlavor,
}

fn default_resolution_choices() -> usize {
    PYRAMID_LEVELS.len()
}

impl SearchSpaceDef {
    /// Build one of the built-in presets.
    pub fn preset(preset: Preset) -> SearchSpaceDef {
        let full_kernels = vec![3, 5, 7];
        let full_channels = vec![16, 32, 48, 64, 80, 96];
        let expansions = vec![16, 32, 64, 96, 128, 256, 512];
        let both_merges = vec![MergeOp::Sum, MergeOp::SqueezeExcite];
        match preset {
            Preset::NasFpnLiteS => SearchSpaceDef {
                name: preset.name().to_string(),
                kernel_choices: vec![3],
                channel_choices: vec![64],
                expansion_choices: vec![],
                sdo_enabled: false,
                max_in_degree: 2,
                internal_block_budget: 5,
                merge_op_choices: both_merges,
                resolution_choice_count: 4,
                flavor: SpaceFlavor::FeatureRecycling,
            },
            Preset::NoExpand => SearchSpaceDef {
                name: preset.name().to_string(),
                kernel_choices: full_kernels,
                channel_choices: full_channels,
                expansion_choices: vec![],
                sdo_enabled: true,
                max_in_degree: 2,
                internal_block_budget: 5,
                merge_op_choices: both_merges,
                resolution_choice_count: 4,
                flavor: SpaceFlavor::ResidualPruning,
            },
            Preset::MnasFpn => SearchSpaceDef {
                name: preset.name().to_string(),
                kernel_choices: full_kernels,
                channel_choices: full_channels,
                expansion_choices: expansions,
                sdo_enabled: true,
                max_in_degree: 2,
                internal_block_budget: 5,
                merge_op_choices: both_merges,
                resolution_choice_count: 4,
                flavor: SpaceFlavor::ResidualPruning,
            },
            Preset::ConnSearch => SearchSpaceDef {
                name: preset.name().to_string(),
                kernel_choices: full_kernels,
                channel_choices: full_channels,
                expansion_choices: expansions,
                sdo_enabled: true,
                max_in_degree: 4,
                internal_block_budget: 5,
                merge_op_choices: vec![MergeOp::Sum],
                resolution_choice_count: 4,
                flavor: SpaceFlavor::ResidualPruning,
            },
        }
    }

    /// Parse a preset name into its definition.
    pub fn from_preset_name(name: &str) -> Result<SearchSpaceDef> {
        Ok(SearchSpaceDef::preset(name.parse()?))
    }

    /// Total number of block slots (internal + output) per cell.
    pub fn node_count(&self) -> usize {
        self.internal_block_budget + OUTPUT_COUNT
    }

    /// The F choice for blocks of this space when no expansion token exists.
    pub fn fixed_expansion(&self, shared_channels: u32) -> u32 {
        match self.expansion_choices.as_slice() {
            [] => shared_channels,
            [only] => *only,
            _ => unreachable!("spaces with >1 expansion choice carry a token"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpace(msg));
        if self.kernel_choices.is_empty() {
            return fail("kernel_choices must not be empty".into());
        }
        if self.kernel_choices.iter().any(|&k| k % 2 == 0 || k == 0) {
            return fail(format!("kernel sizes must be odd: {:?}", self.kernel_choices));
        }
        if self.channel_choices.is_empty() {
            return fail("channel_choices must not be empty".into());
        }
        if self.channel_choices.contains(&0)
            || self.expansion_choices.contains(&0)
        {
            return fail("channel counts must be positive".into());
        }
        for set in [&self.kernel_choices, &self.channel_choices, &self.expansion_choices] {
            if set.windows(2).any(|w| w[0] >= w[1]) {
                return fail(format!("choice sets must be strictly increasing: {set:?}"));
            }
        }
        if self.max_in_degree < 2 {
            return fail(format!("max_in_degree must be >= 2, got {}", self.max_in_degree));
        }
        if self.merge_op_choices.is_empty() {
            return fail("merge_op_choices must not be empty".into());
        }
        if self.internal_block_budget == 0 || self.internal_block_budget > 16 {
            return fail(format!(
                "internal_block_budget must be in 1..=16, got {}",
                self.internal_block_budget
            ));
        }
        if self.resolution_choice_count != PYRAMID_LEVELS.len() {
            return fail(format!(
                "resolution_choice_count must be {}, got {}",
                PYRAMID_LEVELS.len(),
                self.resolution_choice_count
            ));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SearchSpaceDef> {
        let text = std::fs::read_to_string(path)?;
        let space: SearchSpaceDef = serde_json::from_str(&text)?;
        space.validate()?;
        Ok(space)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// A flat sequence of categorical decisions defining one head architecture.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Genome {
    pub tokens: Vec<u32>,
}

impl Genome {
    pub fn new(tokens: Vec<u32>) -> Genome {
        Genome { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for t in &self.tokens {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{t}")?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for Genome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Genome> {
        let tokens = s
            .split_whitespace()
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|e| Error::Config(format!("bad genome token `{t}`: {e}")))
            })
            .collect::<Result<Vec<u32>>>()?;
        Ok(Genome { tokens })
    }
}

/// Read a genome file: one token sequence per line, `#` comments allowed.
pub fn read_genome_file(path: &Path) -> Result<Vec<Genome>> {
    let text = std::fs::read_to_string(path)?;
    let mut genomes = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let genome = line
            .parse::<Genome>()
            .map_err(|e| Error::parse(path.display().to_string(), idx + 1, e.to_string()))?;
        genomes.push(genome);
    }
    Ok(genomes)
}

pub fn write_genome_file(path: &Path, genomes: &[Genome]) -> Result<()> {
    let mut out = String::new();
    for g in genomes {
        out.push_str(&g.to_string());
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// What a genome token decides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    /// Globally shared channel count C.
    Channels,
    /// Permutation binding output blocks to pyramid levels.
    OutputOrder,
    /// Lexicographic rank of the 2-subset of available inputs.
    InputPair,
    /// Lexicographic rank of the D-subset of available inputs.
    InputSubset,
    /// Usage mask selecting 2..=D of the subset's taps.
    InputMask,
    MergeOp,
    Kernel,
    /// Intermediate channel count F.
    Expansion,
    /// Intermediate resolution of an internal block.
    Resolution,
}

/// One decision slot in a genome.
#[derive(Debug, Clone)]
pub struct SlotDesc {
    pub name: String,
    pub kind: SlotKind,
    /// Generation-order block index this slot belongs to, if any.
    pub node: Option<usize>,
    /// Number of admissible token values.
    pub choices: u64,
}

/// Ordered slot descriptors for a space. A slot exists only where the space
/// offers a real choice; fixed values (single-element choice sets) are
/// implied and carry no token.
#[derive(Debug, Clone)]
pub struct TokenSchema {
    slots: Vec<SlotDesc>,
}

impl TokenSchema {
    pub fn slots(&self) -> &[SlotDesc] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Product of the choice counts over all slots.
    pub fn product(&self) -> BigUint {
        self.slots
            .iter()
            .fold(BigUint::from(1u32), |acc, s| acc * BigUint::from(s.choices))
    }

    /// Check genome length and per-token ranges against this schema.
    pub fn check(&self, space_name: &str, genome: &Genome) -> Result<()> {
        if genome.len() != self.slots.len() {
            return Err(Error::GenomeLength {
                space: space_name.to_string(),
                expected: self.slots.len(),
                actual: genome.len(),
            });
        }
        for (index, (token, slot)) in genome.tokens.iter().zip(&self.slots).enumerate() {
            if u64::from(*token) >= slot.choices {
                return Err(Error::TokenOutOfRange {
                    index,
                    slot: slot.name.clone(),
                    token: *token,
                    choices: slot.choices,
                });
            }
        }
        Ok(())
    }
}

/// Enumerate the decision slots of a space in canonical order: the global
/// channel slot, the output permutation, then per block (generation order)
/// its input selection, merge op, kernel, expansion and resolution slots.
pub fn token_schema(space: &SearchSpaceDef) -> TokenSchema {
    let mut slots = Vec::new();
    // Forced decisions (single-choice sets, or the rank-0 subset when a
    // block can see no more features than its in-degree) carry no token.
    let mut push = |name: String, kind: SlotKind, node: Option<usize>, choices: u64| {
        if choices > 1 {
            slots.push(SlotDesc { name, kind, node, choices });
        }
    };

    if space.channel_choices.len() > 1 {
        push("channels".into(), SlotKind::Channels, None, space.channel_choices.len() as u64);
    }
    push(
        "output_order".into(),
        SlotKind::OutputOrder,
        None,
        combinatorics::factorial(OUTPUT_COUNT as u64),
    );

    for node in 0..space.node_count() {
        let available = node + OUTPUT_COUNT;
        if space.max_in_degree == 2 {
            push(
                format!("b{node}.inputs"),
                SlotKind::InputPair,
                Some(node),
                binomial(available as u64, 2),
            );
        } else {
            let width = space.max_in_degree.min(available);
            push(
                format!("b{node}.input_subset"),
                SlotKind::InputSubset,
                Some(node),
                binomial(available as u64, width as u64),
            );
            push(
                format!("b{node}.input_mask"),
                SlotKind::InputMask,
                Some(node),
                combinatorics::usage_masks(width).len() as u64,
            );
        }
        if space.merge_op_choices.len() > 1 {
            push(
                format!("b{node}.merge"),
                SlotKind::MergeOp,
                Some(node),
                space.merge_op_choices.len() as u64,
            );
        }
        if space.kernel_choices.len() > 1 {
            push(
                format!("b{node}.kernel"),
                SlotKind::Kernel,
                Some(node),
                space.kernel_choices.len() as u64,
            );
        }
        if space.expansion_choices.len() > 1 {
            push(
                format!("b{node}.expansion"),
                SlotKind::Expansion,
                Some(node),
                space.expansion_choices.len() as u64,
            );
        }
        if node < space.internal_block_budget {
            push(
                format!("b{node}.resolution"),
                SlotKind::Resolution,
                Some(node),
                space.resolution_choice_count as u64,
            );
        }
    }

    TokenSchema { slots }
}

/// Sample every slot independently and uniformly. Deterministic per seed.
pub fn sample_uniform(space: &SearchSpaceDef, seed: u64) -> Genome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with_rng(&token_schema(space), &mut rng)
}

/// Sample a genome from an already-seeded stream; used by controllers.
pub fn sample_with_rng<R: Rng>(schema: &TokenSchema, rng: &mut R) -> Genome {
    let tokens = schema
        .slots()
        .iter()
        .map(|slot| rng.gen_range(0..slot.choices) as u32)
        .collect();
    Genome { tokens }
}

/// How many input-selection possibilities node `i` contributes to the
/// space size.
///
/// For in-degree 2 this is choose(i+4, 2). For in-degree 4 the counting
/// rule scales each node's pair count by (i+2)(i+1); the genome's
/// subset-plus-mask encoding is intentionally *not* what is counted here,
/// so for in-degree > 2 the schema product and the cardinality differ.
/// Other in-degrees fall back to plain subset counting.
fn input_selection_factor(node: usize, max_in_degree: usize) -> BigUint {
    let available = (node + OUTPUT_COUNT) as u64;
    match max_in_degree {
        2 => binomial_big(available, 2),
        4 => {
            binomial_big(available, 2)
                * BigUint::from((node as u64 + 2) * (node as u64 + 1))
        }
        d => binomial_big(available, (d as u64).min(available)),
    }
}

/// Exact number of distinct architectures in a space.
pub fn cardinality(space: &SearchSpaceDef) -> BigUint {
    let mut total = BigUint::from(combinatorics::factorial(OUTPUT_COUNT as u64));
    total *= BigUint::from(space.channel_choices.len() as u64);
    let expansion_count = space.expansion_choices.len().max(1) as u64;
    for node in 0..space.node_count() {
        total *= input_selection_factor(node, space.max_in_degree);
        total *= BigUint::from(space.merge_op_choices.len() as u64);
        total *= BigUint::from(space.kernel_choices.len() as u64);
        total *= BigUint::from(expansion_count);
        if node < space.internal_block_budget {
            total *= BigUint::from(space.resolution_choice_count as u64);
        }
    }
    total
}
