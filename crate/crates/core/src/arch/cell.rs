//! Genome decoding into cells, structural validation, and dead-block
//! pruning.

use std::fmt;

use crate::error::{Error, Result};
use crate::space::combinatorics::{
    rank_permutation, rank_subset, unrank_permutation, unrank_subset, usage_masks,
};
use crate::space::{
    token_schema, Genome, MergeOp, SearchSpaceDef, SlotKind, OUTPUT_COUNT, PYRAMID_LEVELS,
};

use super::level_resolution;

/// Reference to a feature a block may consume: a cell input at a pyramid
/// level, or an earlier block in generation order (internal blocks first,
/// then output blocks).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputRef {
    CellInput(u8),
    Block(usize),
}

impl fmt::Display for InputRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputRef::CellInput(level) => write!(f, "in:{level}"),
            InputRef::Block(g) => write!(f, "b:{g}"),
        }
    }
}

/// One feature-generation block: merge 2..=D existing features into an
/// intermediate feature at `(intermediate_resolution, expansion_channels)`,
/// then apply a depthwise convolution and a 1x1 projection back to the
/// shared channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// Features actually merged; distinct, all preceding this block.
    pub inputs: Vec<InputRef>,
    /// Taps selected by the genome's subset token but masked off. Retained
    /// so re-encoding reproduces the token sequence exactly; cleared by
    /// pruning and ignored by expansion.
    pub unused_taps: Vec<InputRef>,
    pub merge_op: MergeOp,
    pub intermediate_resolution: u32,
    pub expansion_channels: u32,
    pub kernel: u32,
}

/// An output block and the pyramid level it is bound to.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    pub block: Block,
    pub level: u8,
}

/// A repeatable head cell: ordered internal blocks followed by exactly four
/// output blocks, one per pyramid level.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub internal_blocks: Vec<Block>,
    /// Generation order; the bound levels form a permutation of 3..=6.
    pub output_blocks: Vec<OutputBlock>,
    pub shared_channels: u32,
    pub input_image_size: u32,
}

impl Cell {
    /// Total number of blocks in generation order.
    pub fn block_count(&self) -> usize {
        self.internal_blocks.len() + self.output_blocks.len()
    }

    /// Block at a generation index (internal blocks first).
    pub fn block(&self, gen: usize) -> &Block {
        if gen < self.internal_blocks.len() {
            &self.internal_blocks[gen]
        } else {
            &self.output_blocks[gen - self.internal_blocks.len()].block
        }
    }

    /// Resolutions of the four pyramid levels for this cell's image size.
    pub fn level_resolutions(&self) -> Result<[u32; 4]> {
        let mut out = [0u32; 4];
        for (i, &level) in PYRAMID_LEVELS.iter().enumerate() {
            out[i] = level_resolution(self.input_image_size, level)?;
        }
        Ok(out)
    }
}

/// Parameters a genome is decoded against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanParams {
    pub input_image_size: u32,
    pub repeats: u32,
}

impl Default for PlanParams {
    fn default() -> Self {
        PlanParams { input_image_size: 320, repeats: 1 }
    }
}

#[derive(Default)]
struct NodeDraft {
    input_pair: Option<u32>,
    input_subset: Option<u32>,
    input_mask: Option<u32>,
    merge_op: Option<u32>,
    kernel: Option<u32>,
    expansion: Option<u32>,
    resolution: Option<u32>,
}

fn available_ref(index: usize) -> InputRef {
    if index < OUTPUT_COUNT {
        InputRef::CellInput(PYRAMID_LEVELS[index])
    } else {
        InputRef::Block(index - OUTPUT_COUNT)
    }
}

pub(crate) fn available_index(r: InputRef) -> Result<usize> {
    match r {
        InputRef::CellInput(level) => PYRAMID_LEVELS
            .iter()
            .position(|&l| l == level)
            .ok_or_else(|| Error::InvalidCell(format!("unknown pyramid level {level}"))),
        InputRef::Block(g) => Ok(OUTPUT_COUNT + g),
    }
}

/// Decode a genome into a cell. Deterministic; the genome must match the
/// space's token schema.
pub fn decode_genome(
    genome: &Genome,
    space: &SearchSpaceDef,
    params: &PlanParams,
) -> Result<Cell> {
    space.validate()?;
    let schema = token_schema(space);
    schema.check(&space.name, genome)?;

    let node_count = space.node_count();
    let mut channels_token = None;
    let mut order_token = 0u32;
    let mut drafts: Vec<NodeDraft> = (0..node_count).map(|_| NodeDraft::default()).collect();

    for (slot, &token) in schema.slots().iter().zip(&genome.tokens) {
        match slot.kind {
            SlotKind::Channels => channels_token = Some(token),
            SlotKind::OutputOrder => order_token = token,
            kind => {
                let draft = &mut drafts[slot.node.expect("node-scoped slot")];
                match kind {
                    SlotKind::InputPair => draft.input_pair = Some(token),
                    SlotKind::InputSubset => draft.input_subset = Some(token),
                    SlotKind::InputMask => draft.input_mask = Some(token),
                    SlotKind::MergeOp => draft.merge_op = Some(token),
                    SlotKind::Kernel => draft.kernel = Some(token),
                    SlotKind::Expansion => draft.expansion = Some(token),
                    SlotKind::Resolution => draft.resolution = Some(token),
                    SlotKind::Channels | SlotKind::OutputOrder => unreachable!(),
                }
            }
        }
    }

    let shared_channels = space.channel_choices[channels_token.unwrap_or(0) as usize];
    let output_levels: Vec<u8> = unrank_permutation(u64::from(order_token), OUTPUT_COUNT)
        .into_iter()
        .map(|i| PYRAMID_LEVELS[i])
        .collect();

    let mut internal_blocks = Vec::with_capacity(space.internal_block_budget);
    let mut output_blocks = Vec::with_capacity(OUTPUT_COUNT);

    for (node, draft) in drafts.into_iter().enumerate() {
        let available = node + OUTPUT_COUNT;
        let (inputs, unused_taps) = if space.max_in_degree == 2 {
            let pair = unrank_subset(
                u64::from(draft.input_pair.expect("pair slot")),
                available,
                2,
            );
            (pair.into_iter().map(available_ref).collect(), Vec::new())
        } else {
            let width = space.max_in_degree.min(available);
            // The subset slot is absent when every visible feature is
            // selected (rank 0 is the only choice).
            let subset = unrank_subset(
                u64::from(draft.input_subset.unwrap_or(0)),
                available,
                width,
            );
            let mask = usage_masks(width)[draft.input_mask.expect("mask slot") as usize];
            let mut used = Vec::new();
            let mut unused = Vec::new();
            for (bit, &element) in subset.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    used.push(available_ref(element));
                } else {
                    unused.push(available_ref(element));
                }
            }
            (used, unused)
        };

        let merge_op = space.merge_op_choices[draft.merge_op.unwrap_or(0) as usize];
        let kernel = space.kernel_choices[draft.kernel.unwrap_or(0) as usize];
        let expansion_channels = match draft.expansion {
            Some(t) => space.expansion_choices[t as usize],
            None => space.fixed_expansion(shared_channels),
        };

        if node < space.internal_block_budget {
            let level = PYRAMID_LEVELS[draft.resolution.expect("resolution slot") as usize];
            internal_blocks.push(Block {
                inputs,
                unused_taps,
                merge_op,
                intermediate_resolution: level_resolution(params.input_image_size, level)?,
                expansion_channels,
                kernel,
            });
        } else {
            let level = output_levels[node - space.internal_block_budget];
            output_blocks.push(OutputBlock {
                block: Block {
                    inputs,
                    unused_taps,
                    merge_op,
                    intermediate_resolution: level_resolution(params.input_image_size, level)?,
                    expansion_channels,
                    kernel,
                },
                level,
            });
        }
    }

    Ok(Cell {
        internal_blocks,
        output_blocks,
        shared_channels,
        input_image_size: params.input_image_size,
    })
}

/// Re-encode a cell into the token sequence that decodes to it. The cell
/// must have the space's full block budget (pruned cells cannot be encoded).
pub fn encode_genome(cell: &Cell, space: &SearchSpaceDef) -> Result<Genome> {
    space.validate()?;
    if cell.internal_blocks.len() != space.internal_block_budget
        || cell.output_blocks.len() != OUTPUT_COUNT
    {
        return Err(Error::InvalidCell(format!(
            "cannot encode a cell with {} internal / {} output blocks into a schema expecting {} / {}",
            cell.internal_blocks.len(),
            cell.output_blocks.len(),
            space.internal_block_budget,
            OUTPUT_COUNT,
        )));
    }

    let choice_index = |set: &[u32], value: u32, what: &str| -> Result<u32> {
        set.iter()
            .position(|&v| v == value)
            .map(|i| i as u32)
            .ok_or_else(|| Error::InvalidCell(format!("{what} {value} not in space choices {set:?}")))
    };

    let level_res = cell.level_resolutions()?;
    let schema = token_schema(space);
    let mut tokens = Vec::with_capacity(schema.len());

    for slot in schema.slots() {
        let token = match slot.kind {
            SlotKind::Channels => {
                choice_index(&space.channel_choices, cell.shared_channels, "channel count")?
            }
            SlotKind::OutputOrder => {
                let perm: Vec<usize> = cell
                    .output_blocks
                    .iter()
                    .map(|o| {
                        PYRAMID_LEVELS
                            .iter()
                            .position(|&l| l == o.level)
                            .ok_or_else(|| {
                                Error::InvalidCell(format!("unknown output level {}", o.level))
                            })
                    })
                    .collect::<Result<_>>()?;
                rank_permutation(&perm) as u32
            }
            kind => {
                let node = slot.node.expect("node-scoped slot");
                let block = cell.block(node);
                let available = node + OUTPUT_COUNT;
                match kind {
                    SlotKind::InputPair => {
                        let mut pair = block
                            .inputs
                            .iter()
                            .map(|&r| available_index(r))
                            .collect::<Result<Vec<_>>>()?;
                        pair.sort_unstable();
                        if pair.len() != 2 {
                            return Err(Error::InvalidCell(format!(
                                "block {node} merges {} inputs in a pairwise space",
                                pair.len()
                            )));
                        }
                        rank_subset(&pair, available) as u32
                    }
                    SlotKind::InputSubset => {
                        let subset = selection_subset(block, node, space)?;
                        rank_subset(&subset, available) as u32
                    }
                    SlotKind::InputMask => {
                        let subset = selection_subset(block, node, space)?;
                        let used: Vec<usize> = block
                            .inputs
                            .iter()
                            .map(|&r| available_index(r))
                            .collect::<Result<_>>()?;
                        let mut mask = 0u32;
                        for (bit, element) in subset.iter().enumerate() {
                            if used.contains(element) {
                                mask |= 1 << bit;
                            }
                        }
                        let masks = usage_masks(subset.len());
                        masks
                            .iter()
                            .position(|&m| m == mask)
                            .map(|i| i as u32)
                            .ok_or_else(|| {
                                Error::InvalidCell(format!(
                                    "block {node} uses {} inputs, below the minimum of 2",
                                    mask.count_ones()
                                ))
                            })?
                    }
                    SlotKind::MergeOp => {
                        space
                            .merge_op_choices
                            .iter()
                            .position(|&m| m == block.merge_op)
                            .map(|i| i as u32)
                            .ok_or_else(|| {
                                Error::InvalidCell(format!(
                                    "block {node} merge op {} not in space",
                                    block.merge_op
                                ))
                            })?
                    }
                    SlotKind::Kernel => choice_index(&space.kernel_choices, block.kernel, "kernel")?,
                    SlotKind::Expansion => {
                        choice_index(&space.expansion_choices, block.expansion_channels, "expansion")?
                    }
                    SlotKind::Resolution => level_res
                        .iter()
                        .position(|&r| r == block.intermediate_resolution)
                        .map(|i| i as u32)
                        .ok_or_else(|| {
                            Error::InvalidCell(format!(
                                "block {node} resolution {} is not a pyramid level resolution",
                                block.intermediate_resolution
                            ))
                        })?,
                    SlotKind::Channels | SlotKind::OutputOrder => unreachable!(),
                }
            }
        };
        tokens.push(token);
    }

    Ok(Genome::new(tokens))
}

/// The sorted available-index subset a block's selection token covers:
/// effective inputs plus retained unused taps.
fn selection_subset(block: &Block, node: usize, space: &SearchSpaceDef) -> Result<Vec<usize>> {
    let available = node + OUTPUT_COUNT;
    let width = space.max_in_degree.min(available);
    let mut subset = Vec::with_capacity(width);
    for &r in block.inputs.iter().chain(&block.unused_taps) {
        subset.push(available_index(r)?);
    }
    subset.sort_unstable();
    subset.dedup();
    if subset.len() != width {
        return Err(Error::InvalidCell(format!(
            "block {node} selection covers {} distinct taps, schema expects {width}",
            subset.len()
        )));
    }
    Ok(subset)
}

/// A single structural violation found by `validate_cell`.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    InternalBudgetExceeded { count: usize, budget: usize },
    OutputCountMismatch { count: usize },
    OutputLevelsNotAPermutation,
    InDegreeTooSmall { node: usize, count: usize },
    InDegreeExceeded { node: usize, count: usize, max: usize },
    DuplicateInputs { node: usize },
    ForwardReference { node: usize, referenced: usize },
    UnknownLevel { node: usize, level: u8 },
    MergeOpNotInSpace { node: usize, op: MergeOp },
    KernelNotInSpace { node: usize, kernel: u32 },
    ExpansionNotInSpace { node: usize, channels: u32 },
    ExpansionMustEqualShared { node: usize, channels: u32, shared: u32 },
    ChannelsNotInSpace { channels: u32 },
    ResolutionNotALevel { node: usize, resolution: u32 },
    OutputResolutionMismatch { node: usize, resolution: u32, expected: u32 },
    TapConflict { node: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InternalBudgetExceeded { count, budget } => {
                write!(f, "internal block count {count} exceeds budget {budget}")
            }
            Violation::OutputCountMismatch { count } => {
                write!(f, "cell has {count} output blocks, expected {OUTPUT_COUNT}")
            }
            Violation::OutputLevelsNotAPermutation => {
                write!(f, "output levels are not a permutation of {PYRAMID_LEVELS:?}")
            }
            Violation::InDegreeTooSmall { node, count } => {
                write!(f, "block {node} merges {count} inputs, minimum is 2")
            }
            Violation::InDegreeExceeded { node, count, max } => {
                write!(f, "block {node} in-degree {count} exceeds maximum {max}")
            }
            Violation::DuplicateInputs { node } => write!(f, "block {node} has duplicate inputs"),
            Violation::ForwardReference { node, referenced } => {
                write!(f, "block {node} has forward reference to block {referenced}")
            }
            Violation::UnknownLevel { node, level } => {
                write!(f, "block {node} references unknown pyramid level {level}")
            }
            Violation::MergeOpNotInSpace { node, op } => {
                write!(f, "block {node} merge op {op} not allowed by the space")
            }
            Violation::KernelNotInSpace { node, kernel } => {
                write!(f, "block {node} kernel {kernel} not in the space's choices")
            }
            Violation::ExpansionNotInSpace { node, channels } => {
                write!(f, "block {node} expansion {channels} not in the space's choices")
            }
            Violation::ExpansionMustEqualShared { node, channels, shared } => {
                write!(f, "block {node} expansion {channels} must equal shared channels {shared}")
            }
            Violation::ChannelsNotInSpace { channels } => {
                write!(f, "shared channel count {channels} not in the space's choices")
            }
            Violation::ResolutionNotALevel { node, resolution } => {
                write!(f, "block {node} resolution {resolution} is not a pyramid level resolution")
            }
            Violation::OutputResolutionMismatch { node, resolution, expected } => {
                write!(
                    f,
                    "output block {node} resolution {resolution} does not match its level's {expected}"
                )
            }
            Violation::TapConflict { node } => {
                write!(f, "block {node} unused taps overlap inputs or reach forward")
            }
        }
    }
}

/// Outcome of structural validation; empty iff the cell satisfies every
/// invariant and all choices lie in the space's choice sets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    /// Convert into a hard error listing every violation.
    pub fn into_result(self) -> Result<()> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            let lines: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
            Err(Error::InvalidCell(lines.join("; ")))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Check every block and cell invariant against the space.
pub fn validate_cell(cell: &Cell, space: &SearchSpaceDef) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut push = |v: Violation| report.violations.push(v);

    if cell.internal_blocks.len() > space.internal_block_budget {
        push(Violation::InternalBudgetExceeded {
            count: cell.internal_blocks.len(),
            budget: space.internal_block_budget,
        });
    }
    if cell.output_blocks.len() != OUTPUT_COUNT {
        push(Violation::OutputCountMismatch { count: cell.output_blocks.len() });
    }
    let mut levels: Vec<u8> = cell.output_blocks.iter().map(|o| o.level).collect();
    levels.sort_unstable();
    if levels != PYRAMID_LEVELS {
        push(Violation::OutputLevelsNotAPermutation);
    }

    if !space.channel_choices.contains(&cell.shared_channels) {
        push(Violation::ChannelsNotInSpace { channels: cell.shared_channels });
    }

    let level_res = match cell.level_resolutions() {
        Ok(r) => r,
        Err(_) => {
            // An indivisible image size makes every resolution check moot.
            push(Violation::ResolutionNotALevel { node: 0, resolution: cell.input_image_size });
            return report;
        }
    };

    let total = cell.block_count();
    for node in 0..total {
        let block = cell.block(node);
        let is_internal = node < cell.internal_blocks.len();

        if block.inputs.len() < 2 {
            push(Violation::InDegreeTooSmall { node, count: block.inputs.len() });
        }
        if block.inputs.len() > space.max_in_degree {
            push(Violation::InDegreeExceeded {
                node,
                count: block.inputs.len(),
                max: space.max_in_degree,
            });
        }
        let mut seen = Vec::new();
        for &r in &block.inputs {
            if seen.contains(&r) {
                push(Violation::DuplicateInputs { node });
                break;
            }
            seen.push(r);
        }
        for &r in block.inputs.iter().chain(&block.unused_taps) {
            match r {
                InputRef::Block(g) if g >= node => {
                    push(Violation::ForwardReference { node, referenced: g })
                }
                InputRef::CellInput(level) if !PYRAMID_LEVELS.contains(&level) => {
                    push(Violation::UnknownLevel { node, level })
                }
                _ => {}
            }
        }
        if block.unused_taps.iter().any(|t| block.inputs.contains(t)) {
            push(Violation::TapConflict { node });
        }

        if !space.merge_op_choices.contains(&block.merge_op) {
            push(Violation::MergeOpNotInSpace { node, op: block.merge_op });
        }
        if !space.kernel_choices.contains(&block.kernel) {
            push(Violation::KernelNotInSpace { node, kernel: block.kernel });
        }
        if space.expansion_choices.is_empty() {
            if block.expansion_channels != cell.shared_channels {
                push(Violation::ExpansionMustEqualShared {
                    node,
                    channels: block.expansion_channels,
                    shared: cell.shared_channels,
                });
            }
        } else if !space.expansion_choices.contains(&block.expansion_channels) {
            push(Violation::ExpansionNotInSpace { node, channels: block.expansion_channels });
        }

        if is_internal {
            if !level_res.contains(&block.intermediate_resolution) {
                push(Violation::ResolutionNotALevel {
                    node,
                    resolution: block.intermediate_resolution,
                });
            }
        } else {
            let out = &cell.output_blocks[node - cell.internal_blocks.len()];
            if let Some(idx) = PYRAMID_LEVELS.iter().position(|&l| l == out.level) {
                if block.intermediate_resolution != level_res[idx] {
                    push(Violation::OutputResolutionMismatch {
                        node,
                        resolution: block.intermediate_resolution,
                        expected: level_res[idx],
                    });
                }
            }
        }
    }

    report
}

/// Drop internal blocks that no output block (transitively) consumes.
/// Output blocks are always retained; relative order is preserved and
/// references are remapped. Unused-tap bookkeeping is cleared.
pub fn prune_unused_blocks(cell: &Cell) -> Cell {
    let internal_count = cell.internal_blocks.len();
    let total = cell.block_count();

    // Reachability over effective inputs, seeded with the output blocks.
    let mut reachable = vec![false; total];
    let mut stack: Vec<usize> = (internal_count..total).collect();
    for &g in &stack {
        reachable[g] = true;
    }
    while let Some(g) = stack.pop() {
        for &r in &cell.block(g).inputs {
            if let InputRef::Block(dep) = r {
                if dep < total && !reachable[dep] {
                    reachable[dep] = true;
                    stack.push(dep);
                }
            }
        }
    }

    let mut remap = vec![usize::MAX; total];
    let mut kept_internal = Vec::new();
    for g in 0..internal_count {
        if reachable[g] {
            remap[g] = kept_internal.len();
            kept_internal.push(cell.internal_blocks[g].clone());
        }
    }
    for (j, g) in (internal_count..total).enumerate() {
        remap[g] = kept_internal.len() + j;
    }

    let remap_block = |mut block: Block| -> Block {
        for r in block.inputs.iter_mut() {
            if let InputRef::Block(g) = r {
                debug_assert_ne!(remap[*g], usize::MAX, "kept block references pruned block");
                *g = remap[*g];
            }
        }
        block.unused_taps.clear();
        block
    };

    Cell {
        internal_blocks: kept_internal.into_iter().map(remap_block).collect(),
        output_blocks: cell
            .output_blocks
            .iter()
            .map(|o| OutputBlock { block: remap_block(o.block.clone()), level: o.level })
            .collect(),
        shared_channels: cell.shared_channels,
        input_image_size: cell.input_image_size,
    }
}
