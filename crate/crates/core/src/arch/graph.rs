//! Expansion of cells into concrete operator graphs, plus the structured
//! text and DOT exports.

use std::fmt;

use crate::error::{Error, Result};
use crate::space::{MergeOp, SpaceFlavor, OUTPUT_COUNT, PYRAMID_LEVELS};

use super::cell::{available_index, Cell, InputRef};
use super::{level_resolution, prune_unused_blocks, resize_ratio, resolve_sdo_order, ResizeOrder};

/// Operator kinds a resolved graph is made of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Conv1x1,
    DepthwiseConv,
    Downsample,
    Upsample,
    Add,
    SqueezeExcite,
    Relu,
}

impl OpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::Conv1x1 => "conv1x1",
            OpKind::DepthwiseConv => "depthwise_conv",
            OpKind::Downsample => "downsample",
            OpKind::Upsample => "upsample",
            OpKind::Add => "add",
            OpKind::SqueezeExcite => "squeeze_excite",
            OpKind::Relu => "relu",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<OpKind> {
        Ok(match s {
            "conv1x1" => OpKind::Conv1x1,
            "depthwise_conv" => OpKind::DepthwiseConv,
            "downsample" => OpKind::Downsample,
            "upsample" => OpKind::Upsample,
            "add" => OpKind::Add,
            "squeeze_excite" => OpKind::SqueezeExcite,
            "relu" => OpKind::Relu,
            other => return Err(Error::UnsupportedOp(other.to_string())),
        })
    }
}

/// Spatial side length and channel count of a feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureShape {
    pub resolution: u32,
    pub channels: u32,
}

impl fmt::Display for FeatureShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.resolution, self.channels)
    }
}

/// A data dependency: a backbone feature at a pyramid level, or another
/// node's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PortRef {
    Input(u8),
    Node(usize),
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PortRef::Input(level) => write!(f, "in:{level}"),
            PortRef::Node(idx) => write!(f, "n:{idx}"),
        }
    }
}

impl std::str::FromStr for PortRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<PortRef> {
        if let Some(level) = s.strip_prefix("in:") {
            let level = level
                .parse::<u8>()
                .map_err(|e| Error::Config(format!("bad input reference `{s}`: {e}")))?;
            return Ok(PortRef::Input(level));
        }
        if let Some(idx) = s.strip_prefix("n:") {
            let idx = idx
                .parse::<usize>()
                .map_err(|e| Error::Config(format!("bad node reference `{s}`: {e}")))?;
            return Ok(PortRef::Node(idx));
        }
        Err(Error::Config(format!("bad port reference `{s}`")))
    }
}

/// One operator: kind, data dependencies and concrete shapes. All inputs of
/// a node share `input_shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: OpKind,
    pub inputs: Vec<PortRef>,
    pub input_shape: FeatureShape,
    pub output_shape: FeatureShape,
    pub kernel: u32,
    pub stride: u32,
    pub label: String,
}

/// A cell plus the parameters needed to realize it as a network head.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkPlan {
    pub cell: Cell,
    pub repeats: u32,
    pub input_image_size: u32,
    pub space_flavor: SpaceFlavor,
}

impl NetworkPlan {
    pub fn new(cell: Cell, repeats: u32, space_flavor: SpaceFlavor) -> NetworkPlan {
        let input_image_size = cell.input_image_size;
        NetworkPlan { cell, repeats, input_image_size, space_flavor }
    }
}

/// A decoded, repeat-expanded operator DAG with concrete shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedGraph {
    pub input_image_size: u32,
    pub shared_channels: u32,
    pub nodes: Vec<Node>,
    /// Terminal node per pyramid level, ascending level order.
    pub outputs: [(u8, usize); 4],
}

impl ResolvedGraph {
    /// Flags nodes reachable from the graph outputs.
    pub fn reachable_from_outputs(&self) -> Vec<bool> {
        let mut reachable = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = self.outputs.iter().map(|&(_, idx)| idx).collect();
        while let Some(idx) = stack.pop() {
            if reachable[idx] {
                continue;
            }
            reachable[idx] = true;
            for port in &self.nodes[idx].inputs {
                if let PortRef::Node(dep) = port {
                    stack.push(*dep);
                }
            }
        }
        reachable
    }

    /// Drop nodes unreachable from the outputs, remapping references.
    pub fn prune_unreachable(&self) -> ResolvedGraph {
        let reachable = self.reachable_from_outputs();
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if reachable[idx] {
                remap[idx] = nodes.len();
                let mut node = node.clone();
                for port in node.inputs.iter_mut() {
                    if let PortRef::Node(dep) = port {
                        *dep = remap[*dep];
                    }
                }
                nodes.push(node);
            }
        }
        let outputs = self.outputs.map(|(level, idx)| (level, remap[idx]));
        ResolvedGraph {
            input_image_size: self.input_image_size,
            shared_channels: self.shared_channels,
            nodes,
            outputs,
        }
    }

    /// Shape produced by a port.
    pub fn port_shape(&self, port: PortRef) -> Result<FeatureShape> {
        match port {
            PortRef::Input(level) => Ok(FeatureShape {
                resolution: level_resolution(self.input_image_size, level)?,
                channels: self.shared_channels,
            }),
            PortRef::Node(idx) => self
                .nodes
                .get(idx)
                .map(|n| n.output_shape)
                .ok_or_else(|| Error::GraphConsistency(format!("node reference n:{idx} out of range"))),
        }
    }

    /// Internal consistency: references resolve backwards only, shapes agree
    /// along every edge, kind-specific shape rules hold, and the outputs
    /// cover all four levels at the shared channel count.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::GraphConsistency(msg));
        for (idx, node) in self.nodes.iter().enumerate() {
            if node.inputs.is_empty() {
                return fail(format!("node {idx} ({}) has no inputs", node.label));
            }
            for &port in &node.inputs {
                if let PortRef::Node(dep) = port {
                    if dep >= idx {
                        return fail(format!(
                            "node {idx} ({}) references non-preceding node {dep}",
                            node.label
                        ));
                    }
                }
                let produced = self.port_shape(port)?;
                if produced != node.input_shape {
                    return fail(format!(
                        "node {idx} ({}) expects {} on {port}, producer yields {produced}",
                        node.label, node.input_shape
                    ));
                }
            }
            let single_input = matches!(
                node.kind,
                OpKind::Conv1x1
                    | OpKind::DepthwiseConv
                    | OpKind::Downsample
                    | OpKind::Upsample
                    | OpKind::Relu
                    | OpKind::SqueezeExcite
            );
            if single_input && node.inputs.len() != 1 {
                return fail(format!("node {idx} ({}) must have exactly one input", node.label));
            }
            let input = node.input_shape;
            let output = node.output_shape;
            let shape_ok = match node.kind {
                OpKind::Conv1x1 => {
                    input.resolution == output.resolution && node.kernel == 1 && node.stride == 1
                }
                OpKind::DepthwiseConv => {
                    input == output && node.kernel % 2 == 1 && node.stride == 1
                }
                OpKind::Downsample => {
                    input.channels == output.channels
                        && node.kernel == node.stride
                        && node.stride > 1
                        && input.resolution == output.resolution * node.stride
                }
                OpKind::Upsample => {
                    input.channels == output.channels
                        && output.resolution > input.resolution
                        && resize_ratio(input.resolution, output.resolution).is_ok()
                }
                OpKind::Add => input == output && node.inputs.len() >= 2,
                OpKind::SqueezeExcite | OpKind::Relu => input == output,
            };
            if !shape_ok {
                return fail(format!(
                    "node {idx} ({}) {} has inconsistent shapes {input} -> {output} (k={}, s={})",
                    node.label, node.kind, node.kernel, node.stride
                ));
            }
        }
        let mut levels: Vec<u8> = self.outputs.iter().map(|&(l, _)| l).collect();
        levels.sort_unstable();
        if levels != PYRAMID_LEVELS {
            return fail(format!("outputs do not cover levels {PYRAMID_LEVELS:?}"));
        }
        for &(level, idx) in &self.outputs {
            let shape = self.port_shape(PortRef::Node(idx))?;
            let expected = FeatureShape {
                resolution: level_resolution(self.input_image_size, level)?,
                channels: self.shared_channels,
            };
            if shape != expected {
                return fail(format!(
                    "output level {level} has shape {shape}, expected {expected}"
                ));
            }
        }
        Ok(())
    }
}

struct GraphBuilder {
    nodes: Vec<Node>,
}

impl GraphBuilder {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        kind: OpKind,
        inputs: Vec<PortRef>,
        input_shape: FeatureShape,
        output_shape: FeatureShape,
        kernel: u32,
        stride: u32,
        label: String,
    ) -> PortRef {
        self.nodes.push(Node { kind, inputs, input_shape, output_shape, kernel, stride, label });
        PortRef::Node(self.nodes.len() - 1)
    }
}

/// Realize one merge path: bring a source feature to the block's target
/// resolution and channel count.
///
/// The 1x1 channel convolution is present on every path where the source
/// and target differ in any way; only a source already at the target shape
/// passes through untouched. With SDO the convolution runs at the smaller
/// of the two resolutions; with SDO disabled it always precedes the resize.
fn merge_path(
    builder: &mut GraphBuilder,
    src: PortRef,
    src_shape: FeatureShape,
    target: FeatureShape,
    sdo_enabled: bool,
    label: &str,
) -> Result<PortRef> {
    if src_shape == target {
        return Ok(src);
    }
    if src_shape.resolution == target.resolution {
        return Ok(builder.push(
            OpKind::Conv1x1,
            vec![src],
            src_shape,
            target,
            1,
            1,
            format!("{label}.conv"),
        ));
    }

    let order = if sdo_enabled {
        resolve_sdo_order(src_shape.resolution, target.resolution)?
    } else {
        resize_ratio(src_shape.resolution, target.resolution)?;
        ResizeOrder::ConvThenResize
    };
    let ratio = resize_ratio(src_shape.resolution, target.resolution)?;
    let down = src_shape.resolution > target.resolution;

    match (down, order) {
        (true, ResizeOrder::ResizeThenConv) => {
            let resized = FeatureShape { resolution: target.resolution, channels: src_shape.channels };
            let ds = builder.push(
                OpKind::Downsample,
                vec![src],
                src_shape,
                resized,
                ratio,
                ratio,
                format!("{label}.down"),
            );
            Ok(builder.push(OpKind::Conv1x1, vec![ds], resized, target, 1, 1, format!("{label}.conv")))
        }
        (true, _) => {
            let widened = FeatureShape { resolution: src_shape.resolution, channels: target.channels };
            let conv = builder.push(
                OpKind::Conv1x1,
                vec![src],
                src_shape,
                widened,
                1,
                1,
                format!("{label}.conv"),
            );
            Ok(builder.push(
                OpKind::Downsample,
                vec![conv],
                widened,
                target,
                ratio,
                ratio,
                format!("{label}.down"),
            ))
        }
        (false, _) => {
            // Up-sampling: the convolution runs at the smaller (source)
            // resolution under SDO and under the fixed conv-first order.
            let widened = FeatureShape { resolution: src_shape.resolution, channels: target.channels };
            let conv = builder.push(
                OpKind::Conv1x1,
                vec![src],
                src_shape,
                widened,
                1,
                1,
                format!("{label}.conv"),
            );
            Ok(builder.push(
                OpKind::Upsample,
                vec![conv],
                widened,
                target,
                1,
                1,
                format!("{label}.up"),
            ))
        }
    }
}

/// Expand a plan into a resolved operator graph: `repeats` chained cell
/// instances, per-flavor handling of unconsumed blocks, cell-wide residuals
/// for the residual flavor, and ReLU on intermediate features only.
pub fn expand_network(plan: &NetworkPlan, sdo_enabled: bool) -> Result<ResolvedGraph> {
    if plan.repeats == 0 {
        return Err(Error::Config("repeats must be >= 1".into()));
    }
    if plan.input_image_size != plan.cell.input_image_size {
        return Err(Error::GraphConsistency(format!(
            "plan image size {} does not match cell image size {}",
            plan.input_image_size, plan.cell.input_image_size
        )));
    }

    let cell = match plan.space_flavor {
        SpaceFlavor::ResidualPruning => prune_unused_blocks(&plan.cell),
        SpaceFlavor::FeatureRecycling => plan.cell.clone(),
    };
    let shared = cell.shared_channels;
    let level_res = cell.level_resolutions()?;
    let internal_count = cell.internal_blocks.len();
    let total = cell.block_count();

    let mut builder = GraphBuilder { nodes: Vec::new() };
    let mut instance_inputs: Vec<(PortRef, FeatureShape)> = PYRAMID_LEVELS
        .iter()
        .zip(level_res)
        .map(|(&level, resolution)| {
            (PortRef::Input(level), FeatureShape { resolution, channels: shared })
        })
        .collect();

    for instance in 0..plan.repeats {
        let mut pool: Vec<(PortRef, FeatureShape)> = instance_inputs.clone();
        let mut consumed = vec![false; internal_count];

        for gen in 0..total {
            let block = cell.block(gen);
            let target = FeatureShape {
                resolution: block.intermediate_resolution,
                channels: block.expansion_channels,
            };
            let label = format!("c{instance}.b{gen}");

            let mut merged = Vec::with_capacity(block.inputs.len());
            for (j, &input) in block.inputs.iter().enumerate() {
                if let InputRef::Block(dep) = input {
                    if dep < internal_count {
                        consumed[dep] = true;
                    }
                }
                let (src, src_shape) = pool[available_index(input)?];
                merged.push(merge_path(
                    &mut builder,
                    src,
                    src_shape,
                    target,
                    sdo_enabled,
                    &format!("{label}.in{j}"),
                )?);
            }

            let mut feature = builder.push(
                OpKind::Add,
                merged,
                target,
                target,
                1,
                1,
                format!("{label}.merge"),
            );
            if block.merge_op == MergeOp::SqueezeExcite {
                feature = builder.push(
                    OpKind::SqueezeExcite,
                    vec![feature],
                    target,
                    target,
                    1,
                    1,
                    format!("{label}.se"),
                );
            }
            // Non-linearity on the intermediate feature, never on the
            // block output after projection.
            feature = builder.push(
                OpKind::Relu,
                vec![feature],
                target,
                target,
                1,
                1,
                format!("{label}.relu"),
            );
            feature = builder.push(
                OpKind::DepthwiseConv,
                vec![feature],
                target,
                target,
                block.kernel,
                1,
                format!("{label}.dw"),
            );
            let out_shape = FeatureShape { resolution: target.resolution, channels: shared };
            let projected = builder.push(
                OpKind::Conv1x1,
                vec![feature],
                target,
                out_shape,
                1,
                1,
                format!("{label}.proj"),
            );
            pool.push((projected, out_shape));
        }

        let mut next_inputs = Vec::with_capacity(PYRAMID_LEVELS.len());
        for (li, &level) in PYRAMID_LEVELS.iter().enumerate() {
            let out_idx = cell
                .output_blocks
                .iter()
                .position(|o| o.level == level)
                .ok_or_else(|| Error::GraphConsistency(format!("no output block for level {level}")))?;
            let (out_ref, out_shape) = pool[OUTPUT_COUNT + internal_count + out_idx];
            debug_assert_eq!(out_shape.resolution, level_res[li]);

            let terminal = match plan.space_flavor {
                SpaceFlavor::ResidualPruning => {
                    let (input_ref, input_shape) = instance_inputs[li];
                    if input_shape != out_shape {
                        return Err(Error::GraphConsistency(format!(
                            "residual shape mismatch at level {level}: {input_shape} vs {out_shape}"
                        )));
                    }
                    builder.push(
                        OpKind::Add,
                        vec![input_ref, out_ref],
                        out_shape,
                        out_shape,
                        1,
                        1,
                        format!("c{instance}.out{level}.residual"),
                    )
                }
                SpaceFlavor::FeatureRecycling => {
                    let recycled: Vec<PortRef> = (0..internal_count)
                        .filter(|&g| {
                            !consumed[g]
                                && cell.internal_blocks[g].intermediate_resolution == level_res[li]
                        })
                        .map(|g| pool[OUTPUT_COUNT + g].0)
                        .collect();
                    if recycled.is_empty() {
                        out_ref
                    } else {
                        let mut inputs = vec![out_ref];
                        inputs.extend(recycled);
                        builder.push(
                            OpKind::Add,
                            inputs,
                            out_shape,
                            out_shape,
                            1,
                            1,
                            format!("c{instance}.out{level}.recycle"),
                        )
                    }
                }
            };
            next_inputs.push((terminal, out_shape));
        }
        instance_inputs = next_inputs;
    }

    let mut outputs = [(0u8, 0usize); 4];
    for (li, &level) in PYRAMID_LEVELS.iter().enumerate() {
        match instance_inputs[li].0 {
            PortRef::Node(idx) => outputs[li] = (level, idx),
            PortRef::Input(_) => {
                return Err(Error::GraphConsistency(
                    "graph output resolved to a raw input; cells always end in nodes".into(),
                ))
            }
        }
    }

    let graph = ResolvedGraph {
        input_image_size: plan.input_image_size,
        shared_channels: shared,
        nodes: builder.nodes,
        outputs,
    };
    // Recycling-flavor graphs can strand compute across instances when a
    // later instance never consumes one of the previous instance's outputs;
    // drop those chains so every node is reachable from an output.
    let graph = graph.prune_unreachable();
    debug_assert!(graph.validate().is_ok(), "expansion must be internally consistent");
    Ok(graph)
}

// ---------------------------------------------------------------------------
// Structured text export / import and DOT rendering.
// ---------------------------------------------------------------------------

/// Serialize a graph to the line-oriented text format: header, node list
/// with signatures, edge list, outputs. Stable under re-serialization.
pub fn write_graph_text(graph: &ResolvedGraph) -> String {
    let mut out = String::new();
    out.push_str("format graph-v1\n");
    out.push_str(&format!("image {}\n", graph.input_image_size));
    out.push_str(&format!("channels {}\n", graph.shared_channels));
    for (idx, node) in graph.nodes.iter().enumerate() {
        out.push_str(&format!(
            "node {idx} {} {} {} {} {} {} {} {}\n",
            node.kind,
            node.input_shape.resolution,
            node.output_shape.resolution,
            node.input_shape.channels,
            node.output_shape.channels,
            node.kernel,
            node.stride,
            node.label,
        ));
    }
    for (idx, node) in graph.nodes.iter().enumerate() {
        for port in &node.inputs {
            out.push_str(&format!("edge {port} n:{idx}\n"));
        }
    }
    for &(level, idx) in &graph.outputs {
        out.push_str(&format!("output {level} n:{idx}\n"));
    }
    out
}

/// Parse the text format produced by `write_graph_text`.
pub fn parse_graph_text(text: &str) -> Result<ResolvedGraph> {
    let src = "graph text";
    let mut image = None;
    let mut channels = None;
    let mut nodes: Vec<Node> = Vec::new();
    let mut outputs: Vec<(u8, usize)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let tag = fields.next().unwrap();
        let rest: Vec<&str> = fields.collect();
        let ln = lineno + 1;
        let parse_u32 = |s: &str| -> Result<u32> {
            s.parse::<u32>().map_err(|e| Error::parse(src, ln, format!("bad integer `{s}`: {e}")))
        };
        match tag {
            "format" => {
                if rest != ["graph-v1"] {
                    return Err(Error::parse(src, ln, format!("unsupported format {rest:?}")));
                }
            }
            "image" => image = Some(parse_u32(rest[0])?),
            "channels" => channels = Some(parse_u32(rest[0])?),
            "node" => {
                if rest.len() != 9 {
                    return Err(Error::parse(src, ln, "node line needs 9 fields"));
                }
                let idx = rest[0]
                    .parse::<usize>()
                    .map_err(|e| Error::parse(src, ln, format!("bad node index: {e}")))?;
                if idx != nodes.len() {
                    return Err(Error::parse(src, ln, format!("node index {idx} out of order")));
                }
                nodes.push(Node {
                    kind: rest[1].parse()?,
                    inputs: Vec::new(),
                    input_shape: FeatureShape {
                        resolution: parse_u32(rest[2])?,
                        channels: parse_u32(rest[4])?,
                    },
                    output_shape: FeatureShape {
                        resolution: parse_u32(rest[3])?,
                        channels: parse_u32(rest[5])?,
                    },
                    kernel: parse_u32(rest[6])?,
                    stride: parse_u32(rest[7])?,
                    label: rest[8].to_string(),
                });
            }
            "edge" => {
                if rest.len() != 2 {
                    return Err(Error::parse(src, ln, "edge line needs 2 fields"));
                }
                let from: PortRef = rest[0].parse()?;
                let to: PortRef = rest[1].parse()?;
                match to {
                    PortRef::Node(idx) if idx < nodes.len() => nodes[idx].inputs.push(from),
                    other => {
                        return Err(Error::parse(src, ln, format!("bad edge target {other}")))
                    }
                }
            }
            "output" => {
                if rest.len() != 2 {
                    return Err(Error::parse(src, ln, "output line needs 2 fields"));
                }
                let level = rest[0]
                    .parse::<u8>()
                    .map_err(|e| Error::parse(src, ln, format!("bad level: {e}")))?;
                match rest[1].parse::<PortRef>()? {
                    PortRef::Node(idx) => outputs.push((level, idx)),
                    PortRef::Input(_) => {
                        return Err(Error::parse(src, ln, "output must reference a node"))
                    }
                }
            }
            other => return Err(Error::parse(src, ln, format!("unknown line tag `{other}`"))),
        }
    }

    let outputs: [(u8, usize); 4] = outputs
        .try_into()
        .map_err(|v: Vec<_>| Error::parse(src, 0, format!("expected 4 outputs, got {}", v.len())))?;
    let graph = ResolvedGraph {
        input_image_size: image.ok_or_else(|| Error::parse(src, 0, "missing image line"))?,
        shared_channels: channels.ok_or_else(|| Error::parse(src, 0, "missing channels line"))?,
        nodes,
        outputs,
    };
    graph.validate()?;
    Ok(graph)
}

/// Render the graph in DOT for visualization.
pub fn write_graph_dot(graph: &ResolvedGraph) -> String {
    let mut out = String::new();
    out.push_str("digraph head {\n  rankdir=LR;\n  node [fontsize=10];\n");
    for &level in &PYRAMID_LEVELS {
        out.push_str(&format!(
            "  in{level} [label=\"C{level}\" shape=box style=rounded];\n"
        ));
    }
    for (idx, node) in graph.nodes.iter().enumerate() {
        let detail = match node.kind {
            OpKind::Conv1x1 => format!("{} -> {}", node.input_shape, node.output_shape),
            OpKind::DepthwiseConv => format!("k{} {}", node.kernel, node.output_shape),
            OpKind::Downsample => {
                format!("{}x/{} {}", node.kernel, node.stride, node.output_shape)
            }
            _ => node.output_shape.to_string(),
        };
        out.push_str(&format!(
            "  n{idx} [label=\"{}\\n{}\\n{}\"];\n",
            node.kind, detail, node.label
        ));
    }
    for (idx, node) in graph.nodes.iter().enumerate() {
        for port in &node.inputs {
            match port {
                PortRef::Input(level) => out.push_str(&format!("  in{level} -> n{idx};\n")),
                PortRef::Node(dep) => out.push_str(&format!("  n{dep} -> n{idx};\n")),
            }
        }
    }
    for &(level, idx) in &graph.outputs {
        out.push_str(&format!(
            "  out{level} [label=\"P{level}\" shape=box style=rounded];\n  n{idx} -> out{level};\n"
        ));
    }
    out.push_str("}\n");
    out
}
