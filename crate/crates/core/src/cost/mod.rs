//! MAdds and parameter counting for resolved graphs, the SDO merge-path
//! cost rule, and latency estimation through a connectivity-based lookup
//! table.

mod lut;

pub use lut::{
    estimate_latency, signature_universe, synth_lut, synth_lut_for_space, LatencyEstimate,
    LatencyModel, LatencyRow, LatencyTable,
};

use std::fmt;
use std::str::FromStr;

use crate::arch::{resize_ratio, FeatureSpec, Node, OpKind, ResizeOrder, ResolvedGraph};
use crate::error::{Error, Result};

/// Shape-level identity of an operator; the granularity of a latency table
/// row. Distinct blocks with equal shapes share entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OpSignature {
    pub kind: OpKind,
    pub input_resolution: u32,
    pub output_resolution: u32,
    pub input_channels: u32,
    pub output_channels: u32,
    pub kernel: u32,
    pub stride: u32,
}

impl OpSignature {
    pub fn of(node: &Node) -> OpSignature {
        OpSignature {
            kind: node.kind,
            input_resolution: node.input_shape.resolution,
            output_resolution: node.output_shape.resolution,
            input_channels: node.input_shape.channels,
            output_channels: node.output_shape.channels,
            kernel: node.kernel,
            stride: node.stride,
        }
    }
}

impl fmt::Display for OpSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {} {}",
            self.kind,
            self.input_resolution,
            self.output_resolution,
            self.input_channels,
            self.output_channels,
            self.kernel,
            self.stride,
        )
    }
}

impl FromStr for OpSignature {
    type Err = Error;

    fn from_str(s: &str) -> Result<OpSignature> {
        let fields: Vec<&str> = s.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(Error::Config(format!("signature `{s}` needs 7 fields")));
        }
        let num = |i: usize| -> Result<u32> {
            fields[i]
                .parse::<u32>()
                .map_err(|e| Error::Config(format!("bad signature field `{}`: {e}", fields[i])))
        };
        Ok(OpSignature {
            kind: fields[0].parse()?,
            input_resolution: num(1)?,
            output_resolution: num(2)?,
            input_channels: num(3)?,
            output_channels: num(4)?,
            kernel: num(5)?,
            stride: num(6)?,
        })
    }
}

/// Multiply-accumulate count of one operator.
///
/// 1x1 convolutions cost R^2*Cin*Cout, depthwise convolutions R^2*k^2*C
/// (strided ones at the output resolution), squeeze-excite runs its two 1x1
/// convolutions on the pooled 1x1 feature with reduction ratio 4, and
/// resize-by-copy / elementwise ops cost zero.
pub fn signature_madds(sig: &OpSignature) -> u64 {
    let area = u64::from(sig.output_resolution) * u64::from(sig.output_resolution);
    match sig.kind {
        OpKind::Conv1x1 => area * u64::from(sig.input_channels) * u64::from(sig.output_channels),
        OpKind::DepthwiseConv | OpKind::Downsample => {
            area * u64::from(sig.kernel) * u64::from(sig.kernel) * u64::from(sig.output_channels)
        }
        OpKind::SqueezeExcite => {
            let c = u64::from(sig.output_channels);
            2 * c * (c / 4)
        }
        OpKind::Upsample | OpKind::Add | OpKind::Relu => 0,
    }
}

/// Parameter count of one operator; batch-norm and bias parameters are
/// folded.
pub fn signature_params(sig: &OpSignature) -> u64 {
    match sig.kind {
        OpKind::Conv1x1 => u64::from(sig.input_channels) * u64::from(sig.output_channels),
        OpKind::DepthwiseConv | OpKind::Downsample => {
            u64::from(sig.kernel) * u64::from(sig.kernel) * u64::from(sig.output_channels)
        }
        OpKind::SqueezeExcite => {
            let c = u64::from(sig.output_channels);
            2 * c * (c / 4)
        }
        OpKind::Upsample | OpKind::Add | OpKind::Relu => 0,
    }
}

pub fn node_madds(node: &Node) -> u64 {
    signature_madds(&OpSignature::of(node))
}

pub fn node_params(node: &Node) -> u64 {
    signature_params(&OpSignature::of(node))
}

/// Sum of MAdds over a node list.
pub fn nodes_madds(nodes: &[Node]) -> u64 {
    nodes.iter().map(node_madds).sum()
}

/// Total MAdds over every node of the graph.
pub fn graph_madds(graph: &ResolvedGraph) -> u64 {
    nodes_madds(&graph.nodes)
}

/// Total parameter count over every node of the graph.
pub fn graph_params(graph: &ResolvedGraph) -> u64 {
    graph.nodes.iter().map(node_params).sum()
}

/// Cost of one merge path under the size-dependent ordering rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergePathCost {
    pub madds: u64,
    pub order: ResizeOrder,
}

/// Closed-form MAdds of bringing `input` to `(target_resolution,
/// target_channels)`.
///
/// Down-sampling with SDO resizes first and convolves at the smaller
/// resolution: R^2*k^2*C + R^2*C*F. With SDO off the convolution runs at
/// the larger input resolution: (kR)^2*C*F + R^2*k^2*F. Up-sampling always
/// convolves before the (free) resize. Equal resolutions cost R^2*C*F, or
/// nothing when the channel counts already match.
pub fn merge_path_madds(
    input: &FeatureSpec,
    target_resolution: u32,
    target_channels: u32,
    sdo_enabled: bool,
) -> Result<MergePathCost> {
    let r0 = u64::from(input.resolution);
    let c = u64::from(input.channels);
    let r = u64::from(target_resolution);
    let f = u64::from(target_channels);
    let ratio = u64::from(resize_ratio(input.resolution, target_resolution)?);

    if input.resolution == target_resolution {
        let madds = if c == f { 0 } else { r * r * c * f };
        return Ok(MergePathCost { madds, order: ResizeOrder::NoResize });
    }

    if input.resolution > target_resolution {
        if sdo_enabled {
            Ok(MergePathCost {
                madds: r * r * ratio * ratio * c + r * r * c * f,
                order: ResizeOrder::ResizeThenConv,
            })
        } else {
            Ok(MergePathCost {
                madds: r0 * r0 * c * f + r * r * ratio * ratio * f,
                order: ResizeOrder::ConvThenResize,
            })
        }
    } else {
        Ok(MergePathCost { madds: r0 * r0 * c * f, order: ResizeOrder::ConvThenResize })
    }
}

/// Per-node cost row of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub node: usize,
    pub label: String,
    pub signature: OpSignature,
    pub madds: u64,
    pub params: u64,
    /// Present only for nodes reachable from the outputs when a latency
    /// table was supplied.
    pub latency_ms: Option<f64>,
}

/// Full cost breakdown of a graph; totals equal the sums of the rows (plus
/// the table's constant overhead for latency).
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub madds: u64,
    pub params: u64,
    pub latency_ms: Option<f64>,
    pub overhead_ms: Option<f64>,
    pub rows: Vec<CostRow>,
}

impl CostReport {
    /// Tabular text export, one row per node.
    pub fn to_table(&self) -> String {
        let mut out = String::from("node\tkind\tsignature\tmadds\tparams\tlatency_ms\tlabel\n");
        for row in &self.rows {
            let ms = row
                .latency_ms
                .map(|v| v.to_string())
                .unwrap_or_else(|| "-".to_string());
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                row.node, row.signature.kind, row.signature, row.madds, row.params, ms, row.label
            ));
        }
        if let Some(overhead) = self.overhead_ms {
            out.push_str(&format!("overhead\t-\t-\t0\t0\t{overhead}\t-\n"));
        }
        out.push_str(&format!(
            "total\t-\t-\t{}\t{}\t{}\t-\n",
            self.madds,
            self.params,
            self.latency_ms.map(|v| v.to_string()).unwrap_or_else(|| "-".to_string())
        ));
        out
    }
}

/// Assemble the per-node cost table; latency columns are filled from the
/// lookup table when one is given.
pub fn cost_report(graph: &ResolvedGraph, lut: Option<&LatencyTable>) -> Result<CostReport> {
    let mut rows = Vec::with_capacity(graph.nodes.len());
    let estimate = lut.map(|t| estimate_latency(graph, t)).transpose()?;
    let reachable_latency: std::collections::HashMap<usize, f64> = estimate
        .as_ref()
        .map(|e| e.rows.iter().map(|r| (r.node, r.latency_ms)).collect())
        .unwrap_or_default();

    let mut madds = 0u64;
    let mut params = 0u64;
    for (idx, node) in graph.nodes.iter().enumerate() {
        let signature = OpSignature::of(node);
        let row = CostRow {
            node: idx,
            label: node.label.clone(),
            signature,
            madds: signature_madds(&signature),
            params: signature_params(&signature),
            latency_ms: reachable_latency.get(&idx).copied(),
        };
        madds += row.madds;
        params += row.params;
        rows.push(row);
    }

    Ok(CostReport {
        madds,
        params,
        latency_ms: estimate.as_ref().map(|e| e.total_ms),
        overhead_ms: estimate.as_ref().map(|e| e.overhead_ms),
        rows,
    })
}
