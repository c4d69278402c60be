//! Connectivity-based latency lookup table: per-signature millisecond
//! entries summed over the nodes reachable from a graph's outputs, plus a
//! constant overhead covering backbone, predictor and runtime fixed cost.

use std::collections::BTreeMap;
use std::path::Path;

use crate::arch::{level_resolution, OpKind, ResolvedGraph};
use crate::error::{Error, Result};
use crate::space::{SearchSpaceDef, PYRAMID_LEVELS};
use crate::util::StableMix;

use super::{signature_madds, OpSignature};

/// Map from operator signatures to per-op latency in milliseconds.
/// Lookups of absent signatures are errors, never silently zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyTable {
    entries: BTreeMap<OpSignature, f64>,
    pub constant_overhead_ms: f64,
}

impl LatencyTable {
    pub fn new(constant_overhead_ms: f64) -> LatencyTable {
        LatencyTable { entries: BTreeMap::new(), constant_overhead_ms }
    }

    pub fn insert(&mut self, signature: OpSignature, latency_ms: f64) {
        debug_assert!(latency_ms >= 0.0, "latencies are non-negative");
        self.entries.insert(signature, latency_ms);
    }

    pub fn get(&self, signature: &OpSignature) -> Option<f64> {
        self.entries.get(signature).copied()
    }

    pub fn lookup(&self, signature: &OpSignature) -> Result<f64> {
        self.get(signature)
            .ok_or_else(|| Error::LutMiss(signature.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Serialize to the line-oriented text format:
    ///
    /// ```text
    /// overhead_ms 120
    /// conv1x1 20 20 48 96 1 1 0.3072
    /// ```
    ///
    /// One `<kind> <rin> <rout> <cin> <cout> <k> <s> <ms>` entry per line,
    /// in signature order; `#` starts a comment.
    pub fn write_text(&self) -> String {
        let mut out = format!("overhead_ms {}\n", self.constant_overhead_ms);
        for (sig, ms) in &self.entries {
            out.push_str(&format!("{sig} {ms}\n"));
        }
        out
    }

    pub fn parse_text(text: &str, source_name: &str) -> Result<LatencyTable> {
        let mut overhead = None;
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let ln = lineno + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(value) = line.strip_prefix("overhead_ms ") {
                let v = value.trim().parse::<f64>().map_err(|e| {
                    Error::parse(source_name, ln, format!("bad overhead `{value}`: {e}"))
                })?;
                if overhead.replace(v).is_some() {
                    return Err(Error::parse(source_name, ln, "duplicate overhead_ms line"));
                }
                continue;
            }
            let (sig_text, ms_text) = line
                .rsplit_once(' ')
                .ok_or_else(|| Error::parse(source_name, ln, "entry needs signature and ms"))?;
            let signature = sig_text
                .parse::<OpSignature>()
                .map_err(|e| Error::parse(source_name, ln, e.to_string()))?;
            let latency = ms_text
                .parse::<f64>()
                .map_err(|e| Error::parse(source_name, ln, format!("bad latency: {e}")))?;
            if !latency.is_finite() || latency < 0.0 {
                return Err(Error::parse(source_name, ln, format!("latency {latency} out of range")));
            }
            entries.insert(signature, latency);
        }
        Ok(LatencyTable {
            entries,
            constant_overhead_ms: overhead
                .ok_or_else(|| Error::parse(source_name, 0, "missing overhead_ms header"))?,
        })
    }

    pub fn load(path: &Path) -> Result<LatencyTable> {
        let text = std::fs::read_to_string(path)?;
        LatencyTable::parse_text(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.write_text())?;
        Ok(())
    }
}

/// One reachable node's contribution to a latency estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyRow {
    pub node: usize,
    pub signature: OpSignature,
    pub latency_ms: f64,
}

/// Estimated latency with its exact breakdown: `total_ms` is
/// `overhead_ms` plus the sum of the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyEstimate {
    pub total_ms: f64,
    pub overhead_ms: f64,
    pub rows: Vec<LatencyRow>,
}

/// Sum table entries over the nodes reachable from the graph outputs.
/// Unreachable nodes contribute exactly zero; a missing signature on a
/// reachable node is an error naming the signature.
pub fn estimate_latency(graph: &ResolvedGraph, lut: &LatencyTable) -> Result<LatencyEstimate> {
    let reachable = graph.reachable_from_outputs();
    let mut rows = Vec::new();
    for (idx, node) in graph.nodes.iter().enumerate() {
        if !reachable[idx] {
            continue;
        }
        let signature = OpSignature::of(node);
        let latency_ms = lut.lookup(&signature)?;
        rows.push(LatencyRow { node: idx, signature, latency_ms });
    }
    // Total = overhead + row sum, in exactly this association so callers
    // can reproduce it from the breakdown bit-for-bit.
    let total_ms = lut.constant_overhead_ms + rows.iter().map(|r| r.latency_ms).sum::<f64>();
    Ok(LatencyEstimate { total_ms, overhead_ms: lut.constant_overhead_ms, rows })
}

/// Synthetic per-op latency generator: latency proportional to MAdds plus a
/// fixed per-op cost, with optional seeded multiplicative noise derived from
/// the signature so identical builds yield identical tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyModel {
    pub ms_per_madd: f64,
    pub fixed_ms_per_op: f64,
    /// Relative noise amplitude in [0, 1); 0 disables noise.
    pub noise_fraction: f64,
    pub seed: u64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel { ms_per_madd: 1e-6, fixed_ms_per_op: 0.05, noise_fraction: 0.0, seed: 0 }
    }
}

impl LatencyModel {
    pub fn latency_for(&self, signature: &OpSignature) -> f64 {
        debug_assert!(
            self.ms_per_madd >= 0.0
                && self.fixed_ms_per_op >= 0.0
                && (0.0..1.0).contains(&self.noise_fraction),
            "generator parameters must be non-negative with noise in [0, 1)"
        );
        let base = self.ms_per_madd * signature_madds(signature) as f64 + self.fixed_ms_per_op;
        if self.noise_fraction == 0.0 {
            return base;
        }
        let u = StableMix::new(self.seed)
            .mix_u32(signature.kind as u32)
            .mix_u32(signature.input_resolution)
            .mix_u32(signature.output_resolution)
            .mix_u32(signature.input_channels)
            .mix_u32(signature.output_channels)
            .mix_u32(signature.kernel)
            .mix_u32(signature.stride)
            .finish01();
        base * (1.0 + self.noise_fraction * (2.0 * u - 1.0))
    }
}

/// Build a table covering every signature appearing in the given graphs.
pub fn synth_lut(
    graphs: &[ResolvedGraph],
    model: &LatencyModel,
    constant_overhead_ms: f64,
) -> LatencyTable {
    let mut table = LatencyTable::new(constant_overhead_ms);
    for graph in graphs {
        for node in &graph.nodes {
            let signature = OpSignature::of(node);
            if table.get(&signature).is_none() {
                table.insert(signature, model.latency_for(&signature));
            }
        }
    }
    table
}

/// Every signature any decoded genome of the space can produce at the given
/// image size. Over-approximates slightly (e.g. channel pairs that never
/// co-occur), which only makes the table larger, never missing.
pub fn signature_universe(space: &SearchSpaceDef, input_image_size: u32) -> Result<Vec<OpSignature>> {
    let resolutions: Vec<u32> = PYRAMID_LEVELS
        .iter()
        .map(|&l| level_resolution(input_image_size, l))
        .collect::<Result<_>>()?;
    let mut channels: Vec<u32> = space
        .channel_choices
        .iter()
        .chain(&space.expansion_choices)
        .copied()
        .collect();
    channels.sort_unstable();
    channels.dedup();

    let mut signatures = Vec::new();
    let mut push = |kind, rin: u32, rout: u32, cin: u32, cout: u32, k: u32, s: u32| {
        signatures.push(OpSignature {
            kind,
            input_resolution: rin,
            output_resolution: rout,
            input_channels: cin,
            output_channels: cout,
            kernel: k,
            stride: s,
        });
    };

    for &r in &resolutions {
        for &cin in &channels {
            for &cout in &channels {
                push(OpKind::Conv1x1, r, r, cin, cout, 1, 1);
            }
        }
        for &c in &channels {
            for &k in &space.kernel_choices {
                push(OpKind::DepthwiseConv, r, r, c, c, k, 1);
            }
            push(OpKind::Add, r, r, c, c, 1, 1);
            push(OpKind::Relu, r, r, c, c, 1, 1);
            push(OpKind::SqueezeExcite, r, r, c, c, 1, 1);
        }
    }
    for &rin in &resolutions {
        for &rout in &resolutions {
            if rin == rout {
                continue;
            }
            for &c in &channels {
                if rin > rout {
                    let ratio = rin / rout;
                    push(OpKind::Downsample, rin, rout, c, c, ratio, ratio);
                } else {
                    push(OpKind::Upsample, rin, rout, c, c, 1, 1);
                }
            }
        }
    }
    Ok(signatures)
}

/// Build a table covering the space's whole signature universe; the safe
/// choice when driving a search.
pub fn synth_lut_for_space(
    space: &SearchSpaceDef,
    input_image_size: u32,
    model: &LatencyModel,
    constant_overhead_ms: f64,
) -> Result<LatencyTable> {
    let mut table = LatencyTable::new(constant_overhead_ms);
    for signature in signature_universe(space, input_image_size)? {
        table.insert(signature, model.latency_for(&signature));
    }
    Ok(table)
}
