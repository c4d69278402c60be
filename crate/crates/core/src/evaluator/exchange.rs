//! File-exchange evaluation protocol.
//!
//! A request is written as `<id>.request` in the exchange directory; an
//! external trainer answers with `<id>.response`. Files are matched purely
//! by candidate id, so concurrent evaluations need distinct ids.
//!
//! Request format:
//! ```text
//! id <candidate id>
//! genome <token> <token> ...
//! graph
//! <graph text export>
//! ```
//!
//! Response format (order-insensitive key lines):
//! ```text
//! id <candidate id>
//! quality <float in [0,1]>
//! status ok            # or: status failed <message>
//! ```

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::arch::{write_graph_text, ResolvedGraph};
use crate::error::Result;
use crate::space::Genome;

use super::{Evaluation, Evaluator};

/// Exchange directory and timing knobs.
#[derive(Debug, Clone)]
pub struct ExchangeConfig {
    pub dir: PathBuf,
    pub timeout: Duration,
    pub poll_interval: Duration,
}

impl ExchangeConfig {
    pub fn new(dir: impl Into<PathBuf>) -> ExchangeConfig {
        ExchangeConfig {
            dir: dir.into(),
            timeout: Duration::from_secs(3600),
            poll_interval: Duration::from_millis(100),
        }
    }
}

/// One candidate's evaluation request.
#[derive(Debug, Clone)]
pub struct EvalRequest {
    pub candidate_id: String,
    pub genome: Genome,
    pub graph_text: String,
}

impl EvalRequest {
    pub fn render(&self) -> String {
        format!(
            "id {}\ngenome {}\ngraph\n{}",
            self.candidate_id, self.genome, self.graph_text
        )
    }
}

fn write_atomically(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("request.tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn parse_response(text: &str, expected_id: &str) -> std::result::Result<f64, String> {
    let mut id = None;
    let mut quality = None;
    let mut status = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once(' ') {
            Some(("id", v)) => id = Some(v.trim().to_string()),
            Some(("quality", v)) => {
                let q = v
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| format!("unparsable quality `{v}`: {e}"))?;
                quality = Some(q);
            }
            Some(("status", v)) => status = Some(v.trim().to_string()),
            None if line == "status" => status = Some(String::new()),
            _ => return Err(format!("unrecognized response line `{line}`")),
        }
    }

    let id = id.ok_or("response is missing the id line")?;
    if id != expected_id {
        return Err(format!("response id `{id}` does not match request `{expected_id}`"));
    }
    let status = status.ok_or("response is missing the status line")?;
    if let Some(message) = status.strip_prefix("failed") {
        return Err(format!("trainer reported failure: {}", message.trim()));
    }
    if status != "ok" {
        return Err(format!("unrecognized status `{status}`"));
    }
    let quality = quality.ok_or("response is missing the quality line")?;
    if !(0.0..=1.0).contains(&quality) || !quality.is_finite() {
        return Err(format!("quality {quality} out of range [0,1]"));
    }
    Ok(quality)
}

/// Write the request, block until the matching response appears or the
/// timeout elapses, and parse it. Timeouts and malformed responses yield a
/// failed evaluation, never a panic or a default quality.
pub fn external_evaluate(
    request: &EvalRequest,
    config: &ExchangeConfig,
    latency_ms: f64,
) -> Evaluation {
    let request_path = config.dir.join(format!("{}.request", request.candidate_id));
    let response_path = config.dir.join(format!("{}.response", request.candidate_id));

    if let Err(e) = write_atomically(&request_path, &request.render()) {
        return Evaluation::failed(format!("could not write request: {e}"), latency_ms);
    }

    let deadline = Instant::now() + config.timeout;
    loop {
        if response_path.exists() {
            match std::fs::read_to_string(&response_path) {
                Ok(text) => {
                    return match parse_response(&text, &request.candidate_id) {
                        Ok(quality) => Evaluation::ok(quality, latency_ms),
                        Err(message) => Evaluation::failed(message, latency_ms),
                    };
                }
                Err(e) => {
                    return Evaluation::failed(format!("could not read response: {e}"), latency_ms)
                }
            }
        }
        if Instant::now() >= deadline {
            return Evaluation::failed(
                format!(
                    "timeout after {:?} waiting for {}",
                    config.timeout,
                    response_path.display()
                ),
                latency_ms,
            );
        }
        std::thread::sleep(config.poll_interval);
    }
}

/// `Evaluator` adapter over the exchange protocol.
#[derive(Debug, Clone)]
pub struct ExchangeEvaluator {
    pub config: ExchangeConfig,
}

impl Evaluator for ExchangeEvaluator {
    fn evaluate(
        &self,
        candidate_id: &str,
        genome: &Genome,
        graph: &ResolvedGraph,
        latency_ms: f64,
    ) -> Evaluation {
        let request = EvalRequest {
            candidate_id: candidate_id.to_string(),
            genome: genome.clone(),
            graph_text: write_graph_text(graph),
        };
        external_evaluate(&request, &self.config, latency_ms)
    }
}
