//! Append-only, line-delimited search history with resume support.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One evaluated candidate, as persisted: one JSON object per line, fields
/// in fixed order so identical runs produce byte-identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub step: u64,
    pub genome: Vec<u32>,
    pub repeats: u32,
    pub status: String,
    pub quality: Option<f64>,
    pub latency_ms: Option<f64>,
    pub reward: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl HistoryRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub fn render_record(record: &HistoryRecord) -> String {
    let mut line = serde_json::to_string(record).expect("record serializes");
    line.push('\n');
    line
}

pub fn append_records(writer: &mut impl Write, records: &[HistoryRecord]) -> Result<()> {
    for record in records {
        writer.write_all(render_record(record).as_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

/// Load a history file. A torn final line (from a killed run) is dropped;
/// corruption anywhere else is an error, as are out-of-order steps.
pub fn read_history(path: &Path) -> Result<Vec<HistoryRecord>> {
    let text = std::fs::read_to_string(path)?;
    let lines: Vec<&str> = text.lines().collect();
    let mut records = Vec::with_capacity(lines.len());
    for (idx, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<HistoryRecord>(line) {
            Ok(record) => {
                if record.step != records.len() as u64 {
                    return Err(Error::parse(
                        path.display().to_string(),
                        idx + 1,
                        format!("step {} out of order (expected {})", record.step, records.len()),
                    ));
                }
                records.push(record);
            }
            Err(e) if idx + 1 == lines.len() => {
                // Interrupted mid-write; the truncated candidate will be
                // re-evaluated on resume.
                let _ = e;
                break;
            }
            Err(e) => {
                return Err(Error::parse(path.display().to_string(), idx + 1, e.to_string()))
            }
        }
    }
    Ok(records)
}
