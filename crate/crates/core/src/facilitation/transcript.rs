use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DebateRecord, Winner};
use crate::error::{LabError, Result};

/// One line of a debate transcript file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub round: usize,
    pub query_idx: usize,
    pub score: f64,
    pub winner: Winner,
    pub judge_capacity: usize,
}

impl From<&DebateRecord> for TranscriptRecord {
    fn from(r: &DebateRecord) -> Self {
        Self {
            round: r.round,
            query_idx: r.query_idx,
            score: r.score,
            winner: r.winner,
            judge_capacity: r.judge_capacity,
        }
    }
}

pub fn write_transcript(records: &[DebateRecord], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, &TranscriptRecord::from(r))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TranscriptRecord = serde_json::from_str(&line).map_err(|e| LabError::Parse {
            what: "debate transcript",
            path: path.to_path_buf(),
            line: n + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}
