//! On-disk prediction records: one JSON object per line.
//!
//! A record carries everything evaluation needs — the input name, the gold
//! label when known, the ranked labels with per-rank provenance, the recall
//! evidence, the fallback flag, call counts, and backend latency.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prediction::{CallAccounting, Prediction, Provenance, RankedLabel};
use crate::recall::{AgentKind, RecallEntry};
use crate::taxonomy::Label;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankRecord {
    pub label: Label,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecallRecord {
    pub person: String,
    pub label: Label,
    pub agent: AgentKind,
    pub emit_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub recall: u32,
    pub direct: u32,
    pub completion: u32,
    pub reprompts: u32,
    pub total: u32,
}

impl From<&CallAccounting> for CallRecord {
    fn from(calls: &CallAccounting) -> Self {
        CallRecord {
            recall: calls.recall_calls,
            direct: calls.direct_calls,
            completion: calls.completion_calls,
            reprompts: calls.reprompts,
            total: calls.total(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub name: String,
    pub gold: Option<Label>,
    pub ranks: Vec<RankRecord>,
    pub recall: Vec<RecallRecord>,
    pub used_fallback: bool,
    pub calls: CallRecord,
    pub latency_ms: u64,
}

impl PredictionRecord {
    pub fn from_prediction(prediction: &Prediction, gold: Option<Label>) -> Self {
        PredictionRecord {
            name: prediction.name.clone(),
            gold,
            ranks: prediction
                .ranking
                .ranks
                .iter()
                .map(|RankedLabel { label, provenance }| RankRecord {
                    label: label.clone(),
                    provenance: *provenance,
                })
                .collect(),
            recall: prediction
                .recall
                .entries
                .iter()
                .map(
                    |RecallEntry {
                         person,
                         label,
                         source,
                         emit_index,
                     }| RecallRecord {
                        person: person.clone(),
                        label: label.clone(),
                        agent: *source,
                        emit_index: *emit_index,
                    },
                )
                .collect(),
            used_fallback: prediction.ranking.used_fallback,
            calls: CallRecord::from(&prediction.calls),
            latency_ms: prediction.latency.as_millis() as u64,
        }
    }

    pub fn rank_labels(&self) -> Vec<Label> {
        self.ranks.iter().map(|r| r.label.clone()).collect()
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

pub fn write_records(
    path: impl AsRef<Path>,
    records: &[PredictionRecord],
) -> Result<(), RecordError> {
    let path = path.as_ref();
    let io_err = |source| RecordError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    for record in records {
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(file, "{line}").map_err(|source| RecordError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>, RecordError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| RecordError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| RecordError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| RecordError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}
