//! Persistent run records and traces, one JSON value per line.
//!
//! A record embeds the full config and calibration, so a record alone is
//! enough to re-derive and re-execute its run exactly; `wall_time_ms` is
//! the only field allowed to differ between such replays.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::calibrate::Calibration;
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::spider::{HaltReason, SelectionDiagnostics, StepRecord, Trace};
use crate::verify::SospReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// Ran, selected a candidate, certified it against the population.
    Completed,
    /// Calibration demanded a first-epoch batch larger than the dataset.
    Infeasible,
    /// The run produced no in-box candidate to select.
    NoValidCandidate,
}

/// One run of one configuration. Appended to `records.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: ExperimentConfig,
    /// Absent only when calibration itself was infeasible.
    pub calibration: Option<Calibration>,
    pub run_index: u64,
    pub run_seed: u64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_candidate: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionDiagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sosp: Option<SospReport>,
    pub data_used: u64,
    pub steps: u64,
    pub epochs: u64,
    pub perturbation_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halt: Option<HaltReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_exit: Option<u64>,
    pub budget_truncated: bool,
    /// Completed with every candidate inside the box.
    pub valid: bool,
    /// Wall-clock duration; excluded from determinism comparisons.
    pub wall_time_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResultRecord {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidRecord(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serialization is total")
    }

    /// Equality with `wall_time_ms` masked out.
    pub fn same_outcome(&self, other: &ResultRecord) -> bool {
        let mut a = self.clone();
        let mut b = other.clone();
        a.wall_time_ms = 0.0;
        b.wall_time_ms = 0.0;
        a == b
    }
}

pub fn write_records(path: impl AsRef<Path>, records: &[ResultRecord], append: bool) -> Result<()> {
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)?;
    for r in records {
        writeln!(file, "{}", r.to_json())?;
    }
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>> {
    let file = std::fs::File::open(path)?;
    let mut records = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(ResultRecord::from_json(&line)?);
    }
    Ok(records)
}

/// Everything in a [`Trace`] except the per-step history; closes a trace
/// file so the steps can be checked against run-level accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub final_x: Vec<f64>,
    pub halt: HaltReason,
    pub data_used: u64,
    pub epochs: u64,
    pub perturbation_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_exit: Option<u64>,
    pub budget_truncated: bool,
    pub seed: u64,
}

/// One line of a trace file: step lines in order, then one summary line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceLine {
    Step(StepRecord),
    Summary(TraceSummary),
}

impl TraceLine {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidRecord(e.to_string()))
    }
}

pub fn write_trace(path: impl AsRef<Path>, trace: &Trace) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    for step in &trace.steps {
        let line = serde_json::to_string(&TraceLine::Step(step.clone()))
            .expect("step serialization is total");
        writeln!(file, "{line}")?;
    }
    let summary = TraceLine::Summary(TraceSummary {
        final_x: trace.final_x.clone(),
        halt: trace.halt,
        data_used: trace.data_used,
        epochs: trace.epochs,
        perturbation_count: trace.perturbation_count,
        box_exit: trace.box_exit,
        budget_truncated: trace.budget_truncated,
        seed: trace.seed,
    });
    writeln!(
        file,
        "{}",
        serde_json::to_string(&summary).expect("summary serialization is total")
    )?;
    Ok(())
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let file = std::fs::File::open(path)?;
    let mut steps = Vec::new();
    let mut summary: Option<TraceSummary> = None;
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if summary.is_some() {
            return Err(Error::InvalidRecord(
                "trace line after the summary line".into(),
            ));
        }
        match TraceLine::from_json(&line)? {
            TraceLine::Step(s) => steps.push(s),
            TraceLine::Summary(s) => summary = Some(s),
        }
    }
    let summary = summary.ok_or_else(|| Error::InvalidRecord("trace has no summary line".into()))?;
    for (i, s) in steps.iter().enumerate() {
        if s.t != i as u64 {
            return Err(Error::InvalidRecord(format!(
                "step {} recorded at position {i}",
                s.t
            )));
        }
    }
    Ok(Trace {
        steps,
        final_x: summary.final_x,
        halt: summary.halt,
        data_used: summary.data_used,
        epochs: summary.epochs,
        perturbation_count: summary.perturbation_count,
        box_exit: summary.box_exit,
        budget_truncated: summary.budget_truncated,
        seed: summary.seed,
    })
}
