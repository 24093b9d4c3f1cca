//! Grid sweeps with per-cell summary statistics.
//!
//! Each cell runs the full experiment for its (n, d, ε) and reduces the
//! completed runs to quartiles of the achieved gradient norm and of the
//! curvature margin λ_min + √(ρα) (nonnegative ⇔ second-order condition
//! met). A failing cell records its error and the sweep keeps going.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiment::run_experiment;
use crate::harness::gridspec::GridSpec;
use crate::harness::record::{ResultRecord, RunStatus};
use crate::verify::quantile;

/// One grid cell's summary. Serialized as one CSV row; `eps` prints as
/// `inf` for the non-private limit and parses back the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    pub dim: usize,
    pub eps: f64,
    pub runs: u64,
    pub completed: u64,
    pub grad_q25: Option<f64>,
    pub grad_median: Option<f64>,
    pub grad_q75: Option<f64>,
    pub margin_q25: Option<f64>,
    pub margin_median: Option<f64>,
    pub margin_q75: Option<f64>,
    pub error: Option<String>,
}

fn summarize_cell(config: &ExperimentConfig, records: &[ResultRecord]) -> SweepRow {
    let mut row = SweepRow {
        n: config.data.n,
        dim: config.problem.dim,
        eps: config.privacy.eps,
        runs: records.len() as u64,
        completed: 0,
        grad_q25: None,
        grad_median: None,
        grad_q75: None,
        margin_q25: None,
        margin_median: None,
        margin_q75: None,
        error: None,
    };
    let mut grads = Vec::new();
    let mut margins = Vec::new();
    for r in records {
        if r.status != RunStatus::Completed {
            continue;
        }
        let (Some(sosp), Some(calib)) = (&r.sosp, &r.calibration) else {
            continue;
        };
        row.completed += 1;
        grads.push(sosp.grad_norm);
        margins.push(sosp.min_eig + (calib.inputs.rho_hessian * calib.alpha).sqrt());
    }
    if row.completed > 0 {
        row.grad_q25 = quantile(&grads, 0.25).ok();
        row.grad_median = quantile(&grads, 0.5).ok();
        row.grad_q75 = quantile(&grads, 0.75).ok();
        row.margin_q25 = quantile(&margins, 0.25).ok();
        row.margin_median = quantile(&margins, 0.5).ok();
        row.margin_q75 = quantile(&margins, 0.75).ok();
    } else if row.error.is_none() {
        let first_error = records.iter().find_map(|r| r.error.clone());
        row.error = Some(first_error.unwrap_or_else(|| "no completed runs".into()));
    }
    row
}

/// Run every cell of the grid against the base config. Returns the summary
/// rows plus every underlying record, both in cell order.
pub fn run_sweep(
    base: &ExperimentConfig,
    grid: &GridSpec,
) -> Result<(Vec<SweepRow>, Vec<ResultRecord>)> {
    base.validate()?;
    let cells = grid.cells(base);
    if cells.is_empty() {
        return Err(Error::InvalidGrid("grid has no cells".into()));
    }
    let outcomes: Vec<(SweepRow, Vec<ResultRecord>)> = cells
        .par_iter()
        .map(|cell| match run_experiment(cell) {
            Ok(out) => (summarize_cell(cell, &out.records), out.records),
            // Keep sweeping; the row carries the cell's failure.
            Err(e) => {
                let mut row = summarize_cell(cell, &[]);
                row.error = Some(e.to_string());
                (row, Vec::new())
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut records = Vec::new();
    for (row, recs) in outcomes {
        rows.push(row);
        records.extend(recs);
    }
    Ok((rows, records))
}

pub fn sweep_to_csv(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn sweep_from_csv(path: impl AsRef<Path>) -> Result<Vec<SweepRow>> {
    parse_sweep_csv(&std::fs::read_to_string(path)?)
}

/// Strict CSV parser for sweep summaries (also the fuzzing entry point).
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        let row: SweepRow = row.map_err(|e| Error::InvalidRecord(e.to_string()))?;
        if !(row.eps > 0.0) || row.n < 1 || row.dim < 1 || row.completed > row.runs {
            return Err(Error::InvalidRecord(format!(
                "inconsistent sweep row: n={} dim={} eps={} completed={}/{}",
                row.n, row.dim, row.eps, row.completed, row.runs
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}
