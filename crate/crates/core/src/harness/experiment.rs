//! Seeded end-to-end execution: calibrate once, then run every seed of a
//! config through the optimizer, select a candidate, and certify it.
//!
//! Runs execute in parallel; results collect in run-index order, so output
//! is deterministic regardless of scheduling. Seed flow: run i uses
//! `derive_seed(master_seed, i)` as its run seed; the dataset stream, tree
//! streams, and perturbation stream are further keyed off that, so runs
//! never share randomness.

use rayon::prelude::*;
use std::time::Instant;

use crate::calibrate::{derive_params, Calibration};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::record::{ResultRecord, RunStatus};
use crate::objective::{generate_dataset, ProblemSpec};
use crate::seeding::derive_seed;
use crate::spider::{run_spider_with, select_best_candidate, Trace};
use crate::verify::check_sosp;

/// Tag separating the dataset stream from the optimizer's streams.
const DATA_TAG: u64 = 0x44415453;

pub struct ExperimentOutput {
    pub records: Vec<ResultRecord>,
    /// One trace per run, populated when the config sets `emit_trace`.
    pub traces: Vec<Option<Trace>>,
}

fn blank_record(
    config: &ExperimentConfig,
    calibration: Option<Calibration>,
    run_index: u64,
    run_seed: u64,
    status: RunStatus,
    error: Option<String>,
) -> ResultRecord {
    ResultRecord {
        config: config.clone(),
        calibration,
        run_index,
        run_seed,
        status,
        best_candidate: None,
        selection: None,
        sosp: None,
        data_used: 0,
        steps: 0,
        epochs: 0,
        perturbation_count: 0,
        halt: None,
        box_exit: None,
        budget_truncated: false,
        valid: false,
        wall_time_ms: 0.0,
        error,
    }
}

fn run_one(
    config: &ExperimentConfig,
    spec: &ProblemSpec,
    calib: &Calibration,
    run_index: u64,
) -> Result<(ResultRecord, Trace)> {
    let run_seed = derive_seed(config.seeds.master_seed, run_index);
    let started = Instant::now();
    let dataset = generate_dataset(spec, config.data.n, derive_seed(run_seed, DATA_TAG));
    let trace = run_spider_with(spec, dataset, calib, run_seed, config.flags.drift_rule)?;
    let mut record = match select_best_candidate(&trace, spec, calib.alpha) {
        Ok((best, selection)) => {
            let sosp = check_sosp(spec, &best, calib.alpha)?;
            let mut r = blank_record(
                config,
                Some(calib.clone()),
                run_index,
                run_seed,
                RunStatus::Completed,
                None,
            );
            r.best_candidate = Some(best);
            r.selection = Some(selection);
            r.sosp = Some(sosp);
            r
        }
        Err(e @ (Error::EmptyTrace | Error::OutOfDomain { .. })) => blank_record(
            config,
            Some(calib.clone()),
            run_index,
            run_seed,
            RunStatus::NoValidCandidate,
            Some(e.to_string()),
        ),
        Err(e) => return Err(e),
    };
    record.data_used = trace.data_used;
    record.steps = trace.steps.len() as u64;
    record.epochs = trace.epochs;
    record.perturbation_count = trace.perturbation_count;
    record.halt = Some(trace.halt);
    record.box_exit = trace.box_exit;
    record.budget_truncated = trace.budget_truncated;
    record.valid = record.status == RunStatus::Completed && trace.box_exit.is_none();
    record.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok((record, trace))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let spec = config.to_problem()?;
    let inputs = config.to_inputs(&spec);
    let options = config.to_options();
    let calib = match derive_params(&inputs, &options) {
        Ok(c) => c,
        // An infeasible regime is a reportable outcome, not a crash: emit
        // one record per requested run so sweeps keep their shape.
        Err(e @ Error::Infeasible { .. }) => {
            let records = (0..config.seeds.num_runs)
                .map(|i| {
                    blank_record(
                        config,
                        None,
                        i,
                        derive_seed(config.seeds.master_seed, i),
                        RunStatus::Infeasible,
                        Some(e.to_string()),
                    )
                })
                .collect();
            return Ok(ExperimentOutput {
                records,
                traces: (0..config.seeds.num_runs).map(|_| None).collect(),
            });
        }
        Err(e) => return Err(e),
    };
    let results: Vec<(ResultRecord, Trace)> = (0..config.seeds.num_runs)
        .into_par_iter()
        .map(|i| run_one(config, &spec, &calib, i))
        .collect::<Result<_>>()?;
    let keep = config.flags.emit_trace;
    let mut records = Vec::with_capacity(results.len());
    let mut traces = Vec::with_capacity(results.len());
    for (record, trace) in results {
        records.push(record);
        traces.push(keep.then_some(trace));
    }
    Ok(ExperimentOutput { records, traces })
}

/// Re-execute one record's run from its embedded config. The fresh record
/// must match the stored one field-for-field (wall time aside); the trace
/// is returned for auditing.
pub fn replay_record(record: &ResultRecord) -> Result<(ResultRecord, Option<Trace>)> {
    let config = &record.config;
    config.validate()?;
    let spec = config.to_problem()?;
    match derive_params(&config.to_inputs(&spec), &config.to_options()) {
        Ok(calib) => {
            let (fresh, trace) = run_one(config, &spec, &calib, record.run_index)?;
            Ok((fresh, Some(trace)))
        }
        Err(e @ Error::Infeasible { .. }) => Ok((
            blank_record(
                config,
                None,
                record.run_index,
                derive_seed(config.seeds.master_seed, record.run_index),
                RunStatus::Infeasible,
                Some(e.to_string()),
            ),
            None,
        )),
        Err(e) => Err(e),
    }
}
