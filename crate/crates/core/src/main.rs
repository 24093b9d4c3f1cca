//! Benchmark CLI for the private SOSP search.
//!
//! Exit codes: 0 on success, 1 for invalid inputs (configs, grids, record
//! files, CSVs), 2 for failures while executing a valid request (including
//! verification mismatches).

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use dp_spider::eps::format_eps;
use dp_spider::error::Result;
use dp_spider::harness::record::{read_records, write_records, write_trace, ResultRecord, RunStatus};
use dp_spider::harness::{
    run_experiment, run_sweep, scaling_report, sweep_from_csv, sweep_to_csv, ExperimentConfig,
    GridSpec, SweepRow,
};
use dp_spider::verify::descent_audit;

/// Default-output override honored when neither `--out` nor the config's
/// `output.dir` is set.
const OUT_ENV: &str = "DP_SPIDER_OUT";

#[derive(Parser)]
#[command(
    name = "dp-spider",
    version,
    about = "Differentially private search for second-order stationary points"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every seeded run of a config; append to records.jsonl.
    Run {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: config output.dir, then $DP_SPIDER_OUT, then ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a grid of (n, d, eps) cells and write a CSV summary.
    Sweep {
        /// Base experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Grid spec, e.g. "n=1e3,1e4,1e5;d=5;eps=2,inf".
        #[arg(long)]
        grid: String,
        /// Output directory (default: config output.dir, then $DP_SPIDER_OUT, then ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute each record in a JSONL file and confirm identical outcomes.
    Verify {
        /// records.jsonl written by `run` or `sweep`.
        #[arg(long)]
        record: PathBuf,
    },
    /// Fit scaling exponents from a sweep CSV.
    Report {
        /// sweep.csv written by `sweep`.
        #[arg(long)]
        csv: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, out),
        Command::Sweep { config, grid, out } => cmd_sweep(&config, &grid, out),
        Command::Verify { record } => cmd_verify(&record),
        Command::Report { csv } => cmd_report(&csv),
    }
}

fn resolve_out(cli_out: Option<PathBuf>, config: &ExperimentConfig) -> PathBuf {
    cli_out
        .or_else(|| config.output.dir.clone().map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn describe(r: &ResultRecord) -> String {
    let head = format!("run {:>3} seed {:016x}", r.run_index, r.run_seed);
    match r.status {
        RunStatus::Completed => {
            let sosp = r.sosp.as_ref().expect("completed runs carry a report");
            format!(
                "{head}: grad {:.3e}  min_eig {:+.4}  sosp {}  data {}  steps {}  halt {}{}",
                sosp.grad_norm,
                sosp.min_eig,
                sosp.is_sosp,
                r.data_used,
                r.steps,
                r.halt.expect("completed runs halt"),
                if r.box_exit.is_some() {
                    "  [left box]"
                } else {
                    ""
                },
            )
        }
        RunStatus::Infeasible => format!(
            "{head}: infeasible ({})",
            r.error.as_deref().unwrap_or("no detail")
        ),
        RunStatus::NoValidCandidate => format!(
            "{head}: no valid candidate ({})",
            r.error.as_deref().unwrap_or("no detail")
        ),
    }
}

fn cmd_run(config_path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<ExitCode> {
    let mut config = ExperimentConfig::from_path(config_path)?;
    if let Some(seed) = seed {
        config.seeds.master_seed = seed;
    }
    let out_dir = resolve_out(out, &config);
    std::fs::create_dir_all(&out_dir)?;
    let output = run_experiment(&config)?;
    for r in &output.records {
        println!("{}", describe(r));
    }
    let records_path = out_dir.join("records.jsonl");
    write_records(&records_path, &output.records, true)?;
    println!(
        "appended {} record(s) to {}",
        output.records.len(),
        records_path.display()
    );
    for (record, trace) in output.records.iter().zip(&output.traces) {
        if let Some(trace) = trace {
            let path = out_dir.join(format!("trace-run{}.jsonl", record.run_index));
            write_trace(&path, trace)?;
            println!("wrote trace to {}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn describe_row(row: &SweepRow) -> String {
    let stats = match (row.grad_median, row.margin_median) {
        (Some(g), Some(m)) => format!("grad_median {g:.3e}  margin_median {m:+.4}"),
        _ => format!("error: {}", row.error.as_deref().unwrap_or("no detail")),
    };
    format!(
        "n {:>8}  d {:>3}  eps {:>5}  completed {:>2}/{:<2}  {stats}",
        row.n,
        row.dim,
        format_eps(row.eps),
        row.completed,
        row.runs,
    )
}

fn cmd_sweep(config_path: &Path, grid: &str, out: Option<PathBuf>) -> Result<ExitCode> {
    let config = ExperimentConfig::from_path(config_path)?;
    let grid = GridSpec::parse(grid)?;
    let out_dir = resolve_out(out, &config);
    std::fs::create_dir_all(&out_dir)?;
    let (rows, records) = run_sweep(&config, &grid)?;
    for row in &rows {
        println!("{}", describe_row(row));
    }
    let csv_path = out_dir.join("sweep.csv");
    sweep_to_csv(&csv_path, &rows)?;
    let records_path = out_dir.join("records.jsonl");
    write_records(&records_path, &records, true)?;
    println!(
        "wrote {} row(s) to {} and {} record(s) to {}",
        rows.len(),
        csv_path.display(),
        records.len(),
        records_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(record_path: &Path) -> Result<ExitCode> {
    let records = read_records(record_path)?;
    if records.is_empty() {
        println!("no records in {}", record_path.display());
        return Ok(ExitCode::SUCCESS);
    }
    let mut failures = 0usize;
    for (i, record) in records.iter().enumerate() {
        let (fresh, trace) = dp_spider::harness::replay_record(record)?;
        let mut problems = Vec::new();
        if !record.same_outcome(&fresh) {
            problems.push("replay diverged".to_string());
        }
        if let Some(trace) = &trace {
            let spec = record.config.to_problem()?;
            if let Some(calib) = &fresh.calibration {
                let violations = descent_audit(trace, &spec, calib);
                if !violations.is_empty() {
                    problems.push(format!("{} descent violation(s)", violations.len()));
                }
            }
        }
        if problems.is_empty() {
            println!("record {i}: ok (run {} verified)", record.run_index);
        } else {
            failures += 1;
            println!("record {i}: FAILED ({})", problems.join("; "));
        }
    }
    if failures == 0 {
        println!("all {} record(s) verified", records.len());
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{failures} of {} record(s) failed verification", records.len());
        Ok(ExitCode::from(2))
    }
}

fn cmd_report(csv_path: &Path) -> Result<ExitCode> {
    let rows = sweep_from_csv(csv_path)?;
    let report = scaling_report(&rows)?;
    println!("{report}");
    Ok(ExitCode::SUCCESS)
}
