//! Experiment harness: threshold queries, Monte Carlo sweeps, certificate
//! studies and oracle cross-checks, all writing CSV.
//!
//! Exit codes: 0 success, 1 runtime error, 2 configuration error, 3 when more
//! than half of all trials failed to converge.

pub mod commands;
pub mod config;
pub mod trials;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use commands::{CsvRow, RunOptions};
use config::{parse_configs, ExperimentConfig, ModelName, SideName};
use trials::TrialRecord;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] sdpsi::Error),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{failed} of {total} trials failed")]
    FailureRate { failed: u64, total: u64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::FailureRate { .. } => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sdpsi", version, about = "SDP community detection with side information")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write CSV here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Overrides every config's master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides every config's trial count.
    #[arg(long, global = true)]
    pub trials: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score and verdict of the exact-recovery threshold.
    Threshold(ThresholdArgs),
    /// Monte Carlo error rates.
    Simulate(RunArgs),
    /// Exact-recovery rate over a grid, next to the analytic score.
    Phase(RunArgs),
    /// Dual-certificate validity rates.
    Certify(RunArgs),
    /// Relaxation against exhaustive maximum likelihood (n <= 12).
    OracleCheck(RunArgs),
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long, value_enum)]
    pub model: ModelName,
    #[arg(long, value_enum, default_value = "none")]
    pub side: SideName,
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub beta1: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON file holding one config object or an array of them.
    pub config: PathBuf,
    /// Headline error is the exact-recovery failure rate.
    #[arg(long)]
    pub strict_exact: bool,
    /// Write every trial as a JSON line to this path.
    #[arg(long)]
    pub dump_trials: Option<PathBuf>,
}

#[derive(Serialize)]
struct DumpLine<'a> {
    cell: usize,
    #[serde(flatten)]
    record: &'a TrialRecord,
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_rows<R: CsvRow>(out: Option<&Path>, rows: &[R]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(open_out(out)?);
    w.write_record(R::HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

fn write_dump(path: &Path, cells: &[&[TrialRecord]]) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    for (cell, records) in cells.iter().enumerate() {
        for record in records.iter() {
            serde_json::to_writer(&mut w, &DumpLine { cell, record }).map_err(|e| CliError::Io(e.into()))?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

fn load_configs(path: &Path, cli: &Cli) -> Result<Vec<ExperimentConfig>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut configs = parse_configs(&text)?;
    for c in &mut configs {
        if let Some(s) = cli.seed {
            c.seed = s;
        }
        if let Some(t) = cli.trials {
            c.trials = t;
        }
        c.validate()?;
    }
    Ok(configs)
}

fn check_failures(cells: &[&[TrialRecord]]) -> Result<(), CliError> {
    let total: u64 = cells.iter().map(|c| c.len() as u64).sum();
    let failed: u64 = cells.iter().map(|c| c.iter().filter(|r| r.failed()).count() as u64).sum();
    if 2 * failed > total {
        return Err(CliError::FailureRate { failed, total });
    }
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let out = cli.out.as_deref();
    if let Command::Threshold(t) = &cli.command {
        let row = commands::threshold(t.model, t.side, t.a, t.b, t.xi, t.beta, t.beta1)?;
        return write_rows(out, &[row]);
    }
    let args = match &cli.command {
        Command::Simulate(a) | Command::Phase(a) | Command::Certify(a) | Command::OracleCheck(a) => a,
        Command::Threshold(_) => unreachable!(),
    };
    let configs = load_configs(&args.config, cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be >= 1".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| CliError::Io(io::Error::other(e)))?;

    let cells: Vec<commands::Cell> = pool.install(|| -> Result<_, CliError> {
        let mut cells = Vec::new();
        match &cli.command {
            Command::Simulate(_) => {
                let opts = RunOptions {
                    strict_exact: args.strict_exact,
                };
                let mut rows = Vec::new();
                for c in &configs {
                    let (row, cell) = commands::simulate(c, opts)?;
                    rows.push(row);
                    cells.push(cell);
                }
                write_rows(out, &rows)?;
            }
            Command::Phase(_) => {
                let mut rows = Vec::new();
                for c in &configs {
                    for (row, cell) in commands::phase(c)? {
                        rows.push(row);
                        cells.push(cell);
                    }
                }
                write_rows(out, &rows)?;
            }
            Command::Certify(_) => {
                let mut rows = Vec::new();
                for c in &configs {
                    let (row, cell) = commands::certify(c)?;
                    rows.push(row);
                    cells.push(cell);
                }
                write_rows(out, &rows)?;
            }
            Command::OracleCheck(_) => {
                let mut rows = Vec::new();
                for c in &configs {
                    let (row, cell) = commands::oracle_check(c)?;
                    rows.push(row);
                    cells.push(cell);
                }
                write_rows(out, &rows)?;
            }
            Command::Threshold(_) => unreachable!(),
        }
        Ok(cells)
    })?;

    let records: Vec<&[TrialRecord]> = cells.iter().map(|c| c.records.as_slice()).collect();
    if let Some(p) = &args.dump_trials {
        write_dump(p, &records)?;
    }
    check_failures(&records)
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("sdpsi: {e}");
            e.exit_code()
        }
    }
}
