//! The five subcommands as library functions returning CSV rows.

use std::time::Instant;

use sdpsi::generators::Seed;
use sdpsi::oracle::MAX_ORACLE_N;
use sdpsi::stats::{wilson, Z95};
use sdpsi::thresholds::{assess, branch, Branch, Verdict};

use crate::config::{threshold_case, ExperimentConfig, GridParam, Metric, ModelName, SideName};
use crate::trials::{run_trials, summarize, Summary, TrialContext, TrialPlan, TrialRecord};
use crate::CliError;

/// Largest `n` accepted by `oracle-check`.
pub const ORACLE_CHECK_MAX_N: usize = 12;

/// Parameter echo shared by every row type.
#[derive(Clone, Debug, PartialEq)]
pub struct Echo {
    pub model: &'static str,
    pub side: &'static str,
    pub n: usize,
    pub a: f64,
    pub b: Option<f64>,
    pub xi: Option<f64>,
    pub beta: f64,
    pub beta1: Option<f64>,
    pub trials: u64,
}

impl Echo {
    fn of(c: &ExperimentConfig) -> Self {
        Self {
            model: c.model.as_str(),
            side: c.side.as_str(),
            n: c.n,
            a: c.a,
            b: c.b,
            xi: c.xi,
            beta: c.beta,
            beta1: c.beta1,
            trials: c.trials,
        }
    }
}

/// `simulate` row. Column order is part of the interface.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulateRow {
    pub echo: Echo,
    pub mean_error_rate: f64,
    pub err_ci_lo: f64,
    pub err_ci_hi: f64,
    pub exact_recovery_rate: f64,
    pub seed: u64,
    pub failures: u64,
    /// Empty unless requested in `metrics`.
    pub certificate_validity_rate: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseRow {
    pub echo: Echo,
    pub exact_recovery_rate: f64,
    pub exact_ci_lo: f64,
    pub exact_ci_hi: f64,
    pub mean_error_rate: f64,
    pub score: f64,
    pub verdict: Verdict,
    pub seed: u64,
    pub failures: u64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertifyRow {
    pub echo: Echo,
    pub certificate_validity_rate: f64,
    pub valid_ci_lo: f64,
    pub valid_ci_hi: f64,
    pub exact_recovery_rate: f64,
    /// Fraction of certified trials where the solver was exact.
    pub agreement: Option<f64>,
    pub seed: u64,
    pub failures: u64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleRow {
    pub echo: Echo,
    pub exact_rate: f64,
    pub exact_ci_lo: f64,
    pub exact_ci_hi: f64,
    /// Fraction of exact trials whose rounded labels are an ML maximizer.
    pub ml_agreement: Option<f64>,
    pub agreement_trials: u64,
    pub objective_violations: u64,
    pub seed: u64,
    pub failures: u64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdRow {
    pub model: &'static str,
    pub side: &'static str,
    pub a: f64,
    pub b: Option<f64>,
    pub xi: Option<f64>,
    pub beta: f64,
    pub beta1: Option<f64>,
    pub score: f64,
    pub branch: Branch,
    pub verdict: Verdict,
}

/// Settings that apply to every cell of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Report the exact-recovery failure rate as the headline error.
    pub strict_exact: bool,
}

/// Result of running one experiment cell.
#[derive(Clone, Debug)]
pub struct Cell {
    pub summary: Summary,
    pub records: Vec<TrialRecord>,
    pub wall_time_s: f64,
}

pub fn run_cell(cfg: &ExperimentConfig, plan: TrialPlan) -> Result<Cell, CliError> {
    cfg.validate()?;
    let spec = cfg.instance_spec()?;
    let solver = cfg.solver.apply();
    let ctx = TrialContext {
        spec: &spec,
        solver: &solver,
        metric: cfg.error_metric,
        multipliers: cfg.multipliers(),
        plan,
        master: Seed(cfg.seed),
    };
    let start = Instant::now();
    let records = run_trials(&ctx, cfg.trials);
    Ok(Cell {
        summary: summarize(&records),
        records,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

pub fn threshold(
    model: ModelName,
    side: SideName,
    a: f64,
    b: Option<f64>,
    xi: Option<f64>,
    beta: f64,
    beta1: Option<f64>,
) -> Result<ThresholdRow, CliError> {
    let case = threshold_case(model, side, a, b, xi, beta, beta1)?;
    let as_cfg = |e: sdpsi::Error| CliError::Config(e.to_string());
    let assessment = assess(case).map_err(as_cfg)?;
    Ok(ThresholdRow {
        model: model.as_str(),
        side: side.as_str(),
        a,
        b,
        xi,
        beta,
        beta1,
        score: assessment.score,
        branch: branch(case).map_err(as_cfg)?,
        verdict: assessment.verdict,
    })
}

pub fn simulate(cfg: &ExperimentConfig, opts: RunOptions) -> Result<(SimulateRow, Cell), CliError> {
    let plan = TrialPlan {
        certificate: cfg.metrics.contains(&Metric::CertificateValidityRate),
        oracle: false,
    };
    let cell = run_cell(cfg, plan)?;
    let s = &cell.summary;
    let (mean_error_rate, (err_ci_lo, err_ci_hi)) = if opts.strict_exact {
        let misses = s.trials - (s.exact_recovery_rate * s.trials as f64).round() as u64;
        (1.0 - s.exact_recovery_rate, wilson(misses, s.trials, Z95))
    } else {
        (s.mean_error_rate, s.err_ci)
    };
    let row = SimulateRow {
        echo: Echo::of(cfg),
        mean_error_rate,
        err_ci_lo,
        err_ci_hi,
        exact_recovery_rate: s.exact_recovery_rate,
        seed: cfg.seed,
        failures: s.failures,
        certificate_validity_rate: s.certificate_validity_rate,
        wall_time_s: cell.wall_time_s,
    };
    Ok((row, cell))
}

/// Expands a config's grid into one config per value (itself if no grid).
pub fn grid_cells(cfg: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let Some(grid) = &cfg.grid else {
        return vec![cfg.clone()];
    };
    grid.values
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            c.grid = None;
            match grid.param {
                GridParam::A => c.a = v,
                GridParam::Beta => c.beta = v,
            }
            c
        })
        .collect()
}

pub fn phase(cfg: &ExperimentConfig) -> Result<Vec<(PhaseRow, Cell)>, CliError> {
    let cells = grid_cells(cfg);
    // Validate the whole grid before spending time on any cell.
    for c in &cells {
        c.validate()?;
    }
    cells
        .iter()
        .map(|c| {
            let cell = run_cell(c, TrialPlan::default())?;
            let assessment = assess(c.threshold_case()?).map_err(|e| CliError::Config(e.to_string()))?;
            let s = &cell.summary;
            let row = PhaseRow {
                echo: Echo::of(c),
                exact_recovery_rate: s.exact_recovery_rate,
                exact_ci_lo: s.exact_ci.0,
                exact_ci_hi: s.exact_ci.1,
                mean_error_rate: s.mean_error_rate,
                score: assessment.score,
                verdict: assessment.verdict,
                seed: c.seed,
                failures: s.failures,
                wall_time_s: cell.wall_time_s,
            };
            Ok((row, cell))
        })
        .collect()
}

pub fn certify(cfg: &ExperimentConfig) -> Result<(CertifyRow, Cell), CliError> {
    let cell = run_cell(
        cfg,
        TrialPlan {
            certificate: true,
            oracle: false,
        },
    )?;
    let s = &cell.summary;
    let (lo, hi) = s.certificate_ci.unwrap_or((0.0, 1.0));
    let row = CertifyRow {
        echo: Echo::of(cfg),
        certificate_validity_rate: s.certificate_validity_rate.unwrap_or(0.0),
        valid_ci_lo: lo,
        valid_ci_hi: hi,
        exact_recovery_rate: s.exact_recovery_rate,
        agreement: s.certificate_agreement,
        seed: cfg.seed,
        failures: s.failures,
        wall_time_s: cell.wall_time_s,
    };
    Ok((row, cell))
}

pub fn oracle_check(cfg: &ExperimentConfig) -> Result<(OracleRow, Cell), CliError> {
    if cfg.n > ORACLE_CHECK_MAX_N.min(MAX_ORACLE_N) {
        return Err(CliError::Config(format!(
            "oracle-check needs n <= {ORACLE_CHECK_MAX_N}, got {}",
            cfg.n
        )));
    }
    let cell = run_cell(
        cfg,
        TrialPlan {
            certificate: false,
            oracle: true,
        },
    )?;
    let s = &cell.summary;
    let row = OracleRow {
        echo: Echo::of(cfg),
        exact_rate: s.exact_recovery_rate,
        exact_ci_lo: s.exact_ci.0,
        exact_ci_hi: s.exact_ci.1,
        ml_agreement: s.ml_agreement,
        agreement_trials: s.ml_agreement_trials,
        objective_violations: s.objective_violations,
        seed: cfg.seed,
        failures: s.failures,
        wall_time_s: cell.wall_time_s,
    };
    Ok((row, cell))
}

/// A row type with a frozen header.
pub trait CsvRow {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Recoverable => "recoverable",
        Verdict::NotRecoverable => "not_recoverable",
        Verdict::Boundary => "boundary",
    }
}

pub fn branch_str(b: Branch) -> &'static str {
    match b {
        Branch::Additive => "additive",
        Branch::Eta => "eta",
        Branch::Linear => "linear",
    }
}

const ECHO: [&str; 9] = ["model", "side", "n", "a", "b", "xi", "beta", "beta1", "trials"];

impl Echo {
    fn fields(&self) -> Vec<String> {
        vec![
            self.model.to_string(),
            self.side.to_string(),
            self.n.to_string(),
            num(self.a),
            opt(self.b),
            opt(self.xi),
            num(self.beta),
            opt(self.beta1),
            self.trials.to_string(),
        ]
    }
}

macro_rules! header {
    ($($tail:literal),*) => {{
        const H: &[&str] = &[ECHO[0], ECHO[1], ECHO[2], ECHO[3], ECHO[4], ECHO[5], ECHO[6], ECHO[7], ECHO[8], $($tail),*];
        H
    }};
}

impl CsvRow for SimulateRow {
    const HEADER: &'static [&'static str] = header!(
        "mean_error_rate",
        "err_ci_lo",
        "err_ci_hi",
        "exact_recovery_rate",
        "seed",
        "failures",
        "certificate_validity_rate",
        "wall_time_s"
    );

    fn fields(&self) -> Vec<String> {
        let mut f = self.echo.fields();
        f.extend([
            num(self.mean_error_rate),
            num(self.err_ci_lo),
            num(self.err_ci_hi),
            num(self.exact_recovery_rate),
            self.seed.to_string(),
            self.failures.to_string(),
            opt(self.certificate_validity_rate),
            num(self.wall_time_s),
        ]);
        f
    }
}

impl CsvRow for PhaseRow {
    const HEADER: &'static [&'static str] = header!(
        "exact_recovery_rate",
        "exact_ci_lo",
        "exact_ci_hi",
        "mean_error_rate",
        "score",
        "verdict",
        "seed",
        "failures",
        "wall_time_s"
    );

    fn fields(&self) -> Vec<String> {
        let mut f = self.echo.fields();
        f.extend([
            num(self.exact_recovery_rate),
            num(self.exact_ci_lo),
            num(self.exact_ci_hi),
            num(self.mean_error_rate),
            num(self.score),
            verdict_str(self.verdict).to_string(),
            self.seed.to_string(),
            self.failures.to_string(),
            num(self.wall_time_s),
        ]);
        f
    }
}

impl CsvRow for CertifyRow {
    const HEADER: &'static [&'static str] = header!(
        "certificate_validity_rate",
        "valid_ci_lo",
        "valid_ci_hi",
        "exact_recovery_rate",
        "agreement",
        "seed",
        "failures",
        "wall_time_s"
    );

    fn fields(&self) -> Vec<String> {
        let mut f = self.echo.fields();
        f.extend([
            num(self.certificate_validity_rate),
            num(self.valid_ci_lo),
            num(self.valid_ci_hi),
            num(self.exact_recovery_rate),
            opt(self.agreement),
            self.seed.to_string(),
            self.failures.to_string(),
            num(self.wall_time_s),
        ]);
        f
    }
}

impl CsvRow for OracleRow {
    const HEADER: &'static [&'static str] = header!(
        "exact_rate",
        "exact_ci_lo",
        "exact_ci_hi",
        "ml_agreement",
        "agreement_trials",
        "objective_violations",
        "seed",
        "failures",
        "wall_time_s"
    );

    fn fields(&self) -> Vec<String> {
        let mut f = self.echo.fields();
        f.extend([
            num(self.exact_rate),
            num(self.exact_ci_lo),
            num(self.exact_ci_hi),
            opt(self.ml_agreement),
            self.agreement_trials.to_string(),
            self.objective_violations.to_string(),
            self.seed.to_string(),
            self.failures.to_string(),
            num(self.wall_time_s),
        ]);
        f
    }
}

impl CsvRow for ThresholdRow {
    const HEADER: &'static [&'static str] = &["model", "side", "a", "b", "xi", "beta", "beta1", "score", "branch", "verdict"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.model.to_string(),
            self.side.to_string(),
            num(self.a),
            opt(self.b),
            opt(self.xi),
            num(self.beta),
            opt(self.beta1),
            num(self.score),
            branch_str(self.branch).to_string(),
            verdict_str(self.verdict).to_string(),
        ]
    }
}
