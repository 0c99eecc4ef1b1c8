//! One Monte Carlo trial: generate, build, solve, round, score.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sdpsi::certificate::{self, Multipliers};
use sdpsi::generators::{sample_instance, Instance, InstanceSpec, Seed};
use sdpsi::model::{t2_noisy, GraphKind, LabelVector, LikelihoodCoefs, SideInfo, SideParams};
use sdpsi::oracle::{ml_exhaustive, ErrorMetric, Feasibility};
use sdpsi::sdp::{self, exactness_check, round, SolveStatus, SolverOptions};
use sdpsi::stats::{mean, wilson, wilson_mean, Z95};
use sdpsi::{Program, Solution};

/// What a trial computes beyond the solve itself.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrialPlan {
    pub certificate: bool,
    pub oracle: bool,
}

/// Per-trial outcome; also the `--dump-trials` line format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: u64,
    pub seed: u64,
    /// `None` when the pipeline errored before producing labels.
    pub status: Option<SolveStatus>,
    pub iterations: usize,
    pub error_rate: Option<f64>,
    pub exact: bool,
    pub certificate_valid: Option<bool>,
    /// Rounded labels equal an ML maximizer.
    pub ml_agree: Option<bool>,
    /// Solver objective fell below the ML objective beyond tolerance.
    pub objective_violation: Option<bool>,
    pub message: Option<String>,
}

impl TrialRecord {
    /// Error or non-converged solve.
    pub fn failed(&self) -> bool {
        self.status != Some(SolveStatus::Converged)
    }

    fn errored(index: u64, seed: Seed, msg: String) -> Self {
        Self {
            index,
            seed: seed.0,
            status: None,
            iterations: 0,
            error_rate: None,
            exact: false,
            certificate_valid: None,
            ml_agree: None,
            objective_violation: None,
            message: Some(msg),
        }
    }
}

/// Relative slack in the objective comparison against ML; the solver stops
/// at relative accuracy 1e−5.
pub const OBJECTIVE_SLACK: f64 = 1e-4;

pub struct TrialContext<'a> {
    pub spec: &'a InstanceSpec,
    pub solver: &'a SolverOptions,
    pub metric: ErrorMetric,
    pub multipliers: Multipliers,
    pub plan: TrialPlan,
    pub master: Seed,
}

pub fn run_trial(ctx: &TrialContext<'_>, index: u64) -> TrialRecord {
    let seed = ctx.master.trial(index);
    match trial_inner(ctx, index, seed) {
        Ok(r) => r,
        Err(e) => TrialRecord::errored(index, seed, e.to_string()),
    }
}

fn trial_inner(ctx: &TrialContext<'_>, index: u64, seed: Seed) -> sdpsi::Result<TrialRecord> {
    let inst = sample_instance(ctx.spec, seed)?;
    let program: Program = sdp::build_for_instance(ctx.spec, &inst)?;
    let sol: Solution = sdp::solve(&program, ctx.solver)?;
    let rounded = round(&sol, inst.side.as_ref())?;
    let error_rate = ctx.metric.eval(&rounded.labels, &inst.truth)?;
    let exact = exactness_check(&sol, &inst.truth)?.exact;

    let certificate_valid = if ctx.plan.certificate {
        // A builder error (e.g. an unbalanced truth) counts as invalid.
        Some(
            certificate::build_for_instance::<f64>(ctx.spec, &inst, ctx.multipliers)
                .and_then(|c| certificate::verify(&c, &inst.truth))
                .map(|r| r.valid)
                .unwrap_or(false),
        )
    } else {
        None
    };

    let (ml_agree, objective_violation) = if ctx.plan.oracle {
        let (agree, violation) = oracle_compare(ctx.spec, &inst, &program, &sol, &rounded.labels)?;
        (Some(agree), Some(violation))
    } else {
        (None, None)
    };

    Ok(TrialRecord {
        index,
        seed: seed.0,
        status: Some(sol.status),
        iterations: sol.iterations,
        error_rate: Some(error_rate),
        exact,
        certificate_valid,
        ml_agree,
        objective_violation,
        message: None,
    })
}

/// Feasible set of the ML problem that the instance's relaxation relaxes.
pub fn oracle_feasibility(spec: &InstanceSpec, side: Option<&SideInfo>) -> Feasibility {
    let erasure = matches!(side, Some(SideInfo::Erasure { .. }));
    match (spec.model.kind(), erasure) {
        (GraphKind::Sbm, true) => Feasibility::BalancedSideConsistent,
        (GraphKind::Sbm, false) => Feasibility::Balanced,
        (GraphKind::Cbm, true) => Feasibility::SideConsistent,
        (GraphKind::Cbm, false) => Feasibility::Unconstrained,
    }
}

/// Likelihood coefficients matching the relaxation's cost. Without a linear
/// term the argmax does not depend on T₁ > 0, so T₁ = 1 is used there (this
/// also covers the noiseless channel, where T₁ is infinite).
pub fn oracle_coefs(spec: &InstanceSpec, side: Option<&SideInfo>) -> sdpsi::Result<LikelihoodCoefs<f64>> {
    match side {
        None | Some(SideInfo::Erasure { .. }) => Ok(LikelihoodCoefs { t1: 1.0, t2: 0.0 }),
        Some(SideInfo::Noisy { .. }) => {
            let t1 = sdp::graph_coefficient::<f64>(&spec.model, spec.n)?;
            let t2 = match spec.side_params()? {
                Some(SideParams::Noisy { alpha }) => t2_noisy(alpha)?,
                _ => return Err(sdpsi::Error::Parameter("noisy side needs noisy parameters".into())),
            };
            Ok(LikelihoodCoefs { t1, t2 })
        }
        Some(SideInfo::General { .. }) => Ok(LikelihoodCoefs {
            t1: sdp::graph_coefficient::<f64>(&spec.model, spec.n)?,
            t2: 0.0,
        }),
    }
}

/// (rounded labels agree with an ML maximizer, solver objective below ML).
/// Both objectives are evaluated as ⟨C, ·⟩ of the same program, so they
/// are directly comparable.
fn oracle_compare(
    spec: &InstanceSpec,
    inst: &Instance,
    program: &Program,
    sol: &Solution,
    labels: &LabelVector,
) -> sdpsi::Result<(bool, bool)> {
    let side = inst.side.as_ref();
    let ml = ml_exhaustive(&inst.graph, side, oracle_coefs(spec, side)?, oracle_feasibility(spec, side))?;
    // With no revealed label the relaxation is symmetric under a global flip.
    let flip = program.sign_ambiguous || side.is_none();
    let agree = ml.contains(labels, flip);
    let ml_obj = program.objective(&program.embed(&ml.argmax[0]));
    let violation = sol.objective < ml_obj - OBJECTIVE_SLACK * (1.0 + ml_obj.abs());
    Ok((agree, violation))
}

/// Runs `trials` trials in parallel; results are in index order regardless
/// of scheduling.
pub fn run_trials(ctx: &TrialContext<'_>, trials: u64) -> Vec<TrialRecord> {
    (0..trials).into_par_iter().map(|i| run_trial(ctx, i)).collect()
}

/// Aggregates over one experiment cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub trials: u64,
    pub failures: u64,
    /// Mean of the per-trial error over trials that produced labels.
    pub mean_error_rate: f64,
    pub err_ci: (f64, f64),
    pub exact_recovery_rate: f64,
    pub exact_ci: (f64, f64),
    pub certificate_validity_rate: Option<f64>,
    pub certificate_ci: Option<(f64, f64)>,
    /// P(exact | certificate valid); `None` without valid certificates.
    pub certificate_agreement: Option<f64>,
    /// P(ML agreement | exact); `None` without exact trials.
    pub ml_agreement: Option<f64>,
    pub ml_agreement_trials: u64,
    pub objective_violations: u64,
}

pub fn summarize(records: &[TrialRecord]) -> Summary {
    let trials = records.len() as u64;
    let failures = records.iter().filter(|r| r.failed()).count() as u64;
    let errors: Vec<f64> = records.iter().filter_map(|r| r.error_rate).collect();
    let exact_hits = records.iter().filter(|r| r.exact).count() as u64;

    let certs: Vec<&TrialRecord> = records.iter().filter(|r| r.certificate_valid.is_some()).collect();
    let (certificate_validity_rate, certificate_ci, certificate_agreement) = if certs.is_empty() {
        (None, None, None)
    } else {
        let valid: Vec<&&TrialRecord> = certs.iter().filter(|r| r.certificate_valid == Some(true)).collect();
        let hits = valid.len() as u64;
        let agree = if valid.is_empty() {
            None
        } else {
            Some(valid.iter().filter(|r| r.exact).count() as f64 / valid.len() as f64)
        };
        (
            Some(hits as f64 / certs.len() as f64),
            Some(wilson(hits, certs.len() as u64, Z95)),
            agree,
        )
    };

    let exact_with_oracle: Vec<&TrialRecord> = records.iter().filter(|r| r.exact && r.ml_agree.is_some()).collect();
    let ml_agreement = if exact_with_oracle.is_empty() {
        None
    } else {
        let a = exact_with_oracle.iter().filter(|r| r.ml_agree == Some(true)).count();
        Some(a as f64 / exact_with_oracle.len() as f64)
    };

    Summary {
        trials,
        failures,
        mean_error_rate: mean(&errors),
        err_ci: wilson_mean(&errors, Z95),
        exact_recovery_rate: exact_hits as f64 / trials.max(1) as f64,
        exact_ci: wilson(exact_hits, trials, Z95),
        certificate_validity_rate,
        certificate_ci,
        certificate_agreement,
        ml_agreement,
        ml_agreement_trials: exact_with_oracle.len() as u64,
        objective_violations: records.iter().filter(|r| r.objective_violation == Some(true)).count() as u64,
    }
}
