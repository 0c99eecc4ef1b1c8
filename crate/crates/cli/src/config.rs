//! Experiment configuration files.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use sdpsi::certificate::Multipliers;
use sdpsi::generators::{InstanceSpec, ModelParams};
use sdpsi::model::{CbmParams, QualityParams, SbmParams, SideKind};
use sdpsi::oracle::ErrorMetric;
use sdpsi::sdp::SolverOptions;
use sdpsi::thresholds::ThresholdCase;

use crate::CliError;

pub const DEFAULT_TRIALS: u64 = 200;
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Cbm,
    Sbm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SideName {
    None,
    Partial,
    Noisy,
    General,
}

impl SideName {
    pub fn kind(self) -> SideKind {
        match self {
            SideName::None => SideKind::None,
            SideName::Partial => SideKind::Partial,
            SideName::Noisy => SideKind::Noisy,
            SideName::General => SideKind::General,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SideName::None => "none",
            SideName::Partial => "partial",
            SideName::Noisy => "noisy",
            SideName::General => "general",
        }
    }
}

impl ModelName {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Cbm => "cbm",
            ModelName::Sbm => "sbm",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MeanErrorRate,
    ExactRecoveryRate,
    CertificateValidityRate,
}

/// Per-field overrides of [`SolverOptions`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverride {
    pub rho: Option<f64>,
    pub tol_primal: Option<f64>,
    pub tol_constraint: Option<f64>,
    pub max_iter: Option<usize>,
    pub adaptive_rho: Option<bool>,
    pub anderson_memory: Option<usize>,
}

impl SolverOverride {
    pub fn apply(&self) -> SolverOptions {
        let mut o = SolverOptions::default();
        if self.rho.is_some() {
            o.rho = self.rho;
        }
        if let Some(v) = self.tol_primal {
            o.tol_primal = v;
        }
        if let Some(v) = self.tol_constraint {
            o.tol_constraint = v;
        }
        if let Some(v) = self.max_iter {
            o.max_iter = v;
        }
        if let Some(v) = self.adaptive_rho {
            o.adaptive_rho = v;
        }
        if let Some(v) = self.anderson_memory {
            o.anderson_memory = v;
        }
        o
    }
}

/// Parameter swept by `phase`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridParam {
    A,
    Beta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub param: GridParam,
    pub values: Vec<f64>,
}

/// One experiment cell. `b` is required for the SBM only, `xi` for the CBM
/// only, `beta1` for general side information only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelName,
    pub side: SideName,
    pub n: usize,
    pub a: f64,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub xi: Option<f64>,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub beta1: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverOverride,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub error_metric: ErrorMetric,
    /// Overrides the model's label law (balanced for the SBM).
    #[serde(default)]
    pub balanced: Option<bool>,
    #[serde(default)]
    pub lambda_star: Option<f64>,
    #[serde(default)]
    pub mu_star: Option<f64>,
    /// Only read by `phase`.
    #[serde(default)]
    pub grid: Option<Grid>,
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::MeanErrorRate, Metric::ExactRecoveryRate]
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn core(e: sdpsi::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match self.model {
            ModelName::Sbm => {
                if self.b.is_none() {
                    return Err(bad("b is required for the sbm model"));
                }
                if self.xi.is_some() {
                    return Err(bad("xi is only valid for the cbm model"));
                }
            }
            ModelName::Cbm => {
                if self.xi.is_none() {
                    return Err(bad("xi is required for the cbm model"));
                }
                if self.b.is_some() {
                    return Err(bad("b is only valid for the sbm model"));
                }
            }
        }
        match (self.side, self.beta1) {
            (SideName::General, None) => return Err(bad("beta1 is required for general side information")),
            (SideName::General, Some(_)) => {}
            (_, Some(_)) => return Err(bad("beta1 is only valid for general side information")),
            _ => {}
        }
        if self.side == SideName::None && self.beta != 0.0 {
            return Err(bad("beta must be 0 without side information"));
        }
        if self.trials == 0 {
            return Err(bad("trials must be >= 1"));
        }
        if self.n < 2 {
            return Err(bad("n must be >= 2"));
        }
        if let Some(g) = &self.grid {
            if g.values.is_empty() {
                return Err(bad("grid.values is empty"));
            }
        }
        self.solver.apply().validate().map_err(core)?;
        match self.model_params()? {
            ModelParams::Cbm(p) => p.edge_prob(self.n).map(|_| ()),
            ModelParams::Sbm(p) => p.edge_probs(self.n).map(|_| ()),
        }
        .map_err(core)?;
        sdpsi::thresholds::assess(self.threshold_case()?).map_err(core)?;
        if self.instance_spec()?.balanced() && self.n % 2 == 1 {
            return Err(bad(format!("balanced labels need even n, got {}", self.n)));
        }
        // Side parameters must exist at this n.
        self.instance_spec()?.side_params().map_err(core)?;
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        let p = match self.model {
            ModelName::Cbm => ModelParams::Cbm(CbmParams::new(self.a, self.xi.unwrap_or(f64::NAN)).map_err(core)?),
            ModelName::Sbm => ModelParams::Sbm(SbmParams::new(self.a, self.b.unwrap_or(f64::NAN)).map_err(core)?),
        };
        Ok(p)
    }

    pub fn instance_spec(&self) -> Result<InstanceSpec, CliError> {
        Ok(InstanceSpec {
            n: self.n,
            model: self.model_params()?,
            side: self.side.kind(),
            quality: QualityParams::new(self.beta, self.beta1.unwrap_or(0.0)).map_err(core)?,
            balanced: self.balanced,
        })
    }

    pub fn threshold_case(&self) -> Result<ThresholdCase, CliError> {
        threshold_case(self.model, self.side, self.a, self.b, self.xi, self.beta, self.beta1)
    }

    pub fn multipliers(&self) -> Multipliers {
        Multipliers {
            lambda_star: self.lambda_star,
            mu_star: self.mu_star,
        }
    }
}

pub fn threshold_case(
    model: ModelName,
    side: SideName,
    a: f64,
    b: Option<f64>,
    xi: Option<f64>,
    beta: f64,
    beta1: Option<f64>,
) -> Result<ThresholdCase, CliError> {
    use ThresholdCase::*;
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| bad(format!("{name} is required")));
    Ok(match model {
        ModelName::Cbm => {
            let xi = need(xi, "xi")?;
            match side {
                SideName::None => CbmNone { a, xi },
                SideName::Partial => CbmPartial { a, xi, beta },
                SideName::Noisy => CbmNoisy { a, xi, beta },
                SideName::General => CbmGeneral {
                    a,
                    xi,
                    beta1: need(beta1, "beta1")?,
                    beta,
                },
            }
        }
        ModelName::Sbm => {
            let b = need(b, "b")?;
            match side {
                SideName::None => SbmNone { a, b },
                SideName::Partial => SbmPartial { a, b, beta },
                SideName::Noisy => SbmNoisy { a, b, beta },
                SideName::General => SbmGeneral {
                    a,
                    b,
                    beta1: need(beta1, "beta1")?,
                    beta,
                },
            }
        }
    })
}

/// A config file holds one object or an array of them.
pub fn parse_configs(text: &str) -> Result<Vec<ExperimentConfig>, CliError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(format!("invalid JSON: {e}")))?;
    let configs: Vec<ExperimentConfig> = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|c| vec![c])
    }
    .map_err(|e| bad(format!("invalid config: {e}")))?;
    if configs.is_empty() {
        return Err(bad("config file holds no experiments"));
    }
    for c in &configs {
        c.validate()?;
    }
    Ok(configs)
}
