//! Seeded sampling of labels, graphs and side information.
//!
//! Each sampler owns a ChaCha8 stream derived from a [`Seed`]; a trial uses
//! separate sub-streams for labels, graph and side information so that
//! changing one component never shifts the draws of another.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    quality_to_params, CbmParams, FeatureSpec, GraphKind, LabelVector, QualityParams, SbmParams,
    SideInfo, SideKind, SideParams, WeightedGraph,
};

/// 64-bit master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

/// One step of the SplitMix64 output function applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    /// `splitmix(master, trial_index)`: seed of trial `index`.
    pub fn trial(self, index: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(index)))
    }

    /// Independent sub-stream for a numbered purpose within one trial.
    pub fn derive(self, purpose: u64) -> Seed {
        Seed(splitmix64(self.0.wrapping_add(splitmix64(purpose ^ 0xA076_1D64_78BD_642F))))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

pub const STREAM_LABELS: u64 = 0;
pub const STREAM_GRAPH: u64 = 1;
pub const STREAM_SIDE: u64 = 2;

fn pm(b: bool) -> i8 {
    if b {
        1
    } else {
        -1
    }
}

pub fn sample_labels(n: usize, balanced: bool, seed: Seed) -> Result<LabelVector> {
    if n < 2 {
        return Err(Error::param(format!("n must be >= 2, got {n}")));
    }
    let mut rng = seed.rng();
    let v = if balanced {
        if n % 2 != 0 {
            return Err(Error::param(format!("balanced labels need even n, got {n}")));
        }
        let mut v: Vec<i8> = (0..n).map(|i| pm(i < n / 2)).collect();
        v.shuffle(&mut rng);
        v
    } else {
        (0..n).map(|_| pm(rng.gen::<bool>())).collect()
    };
    LabelVector::new(v)
}

pub fn sample_cbm_graph(labels: &LabelVector, params: &CbmParams, seed: Seed) -> Result<WeightedGraph> {
    let n = labels.len();
    let p = params.edge_prob(n)?;
    let xi = params.xi;
    let mut rng = seed.rng();
    let mut w = vec![0i8; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let u: f64 = rng.gen();
            if u < p {
                let truth = labels.get(i) * labels.get(j);
                let v = if u < p * xi { -truth } else { truth };
                w[i * n + j] = v;
                w[j * n + i] = v;
            }
        }
    }
    Ok(WeightedGraph::from_dense_unchecked(GraphKind::Cbm, n, w))
}

pub fn sample_sbm_graph(labels: &LabelVector, params: &SbmParams, seed: Seed) -> Result<WeightedGraph> {
    let n = labels.len();
    let (p, q) = params.edge_probs(n)?;
    let mut rng = seed.rng();
    let mut w = vec![0i8; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let prob = if labels.get(i) == labels.get(j) { p } else { q };
            if rng.gen::<f64>() < prob {
                w[i * n + j] = 1;
                w[j * n + i] = 1;
            }
        }
    }
    Ok(WeightedGraph::from_dense_unchecked(GraphKind::Sbm, n, w))
}

pub fn sample_erasure(labels: &LabelVector, epsilon: f64, seed: Seed) -> Result<SideInfo> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::param(format!("erasure probability must be in [0, 1], got {epsilon}")));
    }
    let mut rng = seed.rng();
    let values = labels
        .as_slice()
        .iter()
        .map(|&x| if rng.gen::<f64>() < epsilon { 0 } else { x })
        .collect();
    Ok(SideInfo::Erasure { values })
}

pub fn sample_noisy(labels: &LabelVector, alpha: f64, seed: Seed) -> Result<SideInfo> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::param(format!("noise probability must be in [0, 0.5), got {alpha}")));
    }
    let mut rng = seed.rng();
    let values = labels
        .as_slice()
        .iter()
        .map(|&x| if rng.gen::<f64>() < alpha { -x } else { x })
        .collect();
    Ok(SideInfo::Noisy { values })
}

pub fn sample_general(labels: &LabelVector, spec: &FeatureSpec, seed: Seed) -> Result<SideInfo> {
    let spec = FeatureSpec::new(spec.pos_probs.clone(), spec.neg_probs.clone())?;
    let dist = |rows: &[Vec<f64>]| -> Result<Vec<WeightedIndex<f64>>> {
        rows.iter()
            .map(|r| WeightedIndex::new(r).map_err(|e| Error::param(format!("feature table: {e}"))))
            .collect()
    };
    let (pos, neg) = (dist(&spec.pos_probs)?, dist(&spec.neg_probs)?);
    let mut rng = seed.rng();
    let features = labels
        .as_slice()
        .iter()
        .map(|&x| {
            let d = if x > 0 { &pos } else { &neg };
            d.iter().map(|w| (w.sample(&mut rng) + 1) as u16).collect()
        })
        .collect();
    Ok(SideInfo::General { features, spec })
}

/// Graph model with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelParams {
    Cbm(CbmParams),
    Sbm(SbmParams),
}

impl ModelParams {
    pub fn kind(&self) -> GraphKind {
        match self {
            ModelParams::Cbm(_) => GraphKind::Cbm,
            ModelParams::Sbm(_) => GraphKind::Sbm,
        }
    }

    /// Balanced labels for the SBM, i.i.d. labels for the CBM.
    pub fn default_balanced(&self) -> bool {
        matches!(self, ModelParams::Sbm(_))
    }
}

/// Everything needed to draw one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub n: usize,
    pub model: ModelParams,
    pub side: SideKind,
    pub quality: QualityParams,
    /// `None` selects the model default.
    #[serde(default)]
    pub balanced: Option<bool>,
}

impl InstanceSpec {
    pub fn balanced(&self) -> bool {
        self.balanced.unwrap_or_else(|| self.model.default_balanced())
    }

    pub fn side_params(&self) -> Result<Option<SideParams>> {
        match self.side {
            SideKind::None => Ok(None),
            kind => quality_to_params(self.quality, self.n, kind).map(Some),
        }
    }
}

/// A sampled instance with its ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub truth: LabelVector,
    pub graph: WeightedGraph,
    pub side: Option<SideInfo>,
}

pub fn sample_instance(spec: &InstanceSpec, seed: Seed) -> Result<Instance> {
    let truth = sample_labels(spec.n, spec.balanced(), seed.derive(STREAM_LABELS))?;
    let gseed = seed.derive(STREAM_GRAPH);
    let graph = match &spec.model {
        ModelParams::Cbm(p) => sample_cbm_graph(&truth, p, gseed)?,
        ModelParams::Sbm(p) => sample_sbm_graph(&truth, p, gseed)?,
    };
    let sseed = seed.derive(STREAM_SIDE);
    let side = match spec.side_params()? {
        None => None,
        Some(SideParams::Erasure { epsilon }) => Some(sample_erasure(&truth, epsilon, sseed)?),
        Some(SideParams::Noisy { alpha }) => Some(sample_noisy(&truth, alpha, sseed)?),
        Some(SideParams::General { spec }) => Some(sample_general(&truth, &spec, sseed)?),
    };
    Ok(Instance { truth, graph, side })
}

/// Interchange file: header, graph coordinate list, side information.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceBundle {
    pub header: BundleHeader,
    pub graph: WeightedGraph,
    pub side: Option<SideInfo>,
    /// Ground truth, when known.
    #[serde(default)]
    pub truth: Option<LabelVector>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleHeader {
    pub model: ModelParams,
    pub n: usize,
    pub side: SideKind,
    pub quality: QualityParams,
    pub seed: u64,
}

impl InstanceBundle {
    pub fn from_instance(spec: &InstanceSpec, seed: Seed, inst: &Instance) -> Self {
        Self {
            header: BundleHeader {
                model: spec.model,
                n: spec.n,
                side: spec.side,
                quality: spec.quality,
                seed: seed.0,
            },
            graph: inst.graph.clone(),
            side: inst.side.clone(),
            truth: Some(inst.truth.clone()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let b: Self = serde_json::from_str(s)?;
        if b.graph.n() != b.header.n {
            return Err(Error::Dimension {
                expected: b.header.n,
                found: b.graph.n(),
            });
        }
        if let Some(side) = &b.side {
            side.validate(b.header.n)?;
        }
        Ok(b)
    }
}
