//! Domain types for the two-community censored and stochastic block models,
//! the three side-information families, and the log-likelihood coefficients
//! shared by the relaxations, certificates and the exhaustive oracle.
//!
//! All likelihood values are defined only up to an additive constant that does
//! not depend on the labeling; differences and argmaxes are the meaningful
//! quantities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::scalar::Scalar;

/// Community assignment with entries in {-1, +1}.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct LabelVector(Vec<i8>);

impl LabelVector {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::param(format!(
                "label vector needs at least 2 entries, got {}",
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::param(format!("label entry {bad} is not +1 or -1")));
        }
        Ok(Self(entries))
    }

    /// Labels from the signs of a real vector; exact zeros map to +1.
    pub fn from_signs<T: Scalar>(v: &[T]) -> Result<Self> {
        Self::new(
            v.iter()
                .map(|&x| if x < T::zero() { -1 } else { 1 })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|v| -v).collect())
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().map(|&v| v as i64).sum()
    }

    pub fn is_balanced(&self) -> bool {
        self.sum() == 0
    }

    pub fn to_real<T: Scalar>(&self) -> Vec<T> {
        self.0.iter().map(|&v| T::from_i8(v).unwrap()).collect()
    }

    /// The rank-one matrix x xᵀ.
    pub fn outer<T: Scalar>(&self) -> SymMatrix<T> {
        let x = self.to_real::<T>();
        SymMatrix::outer(&x)
    }
}

impl TryFrom<Vec<i8>> for LabelVector {
    type Error = Error;
    fn try_from(v: Vec<i8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LabelVector> for Vec<i8> {
    fn from(v: LabelVector) -> Self {
        v.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Cbm,
    Sbm,
}

/// Dense symmetric adjacency with zero diagonal. CBM weights lie in
/// {-1, 0, +1}; SBM weights in {0, 1}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedGraph {
    n: usize,
    kind: GraphKind,
    weights: Vec<i8>,
}

/// Interchange form: node count plus the upper-triangle coordinate list.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphRecord {
    pub n: usize,
    pub kind: GraphKind,
    pub edges: Vec<(usize, usize, i8)>,
}

impl WeightedGraph {
    pub fn from_dense(kind: GraphKind, n: usize, weights: Vec<i8>) -> Result<Self> {
        if weights.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                found: weights.len(),
            });
        }
        for i in 0..n {
            if weights[i * n + i] != 0 {
                return Err(Error::param(format!("nonzero diagonal at node {i}")));
            }
            for j in (i + 1)..n {
                let w = weights[i * n + j];
                if w != weights[j * n + i] {
                    return Err(Error::param(format!("asymmetric weight at ({i}, {j})")));
                }
                check_weight(kind, w)?;
            }
        }
        Ok(Self { n, kind, weights })
    }

    pub fn from_edges(kind: GraphKind, n: usize, edges: &[(usize, usize, i8)]) -> Result<Self> {
        let mut weights = vec![0i8; n * n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::param(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(Error::param(format!("self loop at node {i}")));
            }
            check_weight(kind, w)?;
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
        Ok(Self { n, kind, weights })
    }

    /// Unchecked constructor for samplers that build valid graphs by design.
    pub(crate) fn from_dense_unchecked(kind: GraphKind, n: usize, weights: Vec<i8>) -> Self {
        debug_assert_eq!(weights.len(), n * n);
        Self { n, kind, weights }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.weights[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    /// Nonzero upper-triangle entries `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, i8)> + '_ {
        (0..self.n).flat_map(move |i| {
            ((i + 1)..self.n).filter_map(move |j| {
                let w = self.get(i, j);
                (w != 0).then_some((i, j, w))
            })
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn to_matrix<T: Scalar>(&self) -> SymMatrix<T> {
        SymMatrix::from_fn(self.n, |i, j| T::from_i8(self.get(i, j)).unwrap())
    }

    /// xᵀ G x.
    pub fn quad_form(&self, x: &[i8]) -> i64 {
        let mut acc = 0i64;
        for i in 0..self.n {
            let row = self.row(i);
            let mut s = 0i64;
            for j in 0..self.n {
                s += (row[j] * x[j]) as i64;
            }
            acc += s * x[i] as i64;
        }
        acc
    }

    pub fn to_record(&self) -> GraphRecord {
        GraphRecord {
            n: self.n,
            kind: self.kind,
            edges: self.edges().collect(),
        }
    }

    pub fn from_record(rec: &GraphRecord) -> Result<Self> {
        Self::from_edges(rec.kind, rec.n, &rec.edges)
    }
}

fn check_weight(kind: GraphKind, w: i8) -> Result<()> {
    let ok = match kind {
        GraphKind::Cbm => (-1..=1).contains(&w),
        GraphKind::Sbm => w == 0 || w == 1,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::param(format!("weight {w} not allowed for {kind:?}")))
    }
}

impl Serialize for WeightedGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightedGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = GraphRecord::deserialize(d)?;
        Self::from_record(&rec).map_err(serde::de::Error::custom)
    }
}

/// Edge probability `p = a log(n) / n`.
pub fn rate_to_prob(rate: f64, n: usize) -> f64 {
    let nf = n as f64;
    rate * nf.ln() / nf
}

/// Censored block model: an Erdős–Rényi skeleton with rate `a`, each present
/// edge carrying `x_i x_j` flipped with probability `xi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CbmParams {
    pub a: f64,
    pub xi: f64,
}

impl CbmParams {
    pub fn new(a: f64, xi: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::param(format!("CBM rate a must be positive, got {a}")));
        }
        if !(0.0..=0.5).contains(&xi) {
            return Err(Error::param(format!("CBM flip probability must be in [0, 1/2], got {xi}")));
        }
        Ok(Self { a, xi })
    }

    /// Checks the parameters against a node count and returns `p`.
    pub fn edge_prob(&self, n: usize) -> Result<f64> {
        let p = rate_to_prob(self.a, n);
        if p > 1.0 {
            return Err(Error::param(format!("edge probability {p} exceeds 1 at n = {n}")));
        }
        Ok(p)
    }
}

/// Binary symmetric stochastic block model with intra rate `a`, inter rate `b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub a: f64,
    pub b: f64,
}

impl SbmParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(b > 0.0 && a >= b && a.is_finite()) {
            return Err(Error::param(format!("SBM rates need a >= b > 0, got a = {a}, b = {b}")));
        }
        Ok(Self { a, b })
    }

    /// `(p, q)` at node count `n`.
    pub fn edge_probs(&self, n: usize) -> Result<(f64, f64)> {
        let (p, q) = (rate_to_prob(self.a, n), rate_to_prob(self.b, n));
        if p > 1.0 || q > 1.0 {
            return Err(Error::param(format!("edge probabilities ({p}, {q}) exceed 1 at n = {n}")));
        }
        Ok((p, q))
    }
}

/// Conditional probability tables for K finite-alphabet features.
/// Symbols of feature k are `1..=alphabets[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub alphabets: Vec<usize>,
    pub pos_probs: Vec<Vec<f64>>,
    pub neg_probs: Vec<Vec<f64>>,
}

const ROW_SUM_TOL: f64 = 1e-12;

impl FeatureSpec {
    /// Validates the tables. Zero entries are accepted so that deterministic
    /// features can be sampled; likelihood ratios reject them later.
    pub fn new(pos_probs: Vec<Vec<f64>>, neg_probs: Vec<Vec<f64>>) -> Result<Self> {
        if pos_probs.is_empty() {
            return Err(Error::param("feature spec needs K >= 1"));
        }
        if pos_probs.len() != neg_probs.len() {
            return Err(Error::Dimension {
                expected: pos_probs.len(),
                found: neg_probs.len(),
            });
        }
        let mut alphabets = Vec::with_capacity(pos_probs.len());
        for (k, (pr, nr)) in pos_probs.iter().zip(&neg_probs).enumerate() {
            if pr.len() < 2 || pr.len() != nr.len() {
                return Err(Error::param(format!(
                    "feature {k}: alphabet sizes {} / {} (need equal and >= 2)",
                    pr.len(),
                    nr.len()
                )));
            }
            for row in [pr, nr] {
                if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                    return Err(Error::param(format!("feature {k}: probability outside [0, 1]")));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::param(format!("feature {k}: row sums to {s}")));
                }
            }
            alphabets.push(pr.len());
        }
        Ok(Self {
            alphabets,
            pos_probs,
            neg_probs,
        })
    }

    pub fn k(&self) -> usize {
        self.alphabets.len()
    }

    /// Features of `self` followed by those of `other`.
    pub fn concat(&self, other: &FeatureSpec) -> FeatureSpec {
        let mut pos = self.pos_probs.clone();
        pos.extend(other.pos_probs.iter().cloned());
        let mut neg = self.neg_probs.clone();
        neg.extend(other.neg_probs.iter().cloned());
        FeatureSpec::new(pos, neg).expect("concatenation of valid specs")
    }

    /// Log-likelihood ratio log(α⁺/α⁻) of symbol `m` (1-based) of feature `k`.
    pub fn log_ratio<T: Scalar>(&self, k: usize, m: usize) -> Result<T> {
        let (pp, pn) = (self.pos_probs[k][m - 1], self.neg_probs[k][m - 1]);
        if pp <= 0.0 || pn <= 0.0 {
            return Err(Error::DegenerateFeature(format!(
                "feature {k}, symbol {m} has zero probability"
            )));
        }
        Ok(T::lit(pp).ln() - T::lit(pn).ln())
    }

    /// Log-likelihood of a node's features under label `x`.
    pub fn log_prob(&self, features: &[u16], x: i8) -> f64 {
        let table = if x > 0 { &self.pos_probs } else { &self.neg_probs };
        features
            .iter()
            .enumerate()
            .map(|(k, &m)| table[k][m as usize - 1].ln())
            .sum()
    }

    /// One binary feature that agrees with the label with probability `1 - flip`.
    pub fn binary_symmetric(flip: f64) -> Result<Self> {
        Self::new(vec![vec![1.0 - flip, flip]], vec![vec![flip, 1.0 - flip]])
    }

    /// Finite-n family realizing the exponents `(|β₁|, β) = (s, beta)`.
    ///
    /// Two informative symbols carry likelihood ratio `(1 - n^-s) / n^-s` in
    /// either direction and total mass `n^-beta`; when `beta > 0` a third,
    /// uninformative symbol holds the remaining mass `1 - n^-beta`.
    pub fn canonical(n: usize, s: f64, beta: f64) -> Result<Self> {
        if !(s >= 0.0 && beta >= 0.0 && s.is_finite() && beta.is_finite()) {
            return Err(Error::param(format!("exponents must be finite and >= 0, got ({s}, {beta})")));
        }
        let nf = n as f64;
        let small = nf.powf(-s);
        if s > 0.0 && small >= 0.5 {
            return Err(Error::param(format!("n^-s = {small} too large for a two-sided feature")));
        }
        let (hi, lo) = if s == 0.0 { (0.5, 0.5) } else { (1.0 - small, small) };
        if beta == 0.0 {
            return Self::new(vec![vec![hi, lo]], vec![vec![lo, hi]]);
        }
        let mass = nf.powf(-beta);
        let rest = 1.0 - mass;
        Self::new(
            vec![vec![mass * hi, mass * lo, rest]],
            vec![vec![mass * lo, mass * hi, rest]],
        )
    }
}

/// Per-node side information.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum SideInfo {
    /// Revealed label or 0 when erased.
    Erasure { values: Vec<i8> },
    /// Label observed through a binary symmetric channel.
    Noisy { values: Vec<i8> },
    /// `features[i][k]` is the symbol (1-based) of feature k at node i.
    General {
        features: Vec<Vec<u16>>,
        spec: FeatureSpec,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideKind {
    None,
    Partial,
    Noisy,
    General,
}

impl SideInfo {
    pub fn len(&self) -> usize {
        match self {
            SideInfo::Erasure { values } | SideInfo::Noisy { values } => values.len(),
            SideInfo::General { features, .. } => features.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> SideKind {
        match self {
            SideInfo::Erasure { .. } => SideKind::Partial,
            SideInfo::Noisy { .. } => SideKind::Noisy,
            SideInfo::General { .. } => SideKind::General,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: self.len(),
            });
        }
        match self {
            SideInfo::Erasure { values } => {
                if values.iter().any(|v| !(-1..=1).contains(v)) {
                    return Err(Error::param("erasure side information must be in {-1, 0, 1}"));
                }
            }
            SideInfo::Noisy { values } => {
                if values.iter().any(|&v| v != 1 && v != -1) {
                    return Err(Error::param("noisy side information must be in {-1, 1}"));
                }
            }
            SideInfo::General { features, spec } => {
                for (i, row) in features.iter().enumerate() {
                    if row.len() != spec.k() {
                        return Err(Error::param(format!("node {i}: {} features, spec has {}", row.len(), spec.k())));
                    }
                    for (k, &m) in row.iter().enumerate() {
                        if m == 0 || m as usize > spec.alphabets[k] {
                            return Err(Error::param(format!("node {i}, feature {k}: symbol {m} out of range")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Erasure/noisy values as reals; `None` for general features.
    pub fn values_real<T: Scalar>(&self) -> Option<Vec<T>> {
        match self {
            SideInfo::Erasure { values } | SideInfo::Noisy { values } => {
                Some(values.iter().map(|&v| T::from_i8(v).unwrap()).collect())
            }
            SideInfo::General { .. } => None,
        }
    }

    /// True when every revealed (erasure) label agrees with `x`, or when the
    /// variant places no hard constraint.
    pub fn consistent_with(&self, x: &[i8]) -> bool {
        match self {
            SideInfo::Erasure { values } => values.iter().zip(x).all(|(&y, &xi)| y == 0 || y == xi),
            _ => true,
        }
    }
}

/// Side-information quality exponents. `beta1` only matters for the general model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityParams {
    pub beta: f64,
    #[serde(default)]
    pub beta1: f64,
}

impl QualityParams {
    pub fn new(beta: f64, beta1: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::param(format!("beta must be finite and >= 0, got {beta}")));
        }
        if !beta1.is_finite() {
            return Err(Error::param(format!("beta1 must be finite, got {beta1}")));
        }
        Ok(Self { beta, beta1 })
    }
}

/// Graph coefficient of the censored model, `log((1 - ξ) / ξ)`.
pub fn t1_cbm<T: Scalar>(xi: T) -> Result<T> {
    if xi == T::zero() {
        return Err(Error::DegenerateChannel("xi = 0 gives an infinite coefficient".into()));
    }
    if !(xi > T::zero() && xi <= T::lit(0.5)) {
        return Err(Error::param(format!("xi must be in (0, 1/2], got {xi}")));
    }
    Ok(((T::one() - xi) / xi).ln())
}

/// Graph coefficient of the stochastic block model, `log(p(1-q) / (q(1-p)))`.
pub fn t1_sbm<T: Scalar>(p: T, q: T) -> Result<T> {
    if q == T::zero() || p == T::one() {
        return Err(Error::DegenerateChannel(format!("p = {p}, q = {q}")));
    }
    if !(q > T::zero() && q <= p && p < T::one()) {
        return Err(Error::param(format!("need 0 < q <= p < 1, got p = {p}, q = {q}")));
    }
    Ok((p * (T::one() - q) / (q * (T::one() - p))).ln())
}

/// Noisy-label coefficient `log((1 - α) / α)`.
pub fn t2_noisy<T: Scalar>(alpha: T) -> Result<T> {
    if !(alpha > T::zero() && alpha < T::lit(0.5)) {
        return Err(Error::param(format!("alpha must be in (0, 0.5), got {alpha}")));
    }
    Ok(((T::one() - alpha) / alpha).ln())
}

/// Per-node summed log-likelihood ratio of general side information.
pub fn tilde_y<T: Scalar>(side: &SideInfo) -> Result<Vec<T>> {
    let SideInfo::General { features, spec } = side else {
        return Err(Error::param("tilde_y requires general side information"));
    };
    features
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(k, &m)| spec.log_ratio::<T>(k, m as usize))
                .sum::<Result<T>>()
        })
        .collect()
}

/// Concrete finite-n side-information parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum SideParams {
    Erasure { epsilon: f64 },
    Noisy { alpha: f64 },
    General { spec: FeatureSpec },
}

/// Inverts the exponent definitions at a finite `n`: `ε = n^-β`,
/// `α = 1 / (1 + n^β)` (so that `T₂ = β log n` exactly), and the canonical
/// feature family for general side information.
pub fn quality_to_params(q: QualityParams, n: usize, kind: SideKind) -> Result<SideParams> {
    if n < 2 {
        return Err(Error::param(format!("n must be >= 2, got {n}")));
    }
    let nf = n as f64;
    match kind {
        SideKind::Partial => {
            let eps = nf.powf(-q.beta).min(1.0);
            if !(eps > 0.0) {
                return Err(Error::param(format!("erasure probability underflows at beta = {}", q.beta)));
            }
            Ok(SideParams::Erasure { epsilon: eps })
        }
        SideKind::Noisy => {
            let alpha = 1.0 / (1.0 + nf.powf(q.beta));
            if !(alpha > 0.0 && alpha < 0.5) {
                return Err(Error::param(format!("beta = {} gives alpha = {alpha} outside (0, 0.5)", q.beta)));
            }
            Ok(SideParams::Noisy { alpha })
        }
        SideKind::General => Ok(SideParams::General {
            spec: FeatureSpec::canonical(n, q.beta1.abs(), q.beta)?,
        }),
        SideKind::None => Err(Error::param("no side information to parameterize")),
    }
}

/// Coefficients needed to evaluate the joint log-likelihood.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LikelihoodCoefs<T> {
    pub t1: T,
    /// Only read for noisy side information.
    pub t2: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogLikelihood<T> {
    Value(T),
    /// The labeling contradicts a revealed label.
    Infeasible,
}

impl<T: Scalar> LogLikelihood<T> {
    pub fn value(self) -> Option<T> {
        match self {
            LogLikelihood::Value(v) => Some(v),
            LogLikelihood::Infeasible => None,
        }
    }
}

/// Joint log-likelihood of graph and side information up to an additive
/// constant: `T₁ xᵀGx / 4` plus `T₂ xᵀY / 2` (noisy), `xᵀỸ / 2` (general),
/// or a feasibility barrier (erasure).
pub fn total_loglik<T: Scalar>(
    g: &WeightedGraph,
    side: Option<&SideInfo>,
    x: &LabelVector,
    coefs: LikelihoodCoefs<T>,
) -> Result<LogLikelihood<T>> {
    let n = g.n();
    if x.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: x.len(),
        });
    }
    let graph_term = coefs.t1 * T::from_i64(g.quad_form(x.as_slice())).unwrap() / T::lit(4.0);
    let side_term = match side {
        None => T::zero(),
        Some(s) => {
            s.validate(n)?;
            match s {
                SideInfo::Erasure { .. } => {
                    if !s.consistent_with(x.as_slice()) {
                        return Ok(LogLikelihood::Infeasible);
                    }
                    T::zero()
                }
                SideInfo::Noisy { values } => {
                    let dot: i64 = values.iter().zip(x.as_slice()).map(|(&y, &v)| (y * v) as i64).sum();
                    coefs.t2 * T::from_i64(dot).unwrap() / T::lit(2.0)
                }
                SideInfo::General { .. } => {
                    let ty = tilde_y::<T>(s)?;
                    let dot: T = ty.iter().zip(x.as_slice()).map(|(&t, &v)| t * T::from_i8(v).unwrap()).sum();
                    dot / T::lit(2.0)
                }
            }
        }
    };
    Ok(LogLikelihood::Value(graph_term + side_term))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn t1_cbm_values() {
        assert!(close(t1_cbm(0.2).unwrap(), 1.3862943611198906, 1e-12));
        assert_eq!(t1_cbm(0.5).unwrap(), 0.0);
        assert!(close(t1_cbm(0.25).unwrap(), 3f64.ln(), 1e-12));
        assert!(matches!(t1_cbm(0.0), Err(Error::DegenerateChannel(_))));
        assert!(t1_cbm(0.6).is_err());
    }

    #[test]
    fn t1_cbm_antisymmetry() {
        for &xi in &[0.01f64, 0.1, 0.2, 0.33, 0.49] {
            let formal = ((1.0 - (1.0 - xi)) / (1.0 - xi)).ln();
            assert!(close(t1_cbm(xi).unwrap(), -formal, 1e-12));
        }
    }

    #[test]
    fn t1_sbm_values() {
        assert_eq!(t1_sbm(0.3, 0.3).unwrap(), 0.0);
        assert!(close(t1_sbm(0.02, 0.01).unwrap(), (0.02f64 * 0.99 / (0.01 * 0.98)).ln(), 1e-12));
        assert!(close(t1_sbm(0.02, 0.01).unwrap(), 0.7032995520, 1e-9));
        assert!(close(t1_sbm(0.5, 0.25).unwrap(), 3f64.ln(), 1e-12));
        assert!(matches!(t1_sbm(0.5, 0.0), Err(Error::DegenerateChannel(_))));
        assert!(matches!(t1_sbm(1.0, 0.1), Err(Error::DegenerateChannel(_))));
    }

    #[test]
    fn t2_noisy_values() {
        assert!(close(t2_noisy(0.25).unwrap(), 3f64.ln(), 1e-12));
        let e = std::f64::consts::E;
        assert!(close(t2_noisy(1.0 / (1.0 + e)).unwrap(), 1.0, 1e-12));
        let near = t2_noisy(0.5 - 1e-9).unwrap();
        assert!(near > 0.0 && near < 1e-8);
        assert!(t2_noisy(0.5).is_err());
        assert!(t2_noisy(0.0).is_err());
    }

    fn general(features: Vec<Vec<u16>>, spec: FeatureSpec) -> SideInfo {
        SideInfo::General { features, spec }
    }

    #[test]
    fn tilde_y_examples() {
        let spec = FeatureSpec::new(vec![vec![0.9, 0.1]], vec![vec![0.1, 0.9]]).unwrap();
        let s = general(vec![vec![1], vec![2]], spec.clone());
        let ty = tilde_y::<f64>(&s).unwrap();
        assert!(close(ty[0], 9f64.ln(), 1e-12));
        assert!(close(ty[1], -(9f64.ln()), 1e-12));

        let flat = FeatureSpec::new(vec![vec![0.3, 0.7]], vec![vec![0.3, 0.7]]).unwrap();
        let ty = tilde_y::<f64>(&general(vec![vec![1], vec![2], vec![1]], flat)).unwrap();
        assert!(ty.iter().all(|&v| v == 0.0));

        let two = spec.concat(&spec);
        let ty = tilde_y::<f64>(&general(vec![vec![1, 1]], two)).unwrap();
        assert!(close(ty[0], 2.0 * 9f64.ln(), 1e-12));
    }

    #[test]
    fn tilde_y_rejects_zero_probability() {
        let spec = FeatureSpec::new(vec![vec![1.0, 0.0]], vec![vec![0.5, 0.5]]).unwrap();
        let s = general(vec![vec![1], vec![2]], spec);
        assert!(matches!(tilde_y::<f64>(&s), Err(Error::DegenerateFeature(_))));
    }

    #[test]
    fn tilde_y_additive_under_concat() {
        let a = FeatureSpec::new(vec![vec![0.7, 0.2, 0.1]], vec![vec![0.2, 0.3, 0.5]]).unwrap();
        let b = FeatureSpec::new(vec![vec![0.6, 0.4]], vec![vec![0.45, 0.55]]).unwrap();
        let fa = vec![vec![1u16], vec![3], vec![2]];
        let fb = vec![vec![2u16], vec![1], vec![1]];
        let ya = tilde_y::<f64>(&general(fa.clone(), a.clone())).unwrap();
        let yb = tilde_y::<f64>(&general(fb.clone(), b.clone())).unwrap();
        let joint: Vec<Vec<u16>> = fa.iter().zip(&fb).map(|(x, y)| [x.clone(), y.clone()].concat()).collect();
        let yab = tilde_y::<f64>(&general(joint, a.concat(&b))).unwrap();
        for i in 0..3 {
            assert!(close(yab[i], ya[i] + yb[i], 1e-12));
        }
    }

    #[test]
    fn quality_inversions() {
        let q0 = QualityParams::new(0.0, 0.0).unwrap();
        assert_eq!(quality_to_params(q0, 37, SideKind::Partial).unwrap(), SideParams::Erasure { epsilon: 1.0 });
        let q1 = QualityParams::new(1.0, 0.0).unwrap();
        match quality_to_params(q1, 100, SideKind::Partial).unwrap() {
            SideParams::Erasure { epsilon } => assert!(close(epsilon, 0.01, 1e-15)),
            other => panic!("{other:?}"),
        }
        match quality_to_params(q1, 100, SideKind::Noisy).unwrap() {
            SideParams::Noisy { alpha } => {
                assert!(close(alpha, 1.0 / 101.0, 1e-15));
                assert!(close(t2_noisy(alpha).unwrap(), 100f64.ln(), 1e-12));
            }
            other => panic!("{other:?}"),
        }
        assert!(quality_to_params(q0, 100, SideKind::Noisy).is_err());
    }

    #[test]
    fn noisy_inversion_is_exact() {
        for &n in &[10usize, 100, 1000, 5000] {
            for &beta in &[0.05, 0.3, 1.0, 1.7, 3.0] {
                let q = QualityParams::new(beta, 0.0).unwrap();
                let SideParams::Noisy { alpha } = quality_to_params(q, n, SideKind::Noisy).unwrap() else {
                    unreachable!()
                };
                let ratio = t2_noisy(alpha).unwrap() / (n as f64).ln();
                assert!(close(ratio, beta, 1e-12), "n={n} beta={beta} ratio={ratio}");
            }
        }
    }

    #[test]
    fn canonical_family_exponents() {
        let n = 1000usize;
        let ln = (n as f64).ln();
        let spec = FeatureSpec::canonical(n, 0.8, 0.0).unwrap();
        let beta1 = spec.log_ratio::<f64>(0, 1).unwrap() / ln;
        assert!(close(beta1, 0.8 + (1.0 - 1000f64.powf(-0.8)).ln() / ln, 1e-12));
        let spec = FeatureSpec::canonical(n, 0.8, 0.5).unwrap();
        assert_eq!(spec.alphabets, vec![3]);
        let f2 = spec.pos_probs[0][0].ln() / ln;
        assert!(close(-f2, 0.5 - (1.0 - 1000f64.powf(-0.8)).ln() / ln, 1e-12));
        assert_eq!(spec.log_ratio::<f64>(0, 3).unwrap(), 0.0);
    }

    #[test]
    fn graph_validation() {
        assert!(WeightedGraph::from_dense(GraphKind::Sbm, 2, vec![0, 1, 1, 0]).is_ok());
        assert!(WeightedGraph::from_dense(GraphKind::Sbm, 2, vec![0, -1, -1, 0]).is_err());
        assert!(WeightedGraph::from_dense(GraphKind::Cbm, 2, vec![0, 1, -1, 0]).is_err());
        assert!(WeightedGraph::from_dense(GraphKind::Cbm, 2, vec![1, 0, 0, 0]).is_err());
        assert!(WeightedGraph::from_edges(GraphKind::Cbm, 3, &[(0, 0, 1)]).is_err());
    }

    #[test]
    fn graph_json_round_trip() {
        let g = WeightedGraph::from_edges(GraphKind::Cbm, 4, &[(0, 1, 1), (1, 3, -1), (2, 3, 1)]).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert!(s.contains("\"n\":4"));
        let back: WeightedGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
        let bad = r#"{"n":2,"kind":"sbm","edges":[[0,1,-1]]}"#;
        assert!(serde_json::from_str::<WeightedGraph>(bad).is_err());
    }

    #[test]
    fn label_vector_rules() {
        assert!(LabelVector::new(vec![1]).is_err());
        assert!(LabelVector::new(vec![1, 0]).is_err());
        let x = LabelVector::new(vec![1, -1, 1]).unwrap();
        assert_eq!(x.negated().as_slice(), &[-1, 1, -1]);
        assert!(serde_json::from_str::<LabelVector>("[1,2]").is_err());
    }

    #[test]
    fn loglik_examples() {
        let n = 5;
        let g = WeightedGraph::from_dense(GraphKind::Cbm, n, vec![0; n * n]).unwrap();
        let y = vec![1i8, -1, 1, 1, -1];
        let side = SideInfo::Noisy { values: y.clone() };
        let x = LabelVector::new(y).unwrap();
        let coefs = LikelihoodCoefs { t1: 1.3, t2: 0.7 };
        let v = total_loglik(&g, Some(&side), &x, coefs).unwrap().value().unwrap();
        assert!(close(v, 0.7 * n as f64 / 2.0, 1e-12));

        let g = WeightedGraph::from_edges(GraphKind::Cbm, 4, &[(0, 1, 1), (1, 2, -1), (0, 3, 1)]).unwrap();
        let x = LabelVector::new(vec![1, -1, -1, 1]).unwrap();
        let a = total_loglik(&g, None, &x, coefs).unwrap();
        let b = total_loglik(&g, None, &x.negated(), coefs).unwrap();
        assert_eq!(a, b);

        let side = SideInfo::Erasure { values: vec![0, 1, 0, 0] };
        assert_eq!(total_loglik(&g, Some(&side), &x, coefs).unwrap(), LogLikelihood::Infeasible);
    }

    /// Full per-edge / per-node log-probability, including every constant.
    fn brute_loglik(g: &WeightedGraph, p: f64, xi: f64, side: &[i8], alpha: f64, x: &[i8]) -> f64 {
        let n = g.n();
        let mut ll = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let same = x[i] == x[j];
                let w = g.get(i, j);
                let prob = match (w, same) {
                    (0, _) => 1.0 - p,
                    (1, true) | (-1, false) => p * (1.0 - xi),
                    _ => p * xi,
                };
                ll += prob.ln();
            }
            ll += if side[i] == x[i] { (1.0 - alpha).ln() } else { alpha.ln() };
        }
        ll
    }

    #[test]
    fn loglik_differences_match_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.gen_range(4..=8);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    let u: f64 = rng.gen();
                    if u < 0.3 {
                        edges.push((i, j, 1));
                    } else if u < 0.45 {
                        edges.push((i, j, -1));
                    }
                }
            }
            let g = WeightedGraph::from_edges(GraphKind::Cbm, n, &edges).unwrap();
            let side: Vec<i8> = (0..n).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
            let (p, xi, alpha) = (0.4, 0.2, 0.3);
            let coefs = LikelihoodCoefs {
                t1: t1_cbm(xi).unwrap(),
                t2: t2_noisy(alpha).unwrap(),
            };
            let s = SideInfo::Noisy { values: side.clone() };
            let rand_x = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<i8> {
                (0..n).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect()
            };
            let (x1, x2) = (rand_x(&mut rng), rand_x(&mut rng));
            let l1 = total_loglik(&g, Some(&s), &LabelVector::new(x1.clone()).unwrap(), coefs).unwrap().value().unwrap();
            let l2 = total_loglik(&g, Some(&s), &LabelVector::new(x2.clone()).unwrap(), coefs).unwrap().value().unwrap();
            let b1 = brute_loglik(&g, p, xi, &side, alpha, &x1);
            let b2 = brute_loglik(&g, p, xi, &side, alpha, &x2);
            assert!(close(l1 - l2, b1 - b2, 1e-9), "{} vs {}", l1 - l2, b1 - b2);
        }
    }
}
