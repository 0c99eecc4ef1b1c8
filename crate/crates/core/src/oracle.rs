//! Exhaustive maximum likelihood on small instances, and error metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{tilde_y, LabelVector, LikelihoodCoefs, SideInfo, WeightedGraph};

/// Largest `n` the enumeration accepts.
pub const MAX_ORACLE_N: usize = 20;

/// Objective values within this relative distance of the best are ties.
pub const TIE_REL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    Unconstrained,
    /// Σx = 0.
    Balanced,
    /// Agrees with every revealed label.
    SideConsistent,
    /// Both of the above, the feasible set of the balanced partial-label model.
    BalancedSideConsistent,
}

impl Feasibility {
    fn balanced(self) -> bool {
        matches!(self, Feasibility::Balanced | Feasibility::BalancedSideConsistent)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Every maximizer, in enumeration order.
    pub argmax: Vec<LabelVector>,
    /// `total_loglik` at the maximizers.
    pub objective: f64,
    /// Number of feasible points evaluated.
    pub enumerated: u64,
}

impl OracleResult {
    /// Whether `x` is one of the maximizers, optionally up to a global flip.
    pub fn contains(&self, x: &LabelVector, flip_allowed: bool) -> bool {
        self.argmax
            .iter()
            .any(|a| a == x || (flip_allowed && a.as_slice().iter().zip(x.as_slice()).all(|(p, q)| p == &-q)))
    }
}

/// Argmax of the joint log-likelihood over the feasible set by full
/// enumeration. Erasure side information always acts as a hard constraint
/// (inconsistent labels have zero likelihood).
pub fn ml_exhaustive(
    g: &WeightedGraph,
    side: Option<&SideInfo>,
    coefs: LikelihoodCoefs<f64>,
    feasible: Feasibility,
) -> Result<OracleResult> {
    let n = g.n();
    if n > MAX_ORACLE_N {
        return Err(Error::TooLarge { n, cap: MAX_ORACLE_N });
    }
    if n < 2 {
        return Err(Error::param("oracle needs n >= 2"));
    }
    if feasible.balanced() && n % 2 == 1 {
        return Err(Error::param(format!("balanced enumeration needs even n, got {n}")));
    }
    // Linear term per node, and fixed labels from erasure side information.
    let mut lin = vec![0.0; n];
    let mut fixed: Vec<Option<i8>> = vec![None; n];
    if let Some(s) = side {
        s.validate(n)?;
        match s {
            SideInfo::Erasure { values } => {
                for (f, &v) in fixed.iter_mut().zip(values) {
                    if v != 0 {
                        *f = Some(v);
                    }
                }
            }
            SideInfo::Noisy { values } => {
                for (l, &v) in lin.iter_mut().zip(values) {
                    *l = coefs.t2 * v as f64 / 2.0;
                }
            }
            SideInfo::General { .. } => {
                for (l, t) in lin.iter_mut().zip(tilde_y::<f64>(s)?) {
                    *l = t / 2.0;
                }
            }
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
    let fixed_sum: i64 = fixed.iter().flatten().map(|&v| v as i64).sum();

    let mut x = vec![0i8; n];
    for (xi, f) in x.iter_mut().zip(&fixed) {
        *xi = f.unwrap_or(-1);
    }
    let eval = |x: &[i8]| -> f64 {
        let q = g.quad_form(x) as f64;
        coefs.t1 * q / 4.0 + lin.iter().zip(x).map(|(&l, &v)| l * v as f64).sum::<f64>()
    };

    let mut best = f64::NEG_INFINITY;
    let mut ties: Vec<Vec<i8>> = Vec::new();
    let mut enumerated = 0u64;
    let mut visit = |x: &[i8]| {
        enumerated += 1;
        let v = eval(x);
        let tol = TIE_REL_TOL * (1.0 + best.abs().max(v.abs()));
        if ties.is_empty() || v > best + tol {
            best = v;
            ties.clear();
            ties.push(x.to_vec());
        } else if (v - best).abs() <= tol {
            ties.push(x.to_vec());
        }
    };

    let k = free.len();
    if feasible.balanced() {
        // Free nodes set to +1 must bring the total to zero.
        let plus_needed = (k as i64 - fixed_sum) / 2;
        if (k as i64 - fixed_sum) % 2 != 0 || plus_needed < 0 || plus_needed > k as i64 {
            return Err(Error::Domain("no balanced labelling agrees with the revealed labels".into()));
        }
        for_each_combination(k, plus_needed as usize, |mask| {
            for (b, &i) in free.iter().enumerate() {
                x[i] = if mask >> b & 1 == 1 { 1 } else { -1 };
            }
            visit(&x);
        });
    } else {
        for mask in 0u64..(1u64 << k) {
            for (b, &i) in free.iter().enumerate() {
                x[i] = if mask >> b & 1 == 1 { 1 } else { -1 };
            }
            visit(&x);
        }
    }
    let argmax = ties.into_iter().map(LabelVector::new).collect::<Result<Vec<_>>>()?;
    Ok(OracleResult {
        argmax,
        objective: best,
        enumerated,
    })
}

/// Calls `f` with every `k`-bit subset of `0..n` as a bitmask (Gosper's hack).
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(u64)) {
    if k == 0 {
        f(0);
        return;
    }
    let limit = 1u64 << n;
    let mut c = (1u64 << k) - 1;
    while c < limit {
        f(c);
        let u = c & c.wrapping_neg();
        let v = c + u;
        c = v + (((v ^ c) / u) >> 2);
    }
}

fn check_lengths(est: &LabelVector, truth: &LabelVector) -> Result<()> {
    if est.len() != truth.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            found: est.len(),
        });
    }
    Ok(())
}

/// Fraction of misclassified nodes; with `flip_allowed` the smaller of the
/// rates for `est` and `−est`.
pub fn error_rate(est: &LabelVector, truth: &LabelVector, flip_allowed: bool) -> Result<f64> {
    check_lengths(est, truth)?;
    let n = est.len();
    let wrong = est.as_slice().iter().zip(truth.as_slice()).filter(|(a, b)| a != b).count();
    let wrong = if flip_allowed { wrong.min(n - wrong) } else { wrong };
    Ok(wrong as f64 / n as f64)
}

/// Fraction of unordered pairs whose same/different-community relation is
/// wrong, i.e. of off-diagonal entries where x̂x̂ᵀ and x*x*ᵀ differ.
/// Invariant under a global flip of either argument.
pub fn pair_error_rate(est: &LabelVector, truth: &LabelVector) -> Result<f64> {
    check_lengths(est, truth)?;
    let n = est.len();
    let wrong = est.as_slice().iter().zip(truth.as_slice()).filter(|(a, b)| a != b).count();
    // A pair is wrong iff exactly one endpoint is misclassified.
    let bad_pairs = wrong * (n - wrong);
    Ok(bad_pairs as f64 / (n * (n - 1) / 2) as f64)
}

/// Which per-trial error the experiments report.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    /// [`pair_error_rate`].
    #[default]
    Pair,
    /// [`error_rate`] with the flip allowed.
    Node,
}

impl ErrorMetric {
    pub fn eval(self, est: &LabelVector, truth: &LabelVector) -> Result<f64> {
        match self {
            ErrorMetric::Pair => pair_error_rate(est, truth),
            ErrorMetric::Node => error_rate(est, truth, true),
        }
    }
}
