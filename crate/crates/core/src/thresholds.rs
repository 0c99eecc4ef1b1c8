//! Closed-form exact-recovery thresholds, Chernoff rate functions, and an
//! empirical tail-probability oracle.
//!
//! Inside the threshold formulas the graph coefficient takes its asymptotic
//! value: `log((1 - ξ) / ξ)` for the censored model and `log(a / b)` for the
//! stochastic block model.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::Seed;
use crate::model::t1_cbm;
use crate::scalar::Scalar;
use crate::stats::{wilson, Z95};

/// Half-width of the band around 1 reported as [`Verdict::Boundary`].
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Recoverable,
    NotRecoverable,
    Boundary,
}

impl Verdict {
    /// Recoverable iff `score > 1`, with a `BOUNDARY_TOL` band at equality.
    pub fn classify<T: Scalar>(score: T) -> Verdict {
        let d = score - T::one();
        if d.abs() <= T::lit(BOUNDARY_TOL) {
            Verdict::Boundary
        } else if d > T::zero() {
            Verdict::Recoverable
        } else {
            Verdict::NotRecoverable
        }
    }
}

/// A verdict together with the normalized score it was derived from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub verdict: Verdict,
    pub score: f64,
}

impl Assessment {
    fn from_score<T: Scalar>(score: T) -> Self {
        Self {
            verdict: Verdict::classify(score),
            score: score.to_f64_lossy(),
        }
    }
}

fn check_cbm<T: Scalar>(a: T, xi: T, beta: T) -> Result<()> {
    if !(a > T::zero() && a.is_finite()) {
        return Err(Error::param(format!("a must be positive, got {a}")));
    }
    if !(xi >= T::zero() && xi <= T::lit(0.5)) {
        return Err(Error::param(format!("xi must be in [0, 1/2], got {xi}")));
    }
    if !(beta >= T::zero() && beta.is_finite()) {
        return Err(Error::param(format!("beta must be finite and >= 0, got {beta}")));
    }
    Ok(())
}

fn check_sbm<T: Scalar>(a: T, b: T, beta: T) -> Result<()> {
    if !(b > T::zero() && a >= b && a.is_finite()) {
        return Err(Error::param(format!("need a >= b > 0, got a = {a}, b = {b}")));
    }
    if !(beta >= T::zero() && beta.is_finite()) {
        return Err(Error::param(format!("beta must be finite and >= 0, got {beta}")));
    }
    Ok(())
}

/// `β/(2T₁) · log(r)`, zero at β = 0 by continuity.
fn log_term<T: Scalar>(beta: T, t1: T, num: T, den: T) -> Result<T> {
    if beta == T::zero() {
        return Ok(T::zero());
    }
    if !(den > T::zero()) {
        return Err(Error::Domain("gamma equals beta; rate function undefined".into()));
    }
    Ok(beta / (T::lit(2.0) * t1) * (num / den).ln())
}

/// η(a, β) for the censored model with noisy or general side information.
pub fn eta_cbm<T: Scalar>(a: T, xi: T, beta: T) -> Result<T> {
    check_cbm(a, xi, beta)?;
    if xi == T::zero() || xi == T::lit(0.5) {
        return Err(Error::Domain(format!("eta needs 0 < xi < 1/2, got {xi}")));
    }
    let t1 = t1_cbm(xi)?;
    let one = T::one();
    let gamma = (beta * beta + T::lit(4.0) * xi * (one - xi) * a * a * t1 * t1).sqrt();
    let lt = log_term(beta, t1, (one - xi) * (gamma + beta), xi * (gamma - beta))?;
    Ok(a - gamma / t1 + lt)
}

/// η(a, b, β) for the stochastic block model with noisy or general side information.
pub fn eta_sbm<T: Scalar>(a: T, b: T, beta: T) -> Result<T> {
    check_sbm(a, b, beta)?;
    if a == b {
        return Err(Error::Domain("eta needs a > b (log(a/b) = 0)".into()));
    }
    let t1 = (a / b).ln();
    let two = T::lit(2.0);
    let gamma = (beta * beta + a * b * t1 * t1).sqrt();
    let lt = log_term(beta, t1, gamma + beta, gamma - beta)?;
    Ok((a + b) / two + beta / two - gamma / t1 + lt)
}

/// Graph-only exponent a(√(1−ξ) − √ξ)².
pub fn cbm_graph_exponent<T: Scalar>(a: T, xi: T) -> T {
    let d = (T::one() - xi).sqrt() - xi.sqrt();
    a * d * d
}

/// Graph-only exponent (√a − √b)² / 2, normalized so that recovery needs > 1.
pub fn sbm_graph_exponent<T: Scalar>(a: T, b: T) -> T {
    let d = a.sqrt() - b.sqrt();
    d * d / T::lit(2.0)
}

/// Side-information strength at which η(a, β) = β: aT₁(1 − 2ξ).
pub fn kink_cbm<T: Scalar>(a: T, xi: T) -> Result<T> {
    Ok(a * t1_cbm(xi)? * (T::one() - T::lit(2.0) * xi))
}

/// Side-information strength at which η(a, b, β) = β: T₁(a − b)/2.
pub fn kink_sbm<T: Scalar>(a: T, b: T) -> T {
    (a / b).ln() * (a - b) / T::lit(2.0)
}

pub fn score_cbm_partial<T: Scalar>(a: T, xi: T, beta: T) -> Result<T> {
    check_cbm(a, xi, beta)?;
    Ok(cbm_graph_exponent(a, xi) + beta)
}

/// Two-branch score: η(a, s) below the kink, `s` at or above it.
fn score_cbm_branch<T: Scalar>(a: T, xi: T, s: T) -> Result<T> {
    if xi == T::lit(0.5) {
        // Uninformative graph: the kink sits at zero.
        return Ok(s);
    }
    if s >= kink_cbm(a, xi)? {
        Ok(s)
    } else {
        eta_cbm(a, xi, s)
    }
}

pub fn score_cbm_noisy<T: Scalar>(a: T, xi: T, beta: T) -> Result<T> {
    check_cbm(a, xi, beta)?;
    score_cbm_branch(a, xi, beta)
}

pub fn score_cbm_general<T: Scalar>(a: T, xi: T, beta1: T, beta: T) -> Result<T> {
    check_cbm(a, xi, beta)?;
    Ok(score_cbm_branch(a, xi, beta1.abs())? + beta)
}

pub fn score_sbm_partial<T: Scalar>(a: T, b: T, beta: T) -> Result<T> {
    check_sbm(a, b, beta)?;
    Ok(sbm_graph_exponent(a, b) + beta)
}

fn score_sbm_branch<T: Scalar>(a: T, b: T, s: T) -> Result<T> {
    if a == b || s >= kink_sbm(a, b) {
        Ok(s)
    } else {
        eta_sbm(a, b, s)
    }
}

pub fn score_sbm_noisy<T: Scalar>(a: T, b: T, beta: T) -> Result<T> {
    check_sbm(a, b, beta)?;
    score_sbm_branch(a, b, beta)
}

pub fn score_sbm_general<T: Scalar>(a: T, b: T, beta1: T, beta: T) -> Result<T> {
    check_sbm(a, b, beta)?;
    Ok(score_sbm_branch(a, b, beta1.abs())? + beta)
}

pub fn recoverable_cbm_partial<T: Scalar>(a: T, xi: T, beta: T) -> Result<Verdict> {
    score_cbm_partial(a, xi, beta).map(Verdict::classify)
}

pub fn recoverable_cbm_noisy<T: Scalar>(a: T, xi: T, beta: T) -> Result<Verdict> {
    score_cbm_noisy(a, xi, beta).map(Verdict::classify)
}

pub fn recoverable_cbm_general<T: Scalar>(a: T, xi: T, beta1: T, beta: T) -> Result<Verdict> {
    score_cbm_general(a, xi, beta1, beta).map(Verdict::classify)
}

pub fn recoverable_sbm_partial<T: Scalar>(a: T, b: T, beta: T) -> Result<Verdict> {
    score_sbm_partial(a, b, beta).map(Verdict::classify)
}

pub fn recoverable_sbm_noisy<T: Scalar>(a: T, b: T, beta: T) -> Result<Verdict> {
    score_sbm_noisy(a, b, beta).map(Verdict::classify)
}

pub fn recoverable_sbm_general<T: Scalar>(a: T, b: T, beta1: T, beta: T) -> Result<Verdict> {
    score_sbm_general(a, b, beta1, beta).map(Verdict::classify)
}

/// Model and side-information selector for [`assess`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum ThresholdCase {
    CbmNone { a: f64, xi: f64 },
    CbmPartial { a: f64, xi: f64, beta: f64 },
    CbmNoisy { a: f64, xi: f64, beta: f64 },
    CbmGeneral { a: f64, xi: f64, beta1: f64, beta: f64 },
    SbmNone { a: f64, b: f64 },
    SbmPartial { a: f64, b: f64, beta: f64 },
    SbmNoisy { a: f64, b: f64, beta: f64 },
    SbmGeneral { a: f64, b: f64, beta1: f64, beta: f64 },
}

pub fn assess(case: ThresholdCase) -> Result<Assessment> {
    use ThresholdCase::*;
    let s = match case {
        CbmNone { a, xi } => score_cbm_partial(a, xi, 0.0)?,
        CbmPartial { a, xi, beta } => score_cbm_partial(a, xi, beta)?,
        CbmNoisy { a, xi, beta } => score_cbm_noisy(a, xi, beta)?,
        CbmGeneral { a, xi, beta1, beta } => score_cbm_general(a, xi, beta1, beta)?,
        SbmNone { a, b } => score_sbm_partial(a, b, 0.0)?,
        SbmPartial { a, b, beta } => score_sbm_partial(a, b, beta)?,
        SbmNoisy { a, b, beta } => score_sbm_noisy(a, b, beta)?,
        SbmGeneral { a, b, beta1, beta } => score_sbm_general(a, b, beta1, beta)?,
    };
    Ok(Assessment::from_score(s))
}

/// Which formula produced a score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Graph exponent plus β (no side information or erased labels).
    Additive,
    /// η below the kink.
    Eta,
    /// Side-information strength at or above the kink.
    Linear,
}

pub fn branch(case: ThresholdCase) -> Result<Branch> {
    use ThresholdCase::*;
    let pick = |s: f64, kink: f64| if s >= kink { Branch::Linear } else { Branch::Eta };
    Ok(match case {
        CbmNone { .. } | CbmPartial { .. } | SbmNone { .. } | SbmPartial { .. } => Branch::Additive,
        CbmNoisy { a, xi, beta } if xi < 0.5 => pick(beta, kink_cbm(a, xi)?),
        CbmGeneral { a, xi, beta1, .. } if xi < 0.5 => pick(beta1.abs(), kink_cbm(a, xi)?),
        CbmNoisy { .. } | CbmGeneral { .. } => Branch::Linear,
        SbmNoisy { a, b, beta } => pick(beta, kink_sbm(a, b)),
        SbmGeneral { a, b, beta1, .. } => pick(beta1.abs(), kink_sbm(a, b)),
    })
}

/// η* for sums of i.i.d. variables with law p₁δ₊₁ + p₂δ₋₁ + (1−p₁−p₂)δ₀,
/// `p_k = ρ_k log n / n`, at normalized threshold ω.
pub fn chernoff_exponent_ternary<T: Scalar>(rho1: T, rho2: T, omega: T) -> Result<T> {
    if !(rho1 > T::zero() && rho2 > T::zero()) {
        return Err(Error::param(format!("rho1, rho2 must be positive, got {rho1}, {rho2}")));
    }
    let g = (omega * omega + T::lit(4.0) * rho1 * rho2).sqrt();
    if g <= omega.abs() {
        return Err(Error::Domain("gamma* <= |omega|".into()));
    }
    let lt = omega / T::lit(2.0) * (rho2 * (g + omega) / (rho1 * (g - omega))).ln();
    Ok(rho1 + rho2 - g + lt)
}

/// η* for S₁ − S₂ with S₁ ~ Binom(n/2 − 1, p), S₂ ~ Binom(n/2, q).
pub fn chernoff_exponent_sbm<T: Scalar>(a: T, b: T, omega: T) -> Result<T> {
    if !(b > T::zero() && a >= b) {
        return Err(Error::param(format!("need a >= b > 0, got a = {a}, b = {b}")));
    }
    let g = (omega * omega + a * b).sqrt();
    if g <= omega.abs() {
        return Err(Error::Domain("gamma* <= |omega|".into()));
    }
    let half = omega / T::lit(2.0);
    Ok((a + b) / T::lit(2.0) - g - half * (a / b).ln() + half * ((g + omega) / (g - omega)).ln())
}

/// `log n / log log n`.
pub fn log_over_loglog(n: usize) -> f64 {
    let l = (n as f64).ln();
    l / l.ln()
}

/// Random variable whose lower tail is estimated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailDistribution {
    /// Sum of `n − 1` ternary variables with `p_k = ρ_k log n / n`.
    Ternary { rho1: f64, rho2: f64 },
    /// S₁ − S₂, S₁ ~ Binom(n/2 − 1, a log n / n), S₂ ~ Binom(n/2, b log n / n).
    BinomDifference { a: f64, b: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub hits: u64,
    pub trials: u64,
    pub probability: f64,
    /// −log(p̂)/log n; with zero hits, the bound implied by the upper
    /// Wilson limit.
    pub exponent: f64,
    pub exponent_lo: f64,
    pub exponent_hi: f64,
    pub lower_bound_only: bool,
}

pub const MIN_TAIL_TRIALS: usize = 10_000;

/// Monte Carlo estimate of `P(S <= threshold(n))` as an exponent of n.
pub fn empirical_tail_exponent(
    dist: TailDistribution,
    n: usize,
    threshold: impl Fn(usize) -> f64,
    trials: usize,
    seed: Seed,
) -> Result<TailEstimate> {
    if trials < MIN_TAIL_TRIALS {
        return Err(Error::param(format!("need at least {MIN_TAIL_TRIALS} trials, got {trials}")));
    }
    if n < 4 {
        return Err(Error::param(format!("n must be >= 4, got {n}")));
    }
    let nf = n as f64;
    let ln = nf.ln();
    let thr = threshold(n);
    let mut rng = seed.rng();
    let binom = |m: u64, p: f64| -> Result<Binomial> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param(format!("probability {p} outside [0, 1]")));
        }
        Binomial::new(m, p).map_err(|e| Error::param(e.to_string()))
    };
    let mut hits = 0u64;
    match dist {
        TailDistribution::Ternary { rho1, rho2 } => {
            let (p1, p2) = (rho1 * ln / nf, rho2 * ln / nf);
            let nonzero = binom((n - 1) as u64, p1 + p2)?;
            let frac = p1 / (p1 + p2);
            for _ in 0..trials {
                let k = nonzero.sample(&mut rng);
                let plus = if k == 0 { 0 } else { binom(k, frac)?.sample(&mut rng) };
                let s = 2 * plus as i64 - k as i64;
                if (s as f64) <= thr {
                    hits += 1;
                }
            }
        }
        TailDistribution::BinomDifference { a, b } => {
            let s1 = binom((n / 2 - 1) as u64, a * ln / nf)?;
            let s2 = binom((n / 2) as u64, b * ln / nf)?;
            for _ in 0..trials {
                let d = s1.sample(&mut rng) as i64 - s2.sample(&mut rng) as i64;
                if (d as f64) <= thr {
                    hits += 1;
                }
            }
        }
    }
    let t = trials as u64;
    let (lo, hi) = wilson(hits, t, Z95);
    let p = hits as f64 / trials as f64;
    let to_exp = |q: f64| -q.ln() / ln;
    Ok(TailEstimate {
        hits,
        trials: t,
        probability: p,
        exponent: if hits == 0 { to_exp(hi) } else { to_exp(p) },
        exponent_lo: to_exp(hi),
        exponent_hi: if lo > 0.0 { to_exp(lo) } else { f64::INFINITY },
        lower_bound_only: hits == 0,
    })
}
