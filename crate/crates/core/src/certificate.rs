//! Dual certificates for the six relaxations.
//!
//! Each builder assembles S* from the graph, the candidate labels and the
//! free multipliers so that S*·v₀ = 0 holds algebraically, where v₀ is x* or
//! [1, x*] for the lifted programs. The truth is then certified as the unique
//! optimum when S* ⪰ 0 and its second-smallest eigenvalue is positive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{Instance, InstanceSpec, ModelParams};
use crate::linalg::{sym_eigvals, SymMatrix};
use crate::model::{t2_noisy, tilde_y, LabelVector, SideInfo, SideParams, WeightedGraph};
use crate::scalar::Scalar;
use crate::sdp::{graph_coefficient, Variant};

/// Default μ* for the partial-label certificates.
pub const DEFAULT_MU: f64 = -1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate<T> {
    pub variant: Variant,
    /// Diagonal of D*.
    pub d_star: Vec<T>,
    pub s_star: SymMatrix<T>,
    pub lambda_star: Option<T>,
    pub mu_star: Option<T>,
}

impl<T: Scalar> Certificate<T> {
    /// Unit null vector the construction targets: x*/√n, or [1, x*]/√(n+1).
    pub fn null_vector(&self, x: &LabelVector) -> Vec<T> {
        let mut v: Vec<T> = Vec::with_capacity(x.len() + 1);
        if self.variant.is_lifted() {
            v.push(T::one());
        }
        v.extend(x.to_real::<T>());
        let norm = T::from_usize_lossy(v.len()).sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        v
    }
}

fn check_dims(g: &WeightedGraph, x: &LabelVector) -> Result<()> {
    if g.n() != x.len() {
        return Err(Error::Dimension {
            expected: g.n(),
            found: x.len(),
        });
    }
    Ok(())
}

fn check_mu<T: Scalar>(mu: T) -> Result<()> {
    if !(mu < T::zero()) {
        return Err(Error::param(format!("mu* must be negative, got {mu}")));
    }
    Ok(())
}

fn check_balanced(x: &LabelVector) -> Result<()> {
    if !x.is_balanced() {
        return Err(Error::param("balanced certificate needs a balanced x*"));
    }
    Ok(())
}

/// (Gx)_i x_i for every i.
fn graph_degrees<T: Scalar>(g: &WeightedGraph, x: &LabelVector) -> Vec<T> {
    let xs = x.as_slice();
    (0..g.n())
        .map(|i| {
            let s: i64 = g.row(i).iter().zip(xs).map(|(&w, &xj)| (w * xj) as i64).sum();
            T::from_i64(s * xs[i] as i64).unwrap()
        })
        .collect()
}

fn erasure_values(side: &SideInfo, n: usize) -> Result<&[i8]> {
    side.validate(n)?;
    match side {
        SideInfo::Erasure { values } => Ok(values),
        _ => Err(Error::param("partial-label certificate needs erasure side information")),
    }
}

fn partial<T: Scalar>(
    variant: Variant,
    g: &WeightedGraph,
    x: &LabelVector,
    side: &SideInfo,
    lambda: Option<T>,
    mu: T,
) -> Result<Certificate<T>> {
    check_dims(g, x)?;
    check_mu(mu)?;
    let n = g.n();
    let y = erasure_values(side, n)?;
    let xs = x.as_slice();
    let yx: i64 = y.iter().zip(xs).map(|(&a, &b)| (a * b) as i64).sum();
    let deg = graph_degrees::<T>(g, x);
    // d_i = (Gx)_i x_i − μ y_i (yᵀx) x_i
    let d_star: Vec<T> = (0..n)
        .map(|i| deg[i] - mu * T::from_i64(y[i] as i64 * yx * xs[i] as i64).unwrap())
        .collect();
    let lam = lambda.unwrap_or(T::zero());
    let s_star = SymMatrix::from_fn(n, |i, j| {
        let w = mu * T::from_i8(y[i] * y[j]).unwrap() - T::from_i8(g.get(i, j)).unwrap() + lam;
        if i == j {
            w + d_star[i]
        } else {
            w
        }
    });
    Ok(Certificate {
        variant,
        d_star,
        s_star,
        lambda_star: lambda,
        mu_star: Some(mu),
    })
}

/// `lin` is T₂Y or Ỹ.
fn lifted<T: Scalar>(
    variant: Variant,
    g: &WeightedGraph,
    x: &LabelVector,
    t1: T,
    lin: &[T],
    lambda: Option<T>,
) -> Result<Certificate<T>> {
    check_dims(g, x)?;
    let n = g.n();
    if lin.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: lin.len(),
        });
    }
    let xr = x.to_real::<T>();
    let deg = graph_degrees::<T>(g, x);
    let d_star: Vec<T> = (0..n).map(|i| t1 * deg[i] + lin[i] * xr[i]).collect();
    let lam = lambda.unwrap_or(T::zero());
    let mut s = SymMatrix::zeros(n + 1);
    // S_A = linᵀx*
    s[(0, 0)] = lin.iter().zip(&xr).map(|(&a, &b)| a * b).sum();
    for i in 0..n {
        // S_B = −lin
        s.set(0, i + 1, -lin[i]);
        for j in 0..n {
            let mut v = lam - t1 * T::from_i8(g.get(i, j)).unwrap();
            if i == j {
                v += d_star[i];
            }
            s[(i + 1, j + 1)] = v;
        }
    }
    Ok(Certificate {
        variant,
        d_star,
        s_star: s,
        lambda_star: lambda,
        mu_star: None,
    })
}

fn noisy_lin<T: Scalar>(side: &SideInfo, n: usize, t2: T) -> Result<Vec<T>> {
    side.validate(n)?;
    match side {
        SideInfo::Noisy { values } => Ok(values.iter().map(|&v| t2 * T::from_i8(v).unwrap()).collect()),
        _ => Err(Error::param("noisy-label certificate needs noisy side information")),
    }
}

fn general_lin<T: Scalar>(side: &SideInfo, n: usize) -> Result<Vec<T>> {
    side.validate(n)?;
    tilde_y(side)
}

fn check_t<T: Scalar>(name: &str, t: T) -> Result<()> {
    if !(t >= T::zero() && t.is_finite()) {
        return Err(Error::param(format!("{name} must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// S* = D* + μ*W − G.
pub fn build_cert_cbm_partial<T: Scalar>(
    g: &WeightedGraph,
    x: &LabelVector,
    side: &SideInfo,
    mu: T,
) -> Result<Certificate<T>> {
    partial(Variant::CbmPartial, g, x, side, None, mu)
}

/// Blocks S_A = T₂Yᵀx*, S_B = −T₂Y, S_C = D* − T₁G.
pub fn build_cert_cbm_noisy<T: Scalar>(
    g: &WeightedGraph,
    x: &LabelVector,
    side: &SideInfo,
    t1: T,
    t2: T,
) -> Result<Certificate<T>> {
    check_t("T1", t1)?;
    check_t("T2", t2)?;
    lifted(Variant::CbmNoisy, g, x, t1, &noisy_lin(side, g.n(), t2)?, None)
}

/// As the noisy certificate with Ỹ in place of T₂Y.
pub fn build_cert_cbm_general<T: Scalar>(
    g: &WeightedGraph,
    x: &LabelVector,
    side: &SideInfo,
    t1: T,
) -> Result<Certificate<T>> {
    check_t("T1", t1)?;
    lifted(Variant::CbmGeneral, g, x, t1, &general_lin(side, g.n())?, None)
}

/// S* = D* + λ*J + μ*W − G. Requires λ* ≥ (p + q)/2 and a balanced x*.
pub fn build_cert_sbm_partial<T: Scalar>(
    g: &WeightedGraph,
    x: &LabelVector,
    side: &SideInfo,
    p: T,
    q: T,
    lambda: T,
    mu: T,
) -> Result<Certificate<T>> {
    check_balanced(x)?;
    let floor = (p + q) / T::lit(2.0);
    if !(lambda >= floor) {
        return Err(Error::param(format!("lambda* must be >= (p+q)/2 = {floor}, got {lambda}")));
    }
    partial(Variant::SbmPartial, g, x, side, Some(lambda), mu)
}

/// S_C = D* + λ*J − T₁G with the noisy-label S_A, S_B blocks.
pub fn build_cert_sbm_noisy<T: Scalar>(
    g: &WeightedGraph,
    x: &LabelVector,
    side: &SideInfo,
    t1: T,
    t2: T,
    lambda: T,
) -> Result<Certificate<T>> {
    check_balanced(x)?;
    check_t("T1", t1)?;
    check_t("T2", t2)?;
    check_t("lambda*", lambda)?;
    lifted(Variant::SbmNoisy, g, x, t1, &noisy_lin(side, g.n(), t2)?, Some(lambda))
}

pub fn build_cert_sbm_general<T: Scalar>(
    g: &WeightedGraph,
    x: &LabelVector,
    side: &SideInfo,
    t1: T,
    lambda: T,
) -> Result<Certificate<T>> {
    check_balanced(x)?;
    check_t("T1", t1)?;
    check_t("lambda*", lambda)?;
    lifted(Variant::SbmGeneral, g, x, t1, &general_lin(side, g.n())?, Some(lambda))
}

/// Free multipliers; `None` picks the defaults: μ* = −1, and λ* = (p+q)/2
/// for the partial SBM certificate or T₁(p+q)/2 for the lifted ones (their
/// graph block carries the factor T₁).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub lambda_star: Option<f64>,
    pub mu_star: Option<f64>,
}

/// Certificate for an instance's own truth, matching the relaxation that
/// [`crate::sdp::build_for_instance`] would build. Without side information
/// the partial builders run with every label erased.
pub fn build_for_instance<T: Scalar>(
    spec: &InstanceSpec,
    inst: &Instance,
    mult: Multipliers,
) -> Result<Certificate<T>> {
    build_for_labels(spec, inst, &inst.truth, mult)
}

/// As [`build_for_instance`] with an arbitrary candidate in place of the truth.
pub fn build_for_labels<T: Scalar>(
    spec: &InstanceSpec,
    inst: &Instance,
    x: &LabelVector,
    mult: Multipliers,
) -> Result<Certificate<T>> {
    let g = &inst.graph;
    let n = g.n();
    let mu = T::lit(mult.mu_star.unwrap_or(DEFAULT_MU));
    let erased = SideInfo::Erasure { values: vec![0; n] };
    let side = inst.side.as_ref().unwrap_or(&erased);
    let pq = match spec.model {
        ModelParams::Sbm(p) => Some(p.edge_probs(n)?),
        ModelParams::Cbm(_) => None,
    };
    match (side, pq) {
        (SideInfo::Erasure { .. }, None) => build_cert_cbm_partial(g, x, side, mu),
        (SideInfo::Erasure { .. }, Some((p, q))) => {
            let lambda = mult.lambda_star.unwrap_or((p + q) / 2.0);
            build_cert_sbm_partial(g, x, side, T::lit(p), T::lit(q), T::lit(lambda), mu)
        }
        (SideInfo::Noisy { .. }, _) => {
            let Some(SideParams::Noisy { alpha }) = spec.side_params()? else {
                return Err(Error::param("noisy side information needs noisy side parameters"));
            };
            let t1 = graph_coefficient::<T>(&spec.model, n)?;
            let t2 = t2_noisy(T::lit(alpha))?;
            match pq {
                None => build_cert_cbm_noisy(g, x, side, t1, t2),
                Some((p, q)) => {
                    let lambda = mult.lambda_star.map(T::lit).unwrap_or(t1 * T::lit((p + q) / 2.0));
                    build_cert_sbm_noisy(g, x, side, t1, t2, lambda)
                }
            }
        }
        (SideInfo::General { .. }, _) => {
            let t1 = graph_coefficient::<T>(&spec.model, n)?;
            match pq {
                None => build_cert_cbm_general(g, x, side, t1),
                Some((p, q)) => {
                    let lambda = mult.lambda_star.map(T::lit).unwrap_or(t1 * T::lit((p + q) / 2.0));
                    build_cert_sbm_general(g, x, side, t1, lambda)
                }
            }
        }
    }
}

/// Outcome of the three optimality checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub variant: Variant,
    /// ‖S*·v₀‖ with v₀ the unit null vector.
    pub null_residual: f64,
    pub null_ok: bool,
    pub lambda_min: f64,
    pub psd_ok: bool,
    /// Smallest eigenvalue of S* on the orthogonal complement of v₀.
    pub lambda2: f64,
    pub tol: f64,
    pub valid: bool,
}

/// Relative floor for every check: tol = 1e−8·(1 + ‖S*‖_F).
pub const VERIFY_TOL: f64 = 1e-8;

pub fn verify<T: Scalar>(cert: &Certificate<T>, x: &LabelVector) -> Result<CertificateReport> {
    let dim = cert.s_star.n();
    let expected = x.len() + usize::from(cert.variant.is_lifted());
    if dim != expected {
        return Err(Error::Dimension { expected, found: dim });
    }
    let v0 = cert.null_vector(x);
    verify_with(cert.variant, &cert.s_star, &v0)
}

/// The checks against an explicit unit null-vector candidate.
pub fn verify_with<T: Scalar>(variant: Variant, s: &SymMatrix<T>, v0: &[T]) -> Result<CertificateReport> {
    let tol = VERIFY_TOL * (1.0 + s.frob_norm().to_f64_lossy());
    let sv = s.matvec(v0);
    let null_residual = sv.iter().map(|&a| a * a).sum::<T>().sqrt().to_f64_lossy();
    let lambda_min = sym_eigvals(s)?[0].to_f64_lossy();
    let lambda2 = if s.n() > 1 {
        sym_eigvals(&s.deflate(v0)?)?[0].to_f64_lossy()
    } else {
        f64::INFINITY
    };
    let null_ok = null_residual <= tol;
    let psd_ok = lambda_min >= -tol;
    Ok(CertificateReport {
        variant,
        null_residual,
        null_ok,
        lambda_min,
        psd_ok,
        lambda2,
        tol,
        valid: null_ok && psd_ok && lambda2 > tol,
    })
}
