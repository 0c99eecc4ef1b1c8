//! Cyclic Jacobi eigensolver with a threshold strategy.

use super::{Eigen, SymMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_SWEEPS: usize = 100;

/// Relative off-diagonal Frobenius mass at which the sweep loop stops.
fn off_tol<T: Scalar>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(16.0))
}

pub fn jacobi_eig<T: Scalar>(a: &SymMatrix<T>) -> Result<Eigen<T>> {
    let n = a.n();
    if n == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    let mut m = a.as_slice().to_vec();
    // Rows of `vt` are the eigenvectors.
    let mut vt = SymMatrix::<T>::identity(n).into_vec();
    let anorm = a.frob_norm();
    let tol = off_tol::<T>() * anorm;
    let nn = T::from_usize_lossy(n * n);
    let two = T::lit(2.0);

    let mut converged = anorm == T::zero();
    let mut sweep = 0;
    while !converged && sweep < MAX_SWEEPS {
        let mut off2 = T::zero();
        let mut off1 = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                let v = m[p * n + q];
                off2 += v * v;
                off1 += v.abs();
            }
        }
        if (two * off2).sqrt() <= tol {
            converged = true;
            break;
        }
        // Early sweeps skip small entries; later sweeps rotate everything.
        let thresh = if sweep < 3 { T::lit(0.2) * off1 / nn } else { T::zero() };
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                let g = T::lit(100.0) * apq.abs();
                let (app, aqq) = (m[p * n + p], m[q * n + q]);
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    m[p * n + q] = T::zero();
                    m[q * n + p] = T::zero();
                    continue;
                }
                if apq.abs() <= thresh || apq == T::zero() {
                    continue;
                }
                let theta = (aqq - app) / (two * apq);
                let t = {
                    let t = T::one() / (theta.abs() + theta.hypot(T::one()));
                    if theta < T::zero() {
                        -t
                    } else {
                        t
                    }
                };
                let c = T::one() / t.hypot(T::one());
                let s = t * c;
                rotate(&mut m, n, p, q, c, s, t * apq);
                rotate_rows(&mut vt, n, p, q, c, s);
            }
        }
        sweep += 1;
    }
    if !converged {
        // The loop exits on the cap without a final convergence check.
        let mut off2 = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off2 += m[p * n + q] * m[p * n + q];
            }
        }
        if (two * off2).sqrt() > tol {
            return Err(Error::EigenNoConvergence { sweeps: MAX_SWEEPS });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].partial_cmp(&m[j * n + j]).unwrap());
    Ok(Eigen {
        values: order.iter().map(|&i| m[i * n + i]).collect(),
        vectors: order.iter().map(|&i| vt[i * n..(i + 1) * n].to_vec()).collect(),
    })
}

/// Applies Jᵀ M J for the rotation in the (p, q) plane. `shift = t * m_pq`.
fn rotate<T: Scalar>(m: &mut [T], n: usize, p: usize, q: usize, c: T, s: T, shift: T) {
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let (akp, akq) = (m[p * n + k], m[q * n + k]);
        let np = c * akp - s * akq;
        let nq = s * akp + c * akq;
        m[p * n + k] = np;
        m[k * n + p] = np;
        m[q * n + k] = nq;
        m[k * n + q] = nq;
    }
    m[p * n + p] -= shift;
    m[q * n + q] += shift;
    m[p * n + q] = T::zero();
    m[q * n + p] = T::zero();
}

fn rotate_rows<T: Scalar>(v: &mut [T], n: usize, p: usize, q: usize, c: T, s: T) {
    for k in 0..n {
        let (a, b) = (v[p * n + k], v[q * n + k]);
        v[p * n + k] = c * a - s * b;
        v[q * n + k] = s * a + c * b;
    }
}
