//! Householder tridiagonalization, implicit QL eigenvalues, and inverse
//! iteration for selected eigenvectors.
//!
//! This path is several times cheaper than Jacobi when only part of the
//! spectrum needs eigenvectors, which is the common case in the ADMM cone
//! projection and in rounding.

use super::{Eigen, SymMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const QL_MAX_ITER: usize = 60;

/// A = Q T Qᵀ with T tridiagonal and Q a product of Householder reflectors.
pub struct Tridiagonal<T> {
    pub diag: Vec<T>,
    /// `off[i]` couples rows `i` and `i + 1`; the last entry is zero.
    pub off: Vec<T>,
    /// Reflector `k` acts on coordinates `k + 1..n`.
    reflectors: Vec<(Vec<T>, T)>,
}

impl<T: Scalar> Tridiagonal<T> {
    pub fn new(a: &SymMatrix<T>) -> Self {
        let n = a.n();
        let mut m = a.as_slice().to_vec();
        let mut diag = vec![T::zero(); n];
        let mut off = vec![T::zero(); n];
        let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
        let two = T::lit(2.0);
        let half = T::lit(0.5);
        let mut p = vec![T::zero(); n];
        // Columns below this norm are treated as already reduced; keeps
        // 2/uᵀu finite when entries decay into the subnormal range.
        let amax = m.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        let negligible = amax * T::epsilon() * T::epsilon();
        for k in 0..n.saturating_sub(2) {
            let s = k + 1;
            let len = n - s;
            let mut u: Vec<T> = (s..n).map(|i| m[i * n + k]).collect();
            let xnorm = u.iter().map(|&v| v * v).sum::<T>().sqrt();
            diag[k] = m[k * n + k];
            if xnorm <= negligible || xnorm < T::min_positive_value().sqrt() {
                off[k] = T::zero();
                reflectors.push((u, T::zero()));
                continue;
            }
            let alpha = if u[0] >= T::zero() { -xnorm } else { xnorm };
            u[0] -= alpha;
            let uu: T = u.iter().map(|&v| v * v).sum();
            let tau = two / uu;
            off[k] = alpha;
            // Trailing block B ← H B H via B − u wᵀ − w uᵀ, on the lower
            // triangle only.
            let p = &mut p[..len];
            p.iter_mut().for_each(|v| *v = T::zero());
            for ii in 0..len {
                let row = &m[(s + ii) * n + s..(s + ii) * n + s + ii];
                let ui = u[ii];
                let mut acc = T::zero();
                for ((&a, &uj), pj) in row.iter().zip(&u[..ii]).zip(p[..ii].iter_mut()) {
                    acc += a * uj;
                    *pj += a * ui;
                }
                p[ii] += acc + m[(s + ii) * n + s + ii] * ui;
            }
            p.iter_mut().for_each(|v| *v *= tau);
            let kk = tau * half * u.iter().zip(p.iter()).map(|(&a, &b)| a * b).sum::<T>();
            for (pi, &ui) in p.iter_mut().zip(&u) {
                *pi -= kk * ui;
            }
            for ii in 0..len {
                let (ui, wi) = (u[ii], p[ii]);
                let row = &mut m[(s + ii) * n + s..(s + ii) * n + s + ii + 1];
                for ((a, &pj), &uj) in row.iter_mut().zip(&p[..=ii]).zip(&u[..=ii]) {
                    *a -= ui * pj + wi * uj;
                }
            }
            reflectors.push((u, tau));
        }
        if n >= 2 {
            diag[n - 2] = m[(n - 2) * n + n - 2];
            off[n - 2] = m[(n - 1) * n + n - 2];
        }
        if n >= 1 {
            diag[n - 1] = m[(n - 1) * n + n - 1];
        }
        Self {
            diag,
            off,
            reflectors,
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// Maps an eigenvector of T to one of A.
    pub fn back_transform(&self, z: &mut [T]) {
        for (k, (u, tau)) in self.reflectors.iter().enumerate().rev() {
            if *tau == T::zero() {
                continue;
            }
            let tail = &mut z[k + 1..];
            let d = *tau * tail.iter().zip(u).map(|(&a, &b)| a * b).sum::<T>();
            for (t, &ui) in tail.iter_mut().zip(u) {
                *t -= d * ui;
            }
        }
    }

    /// Eigenvalues of T in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<T>> {
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        ql_implicit(&mut d, &mut e, None)?;
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(d)
    }

    /// Full decomposition with accumulated QL rotations.
    pub fn eigen_full(&self) -> Result<Eigen<T>> {
        let n = self.n();
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        let mut z = SymMatrix::<T>::identity(n).into_vec();
        ql_implicit(&mut d, &mut e, Some(&mut z))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
        let mut vectors = Vec::with_capacity(n);
        for &i in &order {
            let mut v = z[i * n..(i + 1) * n].to_vec();
            self.back_transform(&mut v);
            vectors.push(v);
        }
        Ok(Eigen {
            values: order.iter().map(|&i| d[i]).collect(),
            vectors,
        })
    }

    /// Eigenvectors of A for the given eigenvalues of T (sorted ascending),
    /// by inverse iteration with reorthogonalization inside clusters.
    pub fn eigenvectors_for(&self, values: &[T]) -> Result<Vec<Vec<T>>> {
        let n = self.n();
        let tnorm = self
            .diag
            .iter()
            .zip(&self.off)
            .fold(T::zero(), |m, (&d, &e)| m.max(d.abs() + T::lit(2.0) * e.abs()))
            .max(T::min_positive_value());
        let eps = T::epsilon();
        let cluster_tol = T::lit(1e-3) * tnorm;
        let mut out: Vec<Vec<T>> = Vec::with_capacity(values.len());
        let mut cluster_start = 0;
        let mut prev_shift = T::neg_infinity();
        for (j, &lam) in values.iter().enumerate() {
            if j > 0 && lam - values[j - 1] > cluster_tol {
                cluster_start = j;
            }
            // Separate coincident shifts so each solve targets a new direction.
            let pertol = T::lit(10.0) * eps * tnorm.max(lam.abs());
            let shift = if j > cluster_start && lam - prev_shift < pertol {
                prev_shift + pertol
            } else {
                lam
            };
            prev_shift = shift;
            let lu = TridiagLu::factor(&self.diag, &self.off, shift, eps * tnorm);
            let mut x = start_vector::<T>(n, j);
            let mut ok = false;
            for iter in 0..5 {
                lu.solve(&mut x);
                for prev in &out[cluster_start..j] {
                    let d: T = prev.iter().zip(&x).map(|(&a, &b)| a * b).sum();
                    for (xi, &pi) in x.iter_mut().zip(prev) {
                        *xi -= d * pi;
                    }
                }
                let norm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
                if !(norm > T::zero()) || !norm.is_finite() {
                    x = start_vector::<T>(n, j + 7919 * (iter + 1));
                    continue;
                }
                for v in x.iter_mut() {
                    *v /= norm;
                }
                if iter >= 1 && self.residual(&x, lam) <= T::lit(64.0) * eps * tnorm * T::from_usize_lossy(n).sqrt() {
                    ok = true;
                    break;
                }
            }
            if !ok && self.residual(&x, lam) > T::lit(1e3) * eps.sqrt() * tnorm {
                return Err(Error::EigenNoConvergence { sweeps: 5 });
            }
            out.push(x);
        }
        // Back-transform after all cluster orthogonalization in T-space.
        for v in out.iter_mut() {
            self.back_transform(v);
        }
        Ok(out)
    }

    fn residual(&self, x: &[T], lam: T) -> T {
        let n = self.n();
        let mut r2 = T::zero();
        for i in 0..n {
            let mut r = (self.diag[i] - lam) * x[i];
            if i > 0 {
                r += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                r += self.off[i] * x[i + 1];
            }
            r2 += r * r;
        }
        r2.sqrt()
    }
}

fn start_vector<T: Scalar>(n: usize, salt: usize) -> Vec<T> {
    // Deterministic, well spread, with no exact cancellations against
    // structured eigenvectors.
    let mut s = (salt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03;
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            T::lit(0.5 + (s >> 11) as f64 / (1u64 << 53) as f64)
        })
        .collect()
}

/// LU factorization of T − σI with partial pivoting; at most two
/// superdiagonals of fill.
struct TridiagLu<T> {
    u0: Vec<T>,
    u1: Vec<T>,
    u2: Vec<T>,
    mult: Vec<T>,
    swap: Vec<bool>,
}

impl<T: Scalar> TridiagLu<T> {
    fn factor(d: &[T], e: &[T], sigma: T, tiny: T) -> Self {
        let n = d.len();
        let tiny = tiny.max(T::min_positive_value());
        let mut lu = Self {
            u0: vec![T::zero(); n],
            u1: vec![T::zero(); n],
            u2: vec![T::zero(); n],
            mult: vec![T::zero(); n],
            swap: vec![false; n],
        };
        let (mut p0, mut p1, mut p2) = (d[0] - sigma, if n > 1 { e[0] } else { T::zero() }, T::zero());
        for i in 0..n.saturating_sub(1) {
            let sub = e[i];
            let b = d[i + 1] - sigma;
            let c = if i + 2 < n { e[i + 1] } else { T::zero() };
            if p0.abs() >= sub.abs() {
                if p0 == T::zero() {
                    p0 = tiny;
                }
                let m = sub / p0;
                lu.u0[i] = p0;
                lu.u1[i] = p1;
                lu.u2[i] = p2;
                lu.mult[i] = m;
                (p0, p1, p2) = (b - m * p1, c - m * p2, T::zero());
            } else {
                let m = p0 / sub;
                lu.u0[i] = sub;
                lu.u1[i] = b;
                lu.u2[i] = c;
                lu.mult[i] = m;
                lu.swap[i] = true;
                (p0, p1, p2) = (p1 - m * b, p2 - m * c, T::zero());
            }
        }
        if p0.abs() < tiny {
            p0 = if p0 < T::zero() { -tiny } else { tiny };
        }
        lu.u0[n - 1] = p0;
        let _ = (p1, p2);
        lu
    }

    fn solve(&self, x: &mut [T]) {
        let n = x.len();
        for i in 0..n.saturating_sub(1) {
            if self.swap[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] = x[i + 1] - self.mult[i] * x[i];
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            if i + 1 < n {
                v -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                v -= self.u2[i] * x[i + 2];
            }
            x[i] = v / self.u0[i];
        }
        // Rescale to avoid overflow across iterations.
        let m = x.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        if m > T::zero() && m.is_finite() {
            for v in x.iter_mut() {
                *v /= m;
            }
        }
    }
}

/// √(a² + b²) without the scaling of `hypot` unless the square overflows.
#[inline]
fn fast_hypot<T: Scalar>(a: T, b: T) -> T {
    let r = (a * a + b * b).sqrt();
    if r.is_finite() && r > T::min_positive_value() {
        r
    } else {
        a.hypot(b)
    }
}

/// Implicit-shift QL on (d, e). When `z` is given, its rows are rotated
/// along (rows of z are eigenvectors of T on exit).
fn ql_implicit<T: Scalar>(d: &mut [T], e: &mut [T], mut z: Option<&mut [T]>) -> Result<()> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    let eps = T::epsilon();
    let two = T::lit(2.0);
    e[n - 1] = T::zero();
    // Absolute floor: couplings below ε‖T‖ are dropped even inside a
    // cluster of near-zero eigenvalues, where the relative test stalls.
    let tnorm = d.iter().zip(e.iter()).fold(T::zero(), |acc, (&a, &b)| acc.max(a.abs() + two * b.abs()));
    let floor = eps * tnorm;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd || e[m].abs() <= floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITER {
                return Err(Error::EigenNoConvergence { sweeps: QL_MAX_ITER });
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = fast_hypot(g, T::one());
            g = d[m] - d[l] + e[l] / (g + if g >= T::zero() { r } else { -r });
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut early = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = fast_hypot(f, g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    let (lo, hi) = z.split_at_mut((i + 1) * n);
                    let zi = &mut lo[i * n..];
                    let zi1 = &mut hi[..n];
                    for k in 0..n {
                        let f = zi1[k];
                        zi1[k] = s * zi[k] + c * f;
                        zi[k] = c * zi[k] - s * f;
                    }
                }
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}
