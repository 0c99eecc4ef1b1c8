use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense real symmetric matrix, stored full and row-major.
///
/// Every constructor leaves `data` exactly symmetric; mutation through
/// `IndexMut` is the caller's responsibility (prefer [`SymMatrix::set`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix<T> {
    n: usize,
    data: Vec<T>,
}

/// Largest accepted asymmetry, relative to `1 + max|a_ij|`.
pub const SYMMETRY_TOL: f64 = 1e-12;

impl<T: Scalar> SymMatrix<T> {
    /// Checks symmetry, then replaces `data` by `(A + Aᵀ) / 2`.
    pub fn new(n: usize, mut data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        let scale = T::one() + data.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tol = T::lit(SYMMETRY_TOL).max(T::epsilon() * T::lit(8.0)) * scale;
        let half = T::lit(0.5);
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if (a - b).abs() > tol {
                    return Err(Error::Domain(format!(
                        "asymmetry {} at ({i}, {j}) exceeds tolerance",
                        (a - b).abs()
                    )));
                }
                let m = (a + b) * half;
                data[i * n + j] = m;
                data[j * n + i] = m;
            }
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![T::one(); n])
    }

    /// The all-ones matrix J.
    pub fn ones(n: usize) -> Self {
        Self {
            n,
            data: vec![T::one(); n * n],
        }
    }

    pub fn from_diag(d: &[T]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for (i, &v) in d.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    /// Builds from the upper triangle of `f` (`f(i, j)` is read for `i <= j`).
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    /// x xᵀ.
    pub fn outer(x: &[T]) -> Self {
        Self::from_fn(x.len(), |i, j| x[i] * x[j])
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product ⟨A, B⟩.
    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum()
    }

    pub fn frob_norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// xᵀ A x.
    pub fn quad_form(&self, x: &[T]) -> T {
        self.matvec(x).iter().zip(x).map(|(&a, &b)| a * b).sum()
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: T, other: &Self) {
        debug_assert_eq!(self.n, other.n);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// `self += s * v vᵀ`.
    pub fn rank1_update(&mut self, s: T, v: &[T]) {
        let n = self.n;
        for i in 0..n {
            let si = s * v[i];
            let row = &mut self.data[i * n..(i + 1) * n];
            for (a, &vj) in row.iter_mut().zip(v) {
                *a += si * vj;
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(T::one(), other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-T::one(), other);
        out
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn principal(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    pub fn cast<U: Scalar>(&self) -> SymMatrix<U> {
        SymMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .map(|v| U::lit(v.to_f64_lossy()))
                .collect(),
        }
    }

    /// Orthogonal similarity by the Householder reflector sending `v` to a
    /// multiple of `e₀`, with the first row and column removed.
    ///
    /// When `v` is an exact null vector of `self`, the removed row and column
    /// are zero and the result carries the spectrum on `v`'s complement.
    pub fn deflate(&self, v: &[T]) -> Result<Self> {
        let n = self.n;
        if v.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: v.len(),
            });
        }
        if n < 2 {
            return Err(Error::Domain("cannot deflate a 1x1 matrix".into()));
        }
        let norm = v.iter().map(|&a| a * a).sum::<T>().sqrt();
        if !(norm > T::zero()) {
            return Err(Error::Domain("deflation vector is zero".into()));
        }
        // u = v/‖v‖ + sign(v₀) e₀; H = I − 2uuᵀ/uᵀu maps v to ∓‖v‖e₀.
        let mut u: Vec<T> = v.iter().map(|&a| a / norm).collect();
        let s = if u[0] >= T::zero() { T::one() } else { -T::one() };
        u[0] += s;
        let uu: T = u.iter().map(|&a| a * a).sum();
        let tau = T::lit(2.0) / uu;
        let p: Vec<T> = self.matvec(&u).into_iter().map(|a| a * tau).collect();
        let k = tau * T::lit(0.5) * u.iter().zip(&p).map(|(&a, &b)| a * b).sum::<T>();
        let w: Vec<T> = p.iter().zip(&u).map(|(&pi, &ui)| pi - k * ui).collect();
        let m = n - 1;
        let mut data = vec![T::zero(); m * m];
        for i in 1..n {
            for j in 1..n {
                data[(i - 1) * m + (j - 1)] = self.get(i, j) - u[i] * w[j] - w[i] * u[j];
            }
        }
        Ok(Self { n: m, data })
    }
}

impl<T> Index<(usize, usize)> for SymMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for SymMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}
