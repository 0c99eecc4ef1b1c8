//! Dense symmetric linear algebra.
//!
//! [`sym_eig`] is the reference cyclic Jacobi solver. The Householder / QL
//! path in [`tridiag`] serves the hot loops (cone projection, rounding,
//! spectral norms) and is cross-checked against Jacobi in tests.

mod jacobi;
mod sym;
pub mod tridiag;

pub use jacobi::MAX_SWEEPS;
pub use sym::{SymMatrix, SYMMETRY_TOL};
pub use tridiag::Tridiagonal;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Eigenpairs with ascending `values`; `vectors[k]` belongs to `values[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}

impl<T: Scalar> Eigen<T> {
    /// V f(Λ) Vᵀ.
    pub fn reconstruct_with(&self, f: impl Fn(T) -> T) -> SymMatrix<T> {
        let n = self.values.len();
        let mut out = SymMatrix::zeros(n);
        for (&lam, v) in self.values.iter().zip(&self.vectors) {
            let w = f(lam);
            if w != T::zero() {
                out.rank1_update(w, v);
            }
        }
        out
    }

    pub fn reconstruct(&self) -> SymMatrix<T> {
        self.reconstruct_with(|x| x)
    }

    /// ‖VᵀV − I‖_F.
    pub fn orthonormality_error(&self) -> T {
        let k = self.vectors.len();
        let mut acc = T::zero();
        for i in 0..k {
            for j in 0..k {
                let d: T = self.vectors[i].iter().zip(&self.vectors[j]).map(|(&a, &b)| a * b).sum();
                let e = if i == j { d - T::one() } else { d };
                acc += e * e;
            }
        }
        acc.sqrt()
    }
}

/// Full eigendecomposition by cyclic Jacobi.
pub fn sym_eig<T: Scalar>(a: &SymMatrix<T>) -> Result<Eigen<T>> {
    jacobi::jacobi_eig(a)
}

/// Full eigendecomposition by tridiagonalization and implicit QL.
pub fn sym_eig_ql<T: Scalar>(a: &SymMatrix<T>) -> Result<Eigen<T>> {
    if a.n() == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    Tridiagonal::new(a).eigen_full()
}

/// Eigenvalues only, ascending.
pub fn sym_eigvals<T: Scalar>(a: &SymMatrix<T>) -> Result<Vec<T>> {
    if a.n() == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    Tridiagonal::new(a).eigenvalues()
}

/// Frobenius-nearest PSD matrix, V max(Λ, 0) Vᵀ.
pub fn psd_project<T: Scalar>(a: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    psd_project_counted(a).map(|(m, _)| m)
}

/// As [`psd_project`], also returning the number of positive eigenvalues.
///
/// Eigenvectors are computed only for the smaller of the positive and
/// non-positive parts of the spectrum.
pub fn psd_project_counted<T: Scalar>(a: &SymMatrix<T>) -> Result<(SymMatrix<T>, usize)> {
    let n = a.n();
    if n == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    let tri = Tridiagonal::new(a);
    let values = tri.eigenvalues()?;
    let npos = values.iter().filter(|&&v| v > T::zero()).count();
    if npos == 0 {
        return Ok((SymMatrix::zeros(n), 0));
    }
    if npos == n {
        return Ok((a.clone(), n));
    }
    let pick = |sel: &[T]| -> Result<Vec<Vec<T>>> {
        tri.eigenvectors_for(sel).or_else(|_| {
            // Inverse iteration failed to settle; fall back to full QL.
            let full = tri.eigen_full()?;
            Ok(sel
                .iter()
                .map(|&s| {
                    let k = full
                        .values
                        .iter()
                        .enumerate()
                        .min_by(|x, y| (*x.1 - s).abs().partial_cmp(&(*y.1 - s).abs()).unwrap())
                        .unwrap()
                        .0;
                    full.vectors[k].clone()
                })
                .collect())
        })
    };
    if 2 * npos <= n {
        let sel = &values[n - npos..];
        let vecs = pick(sel)?;
        let mut out = SymMatrix::zeros(n);
        for (&lam, v) in sel.iter().zip(&vecs) {
            out.rank1_update(lam, v);
        }
        Ok((out, npos))
    } else {
        let sel = &values[..n - npos];
        let vecs = pick(sel)?;
        let mut out = a.clone();
        for (&lam, v) in sel.iter().zip(&vecs) {
            out.rank1_update(-lam, v);
        }
        Ok((out, npos))
    }
}

/// Largest absolute eigenvalue.
pub fn spectral_norm<T: Scalar>(a: &SymMatrix<T>) -> Result<T> {
    let v = sym_eigvals(a)?;
    Ok(v[0].abs().max(v[v.len() - 1].abs()))
}

/// Top eigenpair with its spectral gap.
#[derive(Clone, Debug, PartialEq)]
pub struct Leading<T> {
    pub value: T,
    /// Unit norm; first nonzero coordinate positive.
    pub vector: Vec<T>,
    /// λ₁ − λ₂ (infinite for 1×1 input).
    pub gap: T,
    /// Set when the gap is below [`TIE_TOL`]; the vector is then one
    /// arbitrary member of the top eigenspace.
    pub ambiguous: bool,
}

pub const TIE_TOL: f64 = 1e-12;

pub fn leading_eigenvector<T: Scalar>(a: &SymMatrix<T>) -> Result<Leading<T>> {
    let n = a.n();
    if n == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    let tri = Tridiagonal::new(a);
    let values = tri.eigenvalues()?;
    let top = values[n - 1];
    let gap = if n > 1 { top - values[n - 2] } else { T::infinity() };
    let mut vector = tri
        .eigenvectors_for(&values[n - 1..])
        .or_else(|_| tri.eigen_full().map(|e| vec![e.vectors[n - 1].clone()]))?
        .pop()
        .unwrap();
    let norm = vector.iter().map(|&v| v * v).sum::<T>().sqrt();
    for v in vector.iter_mut() {
        *v /= norm;
    }
    canonical_sign(&mut vector);
    Ok(Leading {
        value: top,
        vector,
        gap,
        ambiguous: gap < T::lit(TIE_TOL),
    })
}

/// Flips `v` so that its first nonzero coordinate is positive.
pub fn canonical_sign<T: Scalar>(v: &mut [T]) {
    let tiny = T::epsilon() * T::lit(64.0);
    if let Some(&first) = v.iter().find(|x| x.abs() > tiny) {
        if first < T::zero() {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix<f64> {
        SymMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn check_decomp(a: &SymMatrix<f64>, e: &Eigen<f64>) {
        let r = a.sub(&e.reconstruct()).frob_norm();
        assert!(r <= 1e-8 * (1.0 + a.frob_norm()), "reconstruction {r}");
        assert!(e.orthonormality_error() <= 1e-8);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn identity_and_diagonal() {
        let e = sym_eig(&SymMatrix::<f64>::identity(4)).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let d = SymMatrix::<f64>::from_diag(&[3.0, 1.0, 2.0]);
        for e in [sym_eig(&d).unwrap(), sym_eig_ql(&d).unwrap()] {
            assert_eq!(e.values.iter().map(|v| v.round() as i32).collect::<Vec<_>>(), vec![1, 2, 3]);
            for (k, &v) in e.values.iter().enumerate() {
                assert!((v - (k + 1) as f64).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn random_decompositions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 3, 10, 31, 64] {
            let a = random_sym(n, &mut rng);
            check_decomp(&a, &sym_eig(&a).unwrap());
            check_decomp(&a, &sym_eig_ql(&a).unwrap());
            let j = sym_eig(&a).unwrap().values;
            let q = sym_eigvals(&a).unwrap();
            for (x, y) in j.iter().zip(&q) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn trace_and_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=6 {
            let a = random_sym(n, &mut rng);
            let e = sym_eig(&a).unwrap();
            let sum: f64 = e.values.iter().sum();
            assert!((sum - a.trace()).abs() <= 1e-9 * (1.0 + a.trace().abs()));
            let prod: f64 = e.values.iter().product();
            let det = cofactor_det(&(0..n).map(|i| a.row(i).to_vec()).collect::<Vec<_>>());
            assert!((prod - det).abs() <= 1e-9 * (1.0 + det.abs()), "{prod} vs {det}");
        }
    }

    fn cofactor_det(m: &[Vec<f64>]) -> f64 {
        let n = m.len();
        if n == 1 {
            return m[0][0];
        }
        (0..n)
            .map(|j| {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &v)| v).collect())
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][j] * cofactor_det(&minor)
            })
            .sum()
    }

    #[test]
    fn psd_projection_examples() {
        let neg = SymMatrix::<f64>::identity(3).scaled(-1.0);
        assert!(psd_project(&neg).unwrap().max_abs() == 0.0);
        let p = psd_project(&SymMatrix::<f64>::from_diag(&[2.0, -3.0])).unwrap();
        assert!((p.get(0, 0) - 2.0).abs() < 1e-14 && p.get(1, 1).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [5, 20, 47] {
            let a = random_sym(n, &mut rng);
            let e = sym_eig(&a).unwrap();
            let reference = e.reconstruct_with(|l| l.max(0.0));
            let fast = psd_project(&a).unwrap();
            assert!(reference.sub(&fast).frob_norm() < 1e-9);
            let again = psd_project(&fast).unwrap();
            assert!(again.sub(&fast).frob_norm() < 1e-8);
        }
    }

    #[test]
    fn projection_handles_clusters() {
        // Many repeated eigenvalues on both sides of zero.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 40;
        let q = sym_eig(&random_sym(n, &mut rng)).unwrap().vectors;
        let lam: Vec<f64> = (0..n).map(|k| if k < 25 { -1.0 } else if k < 35 { 2.0 } else { 2.0 + 1e-13 * k as f64 }).collect();
        let e = Eigen { values: lam, vectors: q };
        let a = e.reconstruct();
        let reference = e.reconstruct_with(|l| l.max(0.0));
        assert!(psd_project(&a).unwrap().sub(&reference).frob_norm() < 1e-9);
    }

    #[test]
    fn spectral_norm_examples() {
        assert_eq!(spectral_norm(&SymMatrix::<f64>::from_diag(&[1.0, -5.0])).unwrap(), 5.0);
        assert_eq!(spectral_norm(&SymMatrix::<f64>::zeros(3)).unwrap(), 0.0);
        let x = [1.0f64, 1.0, 1.0, 1.0];
        assert!((spectral_norm(&SymMatrix::outer(&x)).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn leading_examples() {
        let x = [-1.0f64, 2.0, 0.5];
        let l = leading_eigenvector(&SymMatrix::outer(&x)).unwrap();
        let nx = (1.0f64 + 4.0 + 0.25).sqrt();
        for (v, xi) in l.vector.iter().zip(x) {
            assert!((v + xi / nx).abs() < 1e-12);
        }
        assert!(!l.ambiguous);
        assert!(leading_eigenvector(&SymMatrix::<f64>::identity(4)).unwrap().ambiguous);
    }

    #[test]
    fn f32_instantiation() {
        let a = SymMatrix::<f32>::from_diag(&[3.0, 1.0, 2.0]);
        let e = sym_eig(&a).unwrap();
        assert!((e.values[2] - 3.0).abs() < 1e-6);
        assert!((spectral_norm(&a).unwrap() - 3.0).abs() < 1e-6);
    }
}
