//! Label extraction from a solved matrix.

use crate::error::{Error, Result};
use crate::linalg::{leading_eigenvector, sym_eigvals};
use crate::model::{tilde_y, LabelVector, SideInfo};
use crate::scalar::Scalar;

use super::admm::SdpSolution;

/// Rounded labels plus the tie flag of the leading eigenvector.
#[derive(Clone, Debug, PartialEq)]
pub struct Rounded {
    pub labels: LabelVector,
    /// Top eigenvalue of the Z block is not simple.
    pub ambiguous: bool,
}

/// Signs of the leading eigenvector of the Z block, with the global sign
/// chosen to agree with the side information (ties and `None` keep +).
pub fn round<T: Scalar>(solution: &SdpSolution<T>, side: Option<&SideInfo>) -> Result<Rounded> {
    let z = solution.z_block();
    let lead = leading_eigenvector(&z)?;
    let mut signs: Vec<i8> = lead.vector.iter().map(|&v| if v < T::zero() { -1 } else { 1 }).collect();
    if let Some(side) = side {
        if side.len() != signs.len() {
            return Err(Error::Dimension {
                expected: signs.len(),
                found: side.len(),
            });
        }
        let agreement: f64 = match side {
            SideInfo::Erasure { values } | SideInfo::Noisy { values } => {
                values.iter().zip(&signs).map(|(&y, &x)| (y as i64 * x as i64) as f64).sum()
            }
            SideInfo::General { .. } => {
                let ty = tilde_y::<f64>(side)?;
                ty.iter().zip(&signs).map(|(&y, &x)| y * x as f64).sum()
            }
        };
        if agreement < 0.0 {
            signs.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(Rounded {
        labels: LabelVector::new(signs)?,
        ambiguous: lead.ambiguous,
    })
}

pub const EXACT_DISTANCE_TOL: f64 = 1e-3;
pub const EXACT_MASS_TOL: f64 = 0.999;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exactness {
    pub exact: bool,
    /// ‖Ẑ − x*x*ᵀ‖_F / n on the Z block.
    pub distance: f64,
    /// λ₁ / trace of the Z block.
    pub top_mass: f64,
}

pub fn exactness_check<T: Scalar>(solution: &SdpSolution<T>, truth: &LabelVector) -> Result<Exactness> {
    let z = solution.z_block();
    let n = z.n();
    if n != truth.len() {
        return Err(Error::Dimension {
            expected: n,
            found: truth.len(),
        });
    }
    let x = truth.as_slice();
    let mut acc = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let d = z.get(i, j).to_f64_lossy() - (x[i] * x[j]) as f64;
            acc += d * d;
        }
    }
    let distance = acc.sqrt() / n as f64;
    let values = sym_eigvals(&z)?;
    let trace = z.trace().to_f64_lossy();
    let top_mass = if trace > 0.0 {
        values[n - 1].to_f64_lossy() / trace
    } else {
        0.0
    };
    Ok(Exactness {
        exact: distance <= EXACT_DISTANCE_TOL && top_mass >= EXACT_MASS_TOL,
        distance,
        top_mass,
    })
}
