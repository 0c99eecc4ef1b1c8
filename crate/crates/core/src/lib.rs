//! Semidefinite relaxations for two-community detection on censored and
//! stochastic block models with node side information.
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`, which is what the experiment
//! harness uses.

pub mod certificate;
pub mod error;
pub mod generators;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod scalar;
pub mod sdp;
pub mod stats;
pub mod thresholds;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = linalg::SymMatrix<f64>;
pub type Eigen = linalg::Eigen<f64>;
pub type Program = sdp::SdpProgram<f64>;
pub type Solution = sdp::SdpSolution<f64>;
pub type Certificate = certificate::Certificate<f64>;
pub type Coefs = model::LikelihoodCoefs<f64>;
