//! Tree representations of α-determinantal point processes on ℝ.
//!
//! The crate evaluates α-determinants, builds the dyadic Haar tree bases
//! `F(ℓ)`, projects a kernel onto them, checks the continuum/tree Parseval
//! identity for correlation integrals, and samples the lifted marked point
//! process whose unlabeled points reproduce the continuum process on the
//! cell-count σ-field.

pub mod alpha;
pub mod alpha_det;
pub mod correlation;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod projection;
pub mod quadrature;
pub mod sampler;
pub mod stats;
pub mod tree;

pub use alpha::AlphaParam;
pub use alpha_det::{cycle_count, det_alpha_dp, det_alpha_naive, CMatrix};
pub use error::{Error, Result};
pub use kernel::{Eigenpair, KernelSpec};
pub use projection::ProjectedKernel;
pub use quadrature::QuadratureSpec;
pub use tree::{BasisIndex, Interval, TreeIndex};
