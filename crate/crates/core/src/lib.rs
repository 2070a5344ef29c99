//! SNR loss of an adaptive filter trained under covariance mismatch.
//!
//! The crate builds scenario pairs `(Σ, Σ_t, v)`, reduces them to a weighted
//! sum of non-central chi-squares over an independent chi-square, fits
//! closed-form approximations to the resulting loss law, and checks them
//! against two Monte Carlo samplers.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approximation;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod mismatch;
pub mod montecarlo;
pub mod quadrature;
pub mod sampling;
pub mod scenarios;

pub use approximation::{LossDistribution, LossKind, PearsonFit, ScaledChi2Fit, ScaledFFit};
pub use error::{Error, Result};
pub use linalg::{CholeskyFactor, ComplexMatrix, HermitianMatrix, C64};
pub use mismatch::{CumulantTriple, OmegaDecomposition, QuadraticFormSpec};
pub use montecarlo::{SampleSet, SamplerKind};
pub use sampling::RngStream;
pub use scenarios::{ArrayScenario, MismatchKind, ScenarioPair};
