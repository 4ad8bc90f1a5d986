//! Analysis of nonexpansive maps on the positive orthant and of Shapley
//! operators of zero-sum stochastic games.
//!
//! The crate is organised in four layers:
//!
//! * [`cone_metrics`]: Hilbert and Thompson metrics, the local sup-norm
//!   `‖·‖_u`, the oscillation seminorm `ω_u` and the log/exp conjugation
//!   between the multiplicative and additive pictures.
//! * [`semidiff`]: min/max/sum trees of affine terms, their semidifferentials,
//!   syntactic composition and a finite-difference oracle.
//! * [`spectral`]: operator (semi)norms and Bonsall spectral radius bounds of
//!   homogeneous piecewise-linear maps, with exact region enumeration for
//!   small dimensions.
//! * [`games`]: Shapley operators of coin-toss games on weighted digraphs,
//!   additive eigenpairs, uniqueness certificates and empirical rates.
//!
//! Data-parallel loops go through [`par`], which dispatches to rayon when the
//! `parallel` feature is on and runs sequentially otherwise.

pub mod cone_metrics;
pub mod error;
pub mod games;
pub mod par;
pub mod semidiff;
pub mod spectral;

pub use cone_metrics::{ConeVector, Normalizer};
pub use error::{Error, Result};
pub use games::{EigenReport, GameGraph};
pub use par::Execution;
pub use semidiff::{ActiveSets, AffineTerm, Expr, MinMaxAffineOp};
pub use spectral::{Certificate, NormKind, SamplePlan, SpectralEstimate};
