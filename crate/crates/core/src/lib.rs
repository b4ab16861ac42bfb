//! Bounds on bilinear inverse forms `u^T A^{-1} u` from Gauss-type quadrature
//! over Lanczos iterations, and samplers/optimizers that use them to make
//! exactly the decisions an exact solver would make, with far fewer matvecs.
//!
//! * [`matrix`]: CSR symmetric storage, submatrix operators, Gershgorin bounds.
//! * [`quadrature`]: Gauss, Gauss-Radau and Gauss-Lobatto estimates per iteration.
//! * [`judge`]: threshold, ratio and gain comparisons decided from the bounds.
//! * [`dpp`], [`greedy`]: DPP / k-DPP Metropolis chains and log-det double greedy.
//! * [`oracle`]: dense reference implementations.
//! * [`io`], [`build`]: Matrix Market and edge-list I/O, kernel constructors.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod build;
pub mod dpp;
pub mod error;
pub mod greedy;
pub mod harness;
pub mod io;
pub mod judge;
pub mod matrix;
pub mod oracle;
pub mod parallel;
pub mod quadrature;

pub use error::{Error, Result};
pub use judge::{judge_gain, judge_ratio, judge_threshold, JudgeConfig, JudgeOutcome};
pub use matrix::{jacobi_precondition, spmv, IndexSet, LinearOperator, SpectrumBounds, SubmatrixOperator, SymmetricSparseMatrix};
pub use quadrature::{run, BoundsTrace, GaussEstimates, QuadratureConfig, QuadratureState, Reorthogonalization};
