//! Covariance estimation through the regression interpretation of the
//! modified Cholesky decomposition.
//!
//! Writing `Σ = L D Lᵀ`, each variable is regressed on the residuals of its
//! predecessors; regularizing those regressions (banding, lasso, nested
//! lasso) gives covariance estimators that are positive definite by
//! construction. The inverse factorization `Σ⁻¹ = Tᵀ D⁻¹ T` is available
//! alongside, as are the evaluation metrics, Monte Carlo harness, bandwidth
//! selection and QDA classifier used to compare them.

pub mod data;
pub mod error;
pub mod estimators;
pub mod likelihood;
pub mod linalg;
pub mod metrics;
mod parallel;
pub mod penalty;
pub mod qda;
pub mod rng;
pub mod selection;
pub mod simulation;

pub use data::{center, DataMatrix};
pub use error::{Error, Result};
pub use estimators::{estimate, CovarianceEstimate, EstimatorSpec, Method};
pub use linalg::{CholeskyFactors, EigenDecomposition, Matrix, SymMatrix};
