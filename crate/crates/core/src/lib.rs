//! Inequality constrained shrinkage estimation.
//!
//! The estimator averages an unrestricted fit `θ̂` and an inequality
//! restricted fit `θ̃` with a data-driven positive-part weight whose
//! shrinkage level comes from the distribution of the Kuhn-Tucker
//! multipliers of the restricted problem.

pub mod asymptotics;
pub mod comparators;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod mc_study;
pub mod model;
pub mod normal;
pub mod orthant;
pub mod qp;
pub mod rng;
pub mod shrinkage;

pub use error::{IcseError, Result};
pub use linalg::{Matrix, Vector};
pub use model::{build_linear_problem, evaluate_loss, loss_matrix, EstimationProblem, FitResult, LossSpec, ScoreVariance};
pub use qp::{brute_force_qp, kt_residuals, solve_qp, solve_qp_warm, KTSolution, KtResiduals, LinearConstraints, QuadraticProblem};
