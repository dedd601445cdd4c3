//! Optimal orientation of redundant single-axis inertial sensors.
//!
//! Given `m ≥ 3` sensors with noise covariance `R`, the crate finds sensing
//! axes `H` (unit rows) minimizing the trace (A-optimal) or log-determinant
//! (D-optimal) of the weighted least-squares error covariance
//! `C_e = (HᵀR⁻¹H)⁻¹`. The solver is a majorization-minimization loop over
//! `H` whose surrogate is minimized through its Lagrange dual by a second
//! majorization-minimization loop with closed-form quartic coordinate updates.
//!
//! ```
//! use rimu_core::{solve_d_optimal, NoiseModel, SolverSettings};
//!
//! let noise = NoiseModel::isotropic(4, 3.0).unwrap();
//! let solution = solve_d_optimal(&noise, &SolverSettings::default(), None).unwrap();
//! assert!((solution.objective - 3.0 * (9.0f64 / 4.0).ln()).abs() < 1e-4);
//! ```

// `!(x > tol)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod inner;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod outer;
pub mod quartic;
pub mod reference;

#[cfg(test)]
mod test_util;

pub use error::{Error, Result};
pub use inner::{InnerOutcome, InnerSettings, InnerState};
pub use model::{
    error_covariance, evaluate_fom, information_matrix, optimality_defect, rotate_configuration,
    wls_estimate, FomKind, NoiseModel, SensorConfiguration, WlsEstimator,
};
pub use montecarlo::{simulate_measurements, verify_covariance, McReport};
pub use numerics::SpdMatrix;
pub use outer::{
    multi_start, random_configuration, solve, solve_a_optimal, solve_d_optimal, surrogate_value,
    update_configuration, ConvergenceTrace, Criterion, MmSolver, MultiStart, Solution,
    SolverSettings, StepReport, TraceRecord,
};
pub use quartic::{minimize_quartic, QuarticMin, QuarticPoly};
pub use reference::{
    build_reference, compare_against_reference, PlatonicSolid, ReferenceComparison, ReferenceKind,
};

/// Re-exported so callers can build matrices without a direct dependency.
pub use nalgebra;
