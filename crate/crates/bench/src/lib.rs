//! Criterion benchmarks for the solver; see `benches/solver.rs`.

use rimu_core::nalgebra::DMatrix;
use rimu_core::NoiseModel;

/// A fixed, well-conditioned correlated covariance: unit diagonal, ρ^|i−j| off it.
pub fn autoregressive_noise(m: usize, rho: f64) -> NoiseModel {
    let r = DMatrix::from_fn(m, m, |i, j| rho.powi(i.abs_diff(j) as i32));
    NoiseModel::new(r).expect("AR(1) covariance is SPD for |ρ| < 1")
}
