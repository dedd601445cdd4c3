use nalgebra::{DMatrix, Matrix3, MatrixXx3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::model::SensorConfiguration;

pub fn random_matrix3(seed: u64) -> Matrix3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix3::from_fn(|_, _| rng.sample(StandardNormal))
}

/// Orthogonal matrix from the QR factor of a Gaussian matrix, reflections included.
pub fn random_orthogonal(seed: u64) -> Matrix3<f64> {
    random_matrix3(seed).qr().q()
}

/// `MᵀM/m + 0.1 I` for Gaussian `M`.
pub fn random_spd(m: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    a.transpose() * &a / m as f64 + DMatrix::identity(m, m) * 0.1
}

pub fn random_unit_rows(m: usize, seed: u64) -> SensorConfiguration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut axes = MatrixXx3::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        for i in 0..m {
            let n = axes.row(i).norm();
            axes.row_mut(i).unscale_mut(n);
        }
        if let Ok(h) = SensorConfiguration::new(axes) {
            return h;
        }
    }
}
