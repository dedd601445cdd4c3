//! Monte-Carlo check of the weighted least-squares error covariance.
//!
//! Noise is drawn as `ε = L z` with `L` the Cholesky factor of `R`. Samples are
//! produced in fixed-size chunks, each from its own ChaCha8 stream (`seed`,
//! stream = chunk index), so results do not depend on the thread count.

use nalgebra::{DVector, Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{error_covariance, NoiseModel, SensorConfiguration, WlsEstimator};

pub const CHUNK_SIZE: usize = 4096;
pub const MIN_SAMPLES: usize = 1000;

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Iterator over noisy measurement vectors `ỹ = Hx + ε`.
#[derive(Debug, Clone)]
pub struct MeasurementStream {
    clean: DVector<f64>,
    factor: nalgebra::DMatrix<f64>,
    seed: u64,
    remaining: usize,
    produced: usize,
    rng: ChaCha8Rng,
    z: DVector<f64>,
}

impl MeasurementStream {
    fn draw(&mut self) -> DVector<f64> {
        if self.produced.is_multiple_of(CHUNK_SIZE) {
            self.rng = chunk_rng(self.seed, self.produced / CHUNK_SIZE);
        }
        for v in self.z.iter_mut() {
            *v = StandardNormal.sample(&mut self.rng);
        }
        self.produced += 1;
        &self.clean + &self.factor * &self.z
    }
}

impl Iterator for MeasurementStream {
    type Item = DVector<f64>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        Some(self.draw())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for MeasurementStream {}

pub fn simulate_measurements(
    config: &SensorConfiguration,
    noise: &NoiseModel,
    truth: &Vector3<f64>,
    count: usize,
    seed: u64,
) -> Result<MeasurementStream> {
    if config.m() != noise.m() {
        return Err(Error::DimensionMismatch {
            expected: noise.m(),
            found: config.m(),
        });
    }
    let m = config.m();
    Ok(MeasurementStream {
        clean: DVector::from_iterator(m, (config.axes() * truth).iter().copied()),
        factor: noise.cholesky_factor().clone(),
        seed,
        remaining: count,
        produced: 0,
        rng: chunk_rng(seed, 0),
        z: DVector::zeros(m),
    })
}

/// Empirical versus predicted estimation error statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub samples: usize,
    pub seed: u64,
    pub empirical_cov: Matrix3<f64>,
    /// `C_e = (HᵀR⁻¹H)⁻¹`.
    pub predicted_cov: Matrix3<f64>,
    /// `‖Ĉ − C_e‖_F / ‖C_e‖_F`.
    pub relative_frobenius_error: f64,
    pub empirical_mean_error: Vector3<f64>,
}

#[derive(Clone, Copy)]
struct Moments {
    count: usize,
    sum: Vector3<f64>,
    outer: Matrix3<f64>,
}

/// Runs `count` simulated measurements through the WLS estimator.
pub fn verify_covariance(
    config: &SensorConfiguration,
    noise: &NoiseModel,
    truth: &Vector3<f64>,
    count: usize,
    seed: u64,
) -> Result<McReport> {
    if count < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            minimum: MIN_SAMPLES,
            requested: count,
        });
    }
    let predicted_cov = error_covariance(config, noise)?
        .to_matrix3()
        .expect("3×3 covariance");
    let estimator = WlsEstimator::new(config, noise)?;
    let template = simulate_measurements(config, noise, truth, count, seed)?;

    let chunks = count.div_ceil(CHUNK_SIZE);
    let partials: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let len = CHUNK_SIZE.min(count - chunk * CHUNK_SIZE);
            let mut stream = template.clone();
            stream.produced = chunk * CHUNK_SIZE;
            stream.remaining = len;
            let mut acc = Moments {
                count: 0,
                sum: Vector3::zeros(),
                outer: Matrix3::zeros(),
            };
            for y in stream {
                let err = estimator.estimate(&y).expect("dimensions checked") - truth;
                acc.count += 1;
                acc.sum += err;
                acc.outer += err * err.transpose();
            }
            acc
        })
        .collect();

    // Reduce in chunk order so the result is independent of scheduling.
    let total = partials.iter().fold(
        Moments {
            count: 0,
            sum: Vector3::zeros(),
            outer: Matrix3::zeros(),
        },
        |a, b| Moments {
            count: a.count + b.count,
            sum: a.sum + b.sum,
            outer: a.outer + b.outer,
        },
    );
    let n = total.count as f64;
    let mean = total.sum / n;
    let empirical_cov = (total.outer - mean * mean.transpose() * n) / (n - 1.0);
    let empirical_cov = (empirical_cov + empirical_cov.transpose()) * 0.5;
    Ok(McReport {
        samples: total.count,
        seed,
        empirical_cov,
        predicted_cov,
        relative_frobenius_error: (empirical_cov - predicted_cov).norm() / predicted_cov.norm(),
        empirical_mean_error: mean,
    })
}
