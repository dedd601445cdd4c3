//! Measurement model: sensing-axis configurations, noise covariance and the
//! figures of merit derived from the weighted least-squares error covariance
//! `C_e = (Hᵀ R⁻¹ H)⁻¹`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Dyn, Matrix3, MatrixXx3, OMatrix, Vector3, U3};

use crate::error::{Error, Result};
use crate::numerics::{self, min_eigen3, SpdMatrix};

/// Rows within this distance of unit norm are silently renormalized.
pub const UNIT_NORM_TOL: f64 = 1e-6;
/// Smallest admissible eigenvalue of `HᵀH`.
pub const RANK_TOL: f64 = 1e-10;
/// Smallest admissible eigenvalue of `HᵀR⁻¹H`.
pub const INFORMATION_TOL: f64 = 1e-12;
const ORTHOGONALITY_TOL: f64 = 1e-10;

/// `m` unit sensing axes stacked as the rows of an `m×3` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorConfiguration {
    axes: MatrixXx3<f64>,
}

impl SensorConfiguration {
    pub fn new(mut axes: MatrixXx3<f64>) -> Result<Self> {
        let m = axes.nrows();
        if m < 3 {
            return Err(Error::TooFewSensors(m));
        }
        if axes.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        for i in 0..m {
            let norm = axes.row(i).norm();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NotUnitNorm { row: i, norm });
            }
            axes.row_mut(i).unscale_mut(norm);
        }
        let min_eigenvalue = min_eigen3(&(axes.transpose() * &axes));
        if !(min_eigenvalue > RANK_TOL) {
            return Err(Error::RankDeficient { min_eigenvalue });
        }
        Ok(Self { axes })
    }

    pub fn from_rows(rows: &[[f64; 3]]) -> Result<Self> {
        let axes = MatrixXx3::from_fn(rows.len(), |i, j| rows[i][j]);
        Self::new(axes)
    }

    /// Number of sensors.
    pub fn m(&self) -> usize {
        self.axes.nrows()
    }

    pub fn axes(&self) -> &MatrixXx3<f64> {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> Vector3<f64> {
        self.axes.row(i).transpose()
    }

    pub fn rows(&self) -> Vec<[f64; 3]> {
        (0..self.m())
            .map(|i| [self.axes[(i, 0)], self.axes[(i, 1)], self.axes[(i, 2)]])
            .collect()
    }

    /// `HᵀH`.
    pub fn gram(&self) -> Matrix3<f64> {
        self.axes.transpose() * &self.axes
    }

    pub fn optimality_defect(&self) -> f64 {
        optimality_defect(&self.axes)
    }
}

/// Sensor noise covariance `R` with its inverse and Cholesky factor cached.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    covariance: SpdMatrix,
    inverse: DMatrix<f64>,
    cholesky: DMatrix<f64>,
}

impl NoiseModel {
    pub fn new(covariance: DMatrix<f64>) -> Result<Self> {
        let covariance = SpdMatrix::new(covariance)?;
        let cholesky = numerics::cholesky(&covariance)?;
        let inverse = numerics::cholesky_inverse(&cholesky);
        let inverse = (&inverse + inverse.transpose()) * 0.5;
        Ok(Self {
            covariance,
            inverse,
            cholesky,
        })
    }

    /// Independent sensors with a common variance.
    pub fn isotropic(m: usize, variance: f64) -> Result<Self> {
        Self::new(DMatrix::identity(m, m) * variance)
    }

    /// Independent sensors with individual variances.
    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(
            variances,
        )))
    }

    pub fn m(&self) -> usize {
        self.covariance.dim()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        self.covariance.as_matrix()
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.cholesky
    }

    fn check(&self, config: &SensorConfiguration) -> Result<()> {
        if config.m() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                found: config.m(),
            });
        }
        Ok(())
    }

    /// `R⁻¹ H`, the matrix whose rows are the weighted axes `c̃_i`.
    pub(crate) fn weighted_axes(&self, axes: &MatrixXx3<f64>) -> MatrixXx3<f64> {
        &self.inverse * axes
    }
}

/// Scalar summaries of the error covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FomKind {
    /// `Tr C_e`, the A-optimality criterion.
    ATrace,
    /// `log det C_e`, the D-optimality criterion.
    DLogDet,
    Determinant,
    /// Geometric dilution of precision, `√Tr C_e`.
    Gdop,
    MaxEig,
    /// Volume of `{e : eᵀ C_e⁻¹ e = k}`.
    EllipsoidVolume(f64),
}

impl FomKind {
    pub const fn name(&self) -> &'static str {
        match self {
            FomKind::ATrace => "a_trace",
            FomKind::DLogDet => "d_logdet",
            FomKind::Determinant => "determinant",
            FomKind::Gdop => "gdop",
            FomKind::MaxEig => "max_eig",
            FomKind::EllipsoidVolume(_) => "ellipsoid_volume",
        }
    }

    /// Every kind, with the ellipsoid scale at its default `k = 1`.
    pub const ALL: [FomKind; 6] = [
        FomKind::ATrace,
        FomKind::DLogDet,
        FomKind::Determinant,
        FomKind::Gdop,
        FomKind::MaxEig,
        FomKind::EllipsoidVolume(1.0),
    ];
}

/// `Hᵀ R⁻¹ H` as a fixed-size matrix, with the singularity guard applied.
pub(crate) fn information3(
    config: &SensorConfiguration,
    noise: &NoiseModel,
) -> Result<Matrix3<f64>> {
    noise.check(config)?;
    let h = config.axes();
    let info = h.transpose() * noise.weighted_axes(h);
    let info = (info + info.transpose()) * 0.5;
    let min_eigenvalue = min_eigen3(&info);
    if !(min_eigenvalue >= INFORMATION_TOL) {
        return Err(Error::SingularInformation { min_eigenvalue });
    }
    Ok(info)
}

/// Fisher information `Hᵀ R⁻¹ H`.
pub fn information_matrix(config: &SensorConfiguration, noise: &NoiseModel) -> Result<SpdMatrix> {
    SpdMatrix::from_matrix3(&information3(config, noise)?)
}

/// Weighted least-squares error covariance `(Hᵀ R⁻¹ H)⁻¹`.
pub fn error_covariance(config: &SensorConfiguration, noise: &NoiseModel) -> Result<SpdMatrix> {
    numerics::spd_inverse(&information_matrix(config, noise)?)
}

pub fn evaluate_fom(
    config: &SensorConfiguration,
    noise: &NoiseModel,
    kind: FomKind,
) -> Result<f64> {
    let info = information_matrix(config, noise)?;
    fom_from_information(&info, kind)
}

pub(crate) fn fom_from_information(info: &SpdMatrix, kind: FomKind) -> Result<f64> {
    // det C_e = 1/det(HᵀR⁻¹H), taken from the Cholesky factor of the information matrix.
    let logdet_cov = || numerics::logdet_spd(info).map(|v| -v);
    let trace_cov = || numerics::spd_inverse(info).map(|c| c.as_matrix().trace());
    match kind {
        FomKind::ATrace => trace_cov(),
        FomKind::DLogDet => logdet_cov(),
        FomKind::Determinant => logdet_cov().map(f64::exp),
        FomKind::Gdop => trace_cov().map(f64::sqrt),
        FomKind::MaxEig => numerics::max_eigen_sym(numerics::spd_inverse(info)?.as_matrix()),
        FomKind::EllipsoidVolume(k) => {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::InvalidSettings(format!(
                    "ellipsoid scale must be positive, got {k}"
                )));
            }
            Ok(4.0 / 3.0 * k.powf(1.5) * PI * (0.5 * logdet_cov()?).exp())
        }
    }
}

/// Precomputed weighted least-squares gain `(HᵀR⁻¹H)⁻¹ HᵀR⁻¹`.
#[derive(Debug, Clone)]
pub struct WlsEstimator {
    gain: OMatrix<f64, U3, Dyn>,
}

impl WlsEstimator {
    pub fn new(config: &SensorConfiguration, noise: &NoiseModel) -> Result<Self> {
        let cov = error_covariance(config, noise)?
            .to_matrix3()
            .expect("error covariance is 3×3");
        let gain = cov * noise.weighted_axes(config.axes()).transpose();
        Ok(Self { gain })
    }

    pub fn m(&self) -> usize {
        self.gain.ncols()
    }

    pub fn estimate(&self, y: &DVector<f64>) -> Result<Vector3<f64>> {
        if y.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                found: y.len(),
            });
        }
        Ok(&self.gain * y)
    }
}

/// Weighted least-squares estimate `x̂ = (HᵀR⁻¹H)⁻¹HᵀR⁻¹y`.
pub fn wls_estimate(
    config: &SensorConfiguration,
    noise: &NoiseModel,
    y: &DVector<f64>,
) -> Result<Vector3<f64>> {
    WlsEstimator::new(config, noise)?.estimate(y)
}

/// `‖HᵀH − (m/3) I‖_F`, zero exactly when the equal-variance optimality condition holds.
///
/// Accepts any `m×3` matrix, including rank-deficient ones.
pub fn optimality_defect(axes: &MatrixXx3<f64>) -> f64 {
    let m = axes.nrows() as f64;
    (axes.transpose() * axes - Matrix3::identity() * (m / 3.0)).norm()
}

/// `H Cᵀ`: every axis rotated (or reflected) by the orthogonal matrix `C`.
pub fn rotate_configuration(
    config: &SensorConfiguration,
    c: &Matrix3<f64>,
) -> Result<SensorConfiguration> {
    let defect = (c.transpose() * c - Matrix3::identity()).norm();
    if !(defect <= ORTHOGONALITY_TOL) {
        return Err(Error::NotOrthogonal { defect });
    }
    SensorConfiguration::new(config.axes() * c.transpose())
}
