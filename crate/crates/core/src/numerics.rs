//! Dense symmetric kernels for the small matrices used throughout the crate.
//!
//! Everything here is direct: Cholesky for definite matrices and a symmetric
//! eigendecomposition for square roots and spectral bounds.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative asymmetry absorbed by symmetrization.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Cholesky pivots at or below this fraction of the largest diagonal entry are rejected.
pub const PIVOT_TOL: f64 = 1e-14;
/// Negative eigenvalues above `-PSD_CLAMP_TOL * λ_max` are clamped to zero.
pub const PSD_CLAMP_TOL: f64 = 1e-12;

/// A symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    inner: DMatrix<f64>,
}

impl SpdMatrix {
    /// Validates `a`, symmetrizing away round-off level asymmetry.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        let sym = symmetrized(&a)?;
        cholesky_lower(&sym)?;
        Ok(Self { inner: sym })
    }

    pub fn from_matrix3(a: &Matrix3<f64>) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(3, 3, a.as_slice()))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: DMatrix::identity(dim, dim),
        }
    }

    /// `scale · I` for `scale > 0`.
    pub fn scaled_identity(dim: usize, scale: f64) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim) * scale)
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.inner
    }

    /// Fixed-size copy; `None` unless the matrix is 3×3.
    pub fn to_matrix3(&self) -> Option<Matrix3<f64>> {
        (self.dim() == 3).then(|| Matrix3::from_column_slice(self.inner.as_slice()))
    }
}

/// Returns `(A + Aᵀ)/2` when `A` is square and symmetric within [`SYMMETRY_TOL`].
pub fn symmetrized(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (a[(i, j)] - a[(j, i)]).abs();
            if gap > SYMMETRY_TOL * a[(i, j)].abs().max(1.0) {
                return Err(Error::NotSymmetric {
                    row: i,
                    col: j,
                    gap,
                });
            }
        }
    }
    Ok((a + a.transpose()) * 0.5)
}

fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let max_diag = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let floor = PIVOT_TOL * max_diag;
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > floor) {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let diag = pivot.sqrt();
        l[(j, j)] = diag;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / diag;
        }
    }
    Ok(l)
}

/// Lower-triangular `L` with `A = L·Lᵀ`.
pub fn cholesky(a: &SpdMatrix) -> Result<DMatrix<f64>> {
    cholesky_lower(a.as_matrix())
}

/// Inverse through the Cholesky factor.
pub fn spd_inverse(a: &SpdMatrix) -> Result<SpdMatrix> {
    let l = cholesky(a)?;
    let inv = cholesky_inverse(&l);
    Ok(SpdMatrix {
        inner: (&inv + inv.transpose()) * 0.5,
    })
}

/// `(L·Lᵀ)⁻¹` from a lower Cholesky factor.
pub(crate) fn cholesky_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut x = DMatrix::identity(n, n);
    // Forward substitution column by column, then back substitution with Lᵀ.
    for col in 0..n {
        for i in 0..n {
            let mut s = x[(i, col)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, col)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
    }
    x
}

/// `ln det A = 2 Σ ln L_ii`.
pub fn logdet_spd(a: &SpdMatrix) -> Result<f64> {
    let l = cholesky(a)?;
    Ok(2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Principal square root of a symmetric positive-semidefinite matrix.
pub fn sym_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = symmetrized(a)?;
    let eig = SymmetricEigen::new(sym);
    let lambda_max = eig.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < 0.0 {
            if *v < -PSD_CLAMP_TOL * lambda_max {
                return Err(Error::NotPositiveSemidefinite { eigenvalue: *v });
            }
            *v = 0.0;
        }
        *v = v.sqrt();
    }
    let q = &eig.eigenvectors;
    let b = q * DMatrix::from_diagonal(&roots) * q.transpose();
    Ok((&b + b.transpose()) * 0.5)
}

/// [`sym_sqrt`] specialised to 3×3.
pub fn sym_sqrt3(a: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let b = sym_sqrt(&DMatrix::from_column_slice(3, 3, a.as_slice()))?;
    Ok(Matrix3::from_column_slice(b.as_slice()))
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigen_sym(a: &DMatrix<f64>) -> Result<f64> {
    let sym = symmetrized(a)?;
    let eig = SymmetricEigen::new(sym);
    Ok(eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Smallest eigenvalue of a symmetric 3×3 matrix.
pub(crate) fn min_eigen3(a: &Matrix3<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}
