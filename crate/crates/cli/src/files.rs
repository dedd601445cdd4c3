//! JSON problem and result files.
//!
//! Matrices are nested arrays in row-major order. Floats are written in
//! shortest round-trip form and parsed with correct rounding, so every value
//! survives a write/read cycle bit for bit.

use std::fs;
use std::path::Path;

use rimu_core::nalgebra::{DMatrix, MatrixXx3};
use rimu_core::{Criterion, Error as CoreError, NoiseModel, SensorConfiguration, SolverSettings};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Seed used when neither the problem file nor `--seed` provides one.
pub const DEFAULT_SEED: u64 = 0;

pub const TOOL_VERSION: &str = concat!("rimu-opt ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FomChoice {
    A,
    D,
}

impl FomChoice {
    pub fn criterion(self) -> Criterion {
        match self {
            FomChoice::A => Criterion::A,
            FomChoice::D => Criterion::D,
        }
    }
}

/// Optional overrides of the solver defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_outer: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_outer_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_inner: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_inner_sweeps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
}

impl SettingsOverrides {
    pub fn apply(&self, mut settings: SolverSettings) -> SolverSettings {
        if let Some(v) = self.eps_outer {
            settings.tolerance = v;
        }
        if let Some(v) = self.max_outer_iters {
            settings.max_iters = v;
        }
        if let Some(v) = self.eps_inner {
            settings.inner.tolerance = v;
        }
        if let Some(v) = self.max_inner_sweeps {
            settings.inner.max_sweeps = v;
        }
        if let Some(v) = self.seed {
            settings.seed = v;
        }
        if let Some(v) = self.restarts {
            settings.restarts = v;
        }
        settings
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub m: usize,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    pub fom: FomChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<SettingsOverrides>,
    #[serde(rename = "H0", default, skip_serializing_if = "Option::is_none")]
    pub h0: Option<Vec<Vec<f64>>>,
}

impl ProblemFile {
    pub fn noise(&self) -> Result<NoiseModel, CliError> {
        let r = covariance_from_rows(&self.r)?;
        if r.nrows() != self.m {
            return Err(CliError::input(format!(
                "R: expected {m}×{m}, found {n}×{n}",
                m = self.m,
                n = r.nrows()
            )));
        }
        noise_from_matrix(r)
    }

    pub fn initial(&self) -> Result<Option<SensorConfiguration>, CliError> {
        let Some(rows) = &self.h0 else {
            return Ok(None);
        };
        let h = configuration_from_rows(rows, "H0")?;
        if h.m() != self.m {
            return Err(CliError::input(format!(
                "H0: expected {} rows, found {}",
                self.m,
                h.m()
            )));
        }
        Ok(Some(h))
    }

    pub fn settings(&self) -> SolverSettings {
        let base = SolverSettings {
            seed: DEFAULT_SEED,
            ..SolverSettings::new(self.fom.criterion())
        };
        match &self.settings {
            Some(overrides) => overrides.apply(base),
            None => base,
        }
    }
}

/// Solver output, also used for reference geometries (without the solver fields).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fom: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    pub optimality_defect: f64,
    pub tool_version: String,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
}

impl SolutionFile {
    pub fn configuration(&self) -> Result<SensorConfiguration, CliError> {
        configuration_from_rows(&self.h, "H")
    }
}

pub fn rows_of(config: &SensorConfiguration) -> Vec<Vec<f64>> {
    config.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn check_rectangular(rows: &[Vec<f64>], cols: usize, field: &str) -> Result<(), CliError> {
    if rows.is_empty() {
        return Err(CliError::input(format!("{field}: empty matrix")));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(CliError::input(format!(
                "{field}: row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(CliError::input(format!(
                "{field}[{i}][{j}]: non-finite value"
            )));
        }
    }
    Ok(())
}

pub fn covariance_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    check_rectangular(rows, rows.len(), "R")?;
    let m = rows.len();
    Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

pub fn noise_from_matrix(r: DMatrix<f64>) -> Result<NoiseModel, CliError> {
    NoiseModel::new(r).map_err(|e| match e {
        CoreError::NotPositiveDefinite { .. } => {
            CliError::input(format!("R: covariance not positive definite ({e})"))
        }
        CoreError::NotSymmetric { .. } => {
            CliError::input(format!("R: covariance not symmetric ({e})"))
        }
        other => CliError::input(format!("R: {other}")),
    })
}

pub fn configuration_from_rows(
    rows: &[Vec<f64>],
    field: &str,
) -> Result<SensorConfiguration, CliError> {
    check_rectangular(rows, 3, field)?;
    let axes = MatrixXx3::from_fn(rows.len(), |i, j| rows[i][j]);
    SensorConfiguration::new(axes).map_err(|e| CliError::input(format!("{field}: {e}")))
}

/// Reads JSON from `path`, reporting parse failures with line and column.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// A matrix given either as a bare nested array or as an object holding it under `key`.
#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixSource {
    Bare(Vec<Vec<f64>>),
    Object(serde_json::Map<String, serde_json::Value>),
}

pub fn read_matrix(path: &Path, key: &str) -> Result<Vec<Vec<f64>>, CliError> {
    match read_json::<MatrixSource>(path)? {
        MatrixSource::Bare(rows) => Ok(rows),
        MatrixSource::Object(mut map) => {
            let value = map.remove(key).ok_or_else(|| {
                CliError::input(format!("{}: missing field `{key}`", path.display()))
            })?;
            serde_json::from_value(value)
                .map_err(|e| CliError::input(format!("{}: field `{key}`: {e}", path.display())))
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    text
}
