//! Closed-form benchmark geometries.

use std::f64::consts::TAU;

use nalgebra::{MatrixXx3, Vector3};

use crate::error::{Error, Result};
use crate::model::{evaluate_fom, NoiseModel, SensorConfiguration};
use crate::outer::{solve, SolverSettings};

/// Regular polyhedra whose unique face-normal axes form a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlatonicSolid {
    /// 3 axes.
    Cube,
    /// 4 axes.
    Octahedron,
    /// 6 axes.
    Dodecahedron,
    /// 10 axes.
    Icosahedron,
}

impl PlatonicSolid {
    pub const ALL: [PlatonicSolid; 4] = [
        PlatonicSolid::Cube,
        PlatonicSolid::Octahedron,
        PlatonicSolid::Dodecahedron,
        PlatonicSolid::Icosahedron,
    ];

    pub fn axis_count(self) -> usize {
        match self {
            PlatonicSolid::Cube => 3,
            PlatonicSolid::Octahedron => 4,
            PlatonicSolid::Dodecahedron => 6,
            PlatonicSolid::Icosahedron => 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceKind {
    OrthogonalTriad,
    /// All `m` axes equally spaced on the cone of half-angle `arccos(1/√3)`.
    ClassOneCone {
        m: usize,
        phase: f64,
    },
    /// One axis along the cone axis, the other `m − 1` equally spaced on a cone.
    ClassTwoCone {
        m: usize,
        phase: f64,
    },
    PlatonicAxes(PlatonicSolid),
}

pub fn build_reference(kind: ReferenceKind) -> Result<SensorConfiguration> {
    match kind {
        ReferenceKind::OrthogonalTriad => platonic_axes(PlatonicSolid::Cube),
        ReferenceKind::ClassOneCone { m, phase } => class_one_cone(m, phase),
        ReferenceKind::ClassTwoCone { m, phase } => class_two_cone(m, phase),
        ReferenceKind::PlatonicAxes(solid) => platonic_axes(solid),
    }
}

fn cone_rows(count: usize, cos_half_angle: f64, phase: f64) -> impl Iterator<Item = Vector3<f64>> {
    let sin_half_angle = (1.0 - cos_half_angle * cos_half_angle).sqrt();
    (0..count).map(move |i| {
        let theta = phase + TAU * i as f64 / count as f64;
        Vector3::new(
            sin_half_angle * theta.cos(),
            sin_half_angle * theta.sin(),
            cos_half_angle,
        )
    })
}

fn check_phase(phase: f64) -> Result<f64> {
    if !phase.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(phase.rem_euclid(TAU))
}

fn from_vectors(rows: impl IntoIterator<Item = Vector3<f64>>) -> Result<SensorConfiguration> {
    let rows: Vec<Vector3<f64>> = rows.into_iter().map(|v| v.normalize()).collect();
    SensorConfiguration::new(MatrixXx3::from_fn(rows.len(), |i, j| rows[i][j]))
}

pub fn class_one_cone(m: usize, phase: f64) -> Result<SensorConfiguration> {
    if m < 3 {
        return Err(Error::InvalidSensorCount {
            kind: "class-I cone",
            m,
        });
    }
    from_vectors(cone_rows(m, 1.0 / 3.0_f64.sqrt(), check_phase(phase)?))
}

/// Cone angle from `cos²φ = (m − 3)/(3m − 3)`, which makes `HᵀH = (m/3) I`.
pub fn class_two_cone(m: usize, phase: f64) -> Result<SensorConfiguration> {
    if m < 4 {
        return Err(Error::InvalidSensorCount {
            kind: "class-II cone",
            m,
        });
    }
    let cos_phi = ((m as f64 - 3.0) / (3.0 * m as f64 - 3.0)).sqrt();
    let axis = std::iter::once(Vector3::z());
    from_vectors(axis.chain(cone_rows(m - 1, cos_phi, check_phase(phase)?)))
}

/// Face normals with antipodal pairs collapsed, from golden-ratio coordinates.
pub fn platonic_axes(solid: PlatonicSolid) -> Result<SensorConfiguration> {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    // Cyclic permutations of (x, y, z).
    let cyclic = |v: Vector3<f64>| [v, Vector3::new(v.y, v.z, v.x), Vector3::new(v.z, v.x, v.y)];
    let cube_diagonals = [
        Vector3::new(1.0, 1.0, 1.0),
        Vector3::new(1.0, 1.0, -1.0),
        Vector3::new(1.0, -1.0, 1.0),
        Vector3::new(-1.0, 1.0, 1.0),
    ];
    let rows: Vec<Vector3<f64>> = match solid {
        PlatonicSolid::Cube => vec![Vector3::x(), Vector3::y(), Vector3::z()],
        PlatonicSolid::Octahedron => cube_diagonals.to_vec(),
        // Dodecahedron faces point at icosahedron vertices (0, ±1, ±φ).
        PlatonicSolid::Dodecahedron => [Vector3::new(0.0, 1.0, phi), Vector3::new(0.0, 1.0, -phi)]
            .into_iter()
            .flat_map(cyclic)
            .collect(),
        // Icosahedron faces point at dodecahedron vertices (±1, ±1, ±1), (0, ±1/φ, ±φ).
        PlatonicSolid::Icosahedron => cube_diagonals
            .into_iter()
            .chain(
                [
                    Vector3::new(0.0, 1.0 / phi, phi),
                    Vector3::new(0.0, 1.0 / phi, -phi),
                ]
                .into_iter()
                .flat_map(cyclic),
            )
            .collect(),
    };
    from_vectors(rows)
}

/// Reference and solver values of one figure of merit on the same noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceComparison {
    pub reference: f64,
    pub solver: f64,
    /// `reference − solver`; positive when the solver found a better design.
    pub gap: f64,
}

/// Evaluates `kind` under `noise` and compares it against a solve with `settings`.
pub fn compare_against_reference(
    noise: &NoiseModel,
    kind: ReferenceKind,
    settings: &SolverSettings,
) -> Result<ReferenceComparison> {
    let reference_config = build_reference(kind)?;
    let fom = settings.criterion.fom();
    let reference = evaluate_fom(&reference_config, noise, fom)?;
    let solver = solve(noise, settings, None)?.objective;
    Ok(ReferenceComparison {
        reference,
        solver,
        gap: reference - solver,
    })
}
