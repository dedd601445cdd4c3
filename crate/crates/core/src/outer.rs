//! Outer majorization-minimization loop over the configuration `H`.
//!
//! A-criterion: `Tr((HᵀR⁻¹H)⁻¹)` is majorized by `Tr(Φ(H; H_t)⁻¹)` where
//! `Φ` linearizes the information matrix at `H_t`. The surrogate is minimized
//! over unit rows through its dual (see [`crate::inner`]); the primal update is
//! `h_i ← S c̃_i / ‖S c̃_i‖` with `S = Q*Q*ᵀ`.
//!
//! D-criterion: the log-determinant is majorized by its tangent, leaving the
//! weighted trace `Tr(W_t (HᵀR⁻¹H)⁻¹)` with `W_t = H_tᵀR⁻¹H_t`. The weight
//! enters the inner problem through `V_t = W_t^{1/2}`.

use log::{debug, info};
use nalgebra::{Matrix3, MatrixXx3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inner::{InnerOutcome, InnerSettings, InnerState};
use crate::model::{evaluate_fom, information3, FomKind, NoiseModel, SensorConfiguration};
use crate::numerics::{min_eigen3, sym_sqrt3};

/// Norms of `S c̃_i` at or below this value have no usable direction.
pub const DIRECTION_FLOOR: f64 = 1e-14;
const INIT_RANK_TOL: f64 = 1e-6;
const INIT_ATTEMPTS: usize = 100;
/// Extra inner solves allowed when a candidate fails to decrease the surrogate.
pub const INNER_EXTENSIONS: usize = 4;

/// Design criterion optimized by the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    /// Minimize `Tr C_e`.
    A,
    /// Minimize `log det C_e`.
    D,
}

impl Criterion {
    pub fn fom(self) -> FomKind {
        match self {
            Criterion::A => FomKind::ATrace,
            Criterion::D => FomKind::DLogDet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub criterion: Criterion,
    /// Relative objective change between outer iterations that counts as converged.
    pub tolerance: f64,
    pub max_iters: usize,
    pub inner: InnerSettings,
    /// Seed for the random initial configuration.
    pub seed: u64,
    pub restarts: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            criterion: Criterion::A,
            tolerance: 1e-12,
            max_iters: 1000,
            inner: InnerSettings::default(),
            seed: 0,
            restarts: 1,
        }
    }
}

impl SolverSettings {
    pub fn new(criterion: Criterion) -> Self {
        Self {
            criterion,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidSettings(what.to_owned()));
        if !(self.tolerance > 0.0) {
            return bad("outer tolerance must be positive");
        }
        if !(self.inner.tolerance > 0.0) {
            return bad("inner tolerance must be positive");
        }
        if self.max_iters == 0 || self.inner.max_sweeps == 0 {
            return bad("iteration caps must be at least 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub inner_sweeps: usize,
    pub optimality_defect: f64,
}

/// Per-iteration history of an outer solve, starting with the initial point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.objective)
    }

    /// Largest increase of the objective between consecutive records.
    pub fn max_increase(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[1].objective - w[0].objective)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub config: SensorConfiguration,
    pub criterion: Criterion,
    /// Requested figure of merit at `config`.
    pub objective: f64,
    pub trace: ConvergenceTrace,
    pub converged: bool,
    pub outer_iters: usize,
    /// Seed of the initial configuration, `None` when one was supplied.
    pub seed: Option<u64>,
}

/// `m` independent uniformly distributed unit axes, redrawn until `HᵀH` is well conditioned.
pub fn random_configuration(m: usize, seed: u64) -> Result<SensorConfiguration> {
    if m < 3 {
        return Err(Error::TooFewSensors(m));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..INIT_ATTEMPTS {
        let mut axes = MatrixXx3::zeros(m);
        for i in 0..m {
            let v = loop {
                let v = Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng));
                let n: f64 = v.norm();
                if n > 1e-12 {
                    break v / n;
                }
            };
            axes.set_row(i, &v.transpose());
        }
        if min_eigen3(&(axes.transpose() * &axes)) >= INIT_RANK_TOL {
            return SensorConfiguration::new(axes);
        }
    }
    Err(Error::DegenerateInit {
        attempts: INIT_ATTEMPTS,
    })
}

/// Primal recovery `h_i = S c̃_i / ‖S c̃_i‖` from the inner state's current factor.
pub fn update_configuration(state: &InnerState, iteration: usize) -> Result<SensorConfiguration> {
    let s = state.s();
    let c = state.weighted_axes();
    let mut axes = MatrixXx3::zeros(c.nrows());
    for (i, row) in c.row_iter().enumerate() {
        let dir = s * row.transpose();
        let norm = dir.norm();
        if !(norm > DIRECTION_FLOOR) {
            return Err(Error::DegenerateDirection { iteration, row: i });
        }
        axes.set_row(i, &(dir / norm).transpose());
    }
    SensorConfiguration::new(axes)
}

/// `Tr(W Φ(H; H_t)⁻¹)` with `Φ(H; H_t) = HᵀR⁻¹H_t + H_tᵀR⁻¹H − H_tᵀR⁻¹H_t`.
pub fn surrogate_value(
    config: &SensorConfiguration,
    anchor: &SensorConfiguration,
    noise: &NoiseModel,
    weight: &Matrix3<f64>,
) -> Result<f64> {
    if config.m() != anchor.m() {
        return Err(Error::DimensionMismatch {
            expected: anchor.m(),
            found: config.m(),
        });
    }
    let a_t = information3(anchor, noise)?;
    let cross = config.axes().transpose() * noise.weighted_axes(anchor.axes());
    let phi = cross + cross.transpose() - a_t;
    let phi = (phi + phi.transpose()) * 0.5;
    let min_eigenvalue = min_eigen3(&phi);
    if !(min_eigenvalue > 0.0) {
        return Err(Error::SurrogateIndefinite { min_eigenvalue });
    }
    let inv = phi
        .cholesky()
        .ok_or(Error::SurrogateIndefinite { min_eigenvalue })?
        .inverse();
    Ok((weight * inv).trace())
}

/// What one outer iteration did.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub iteration: usize,
    pub previous: SensorConfiguration,
    pub previous_objective: f64,
    /// Objective after the step; equals `previous_objective` when rejected.
    pub objective: f64,
    /// Objective of the candidate recovered from the inner solve.
    pub candidate_objective: f64,
    /// Whether the candidate decreased the surrogate and replaced `H_t`.
    pub accepted: bool,
    /// Trace weight `W_t` used by the step (`I` for the A-criterion).
    pub weight: Matrix3<f64>,
    pub inner: InnerOutcome,
}

/// Stepwise driver for the outer loop; [`MmSolver::run`] iterates it to convergence.
#[derive(Debug, Clone)]
pub struct MmSolver {
    noise: NoiseModel,
    settings: SolverSettings,
    config: SensorConfiguration,
    objective: f64,
    warm_start: Option<Matrix3<f64>>,
    iteration: usize,
    trace: ConvergenceTrace,
    seed: Option<u64>,
}

impl MmSolver {
    /// Starts from `initial`, or from [`random_configuration`] with `settings.seed`.
    pub fn new(
        noise: NoiseModel,
        settings: SolverSettings,
        initial: Option<SensorConfiguration>,
    ) -> Result<Self> {
        settings.validate()?;
        let (config, seed) = match initial {
            Some(h) => {
                if h.m() != noise.m() {
                    return Err(Error::DimensionMismatch {
                        expected: noise.m(),
                        found: h.m(),
                    });
                }
                (h, None)
            }
            None => (
                random_configuration(noise.m(), settings.seed)?,
                Some(settings.seed),
            ),
        };
        let objective = evaluate_fom(&config, &noise, settings.criterion.fom())?;
        let mut trace = ConvergenceTrace::default();
        trace.push(TraceRecord {
            iteration: 0,
            objective,
            inner_sweeps: 0,
            optimality_defect: config.optimality_defect(),
        });
        Ok(Self {
            noise,
            settings,
            config,
            objective,
            warm_start: None,
            iteration: 0,
            trace,
            seed,
        })
    }

    pub fn config(&self) -> &SensorConfiguration {
        &self.config
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn trace(&self) -> &ConvergenceTrace {
        &self.trace
    }

    fn weight(&self) -> Result<Matrix3<f64>> {
        Ok(match self.settings.criterion {
            Criterion::A => Matrix3::identity(),
            Criterion::D => information3(&self.config, &self.noise)?,
        })
    }

    /// Inner starting point with the lowest `γ` among the previous dual optimum,
    /// the multiplier `−A_t⁻¹V_t` that is exact when `H_t` already minimizes the
    /// surrogate, and `I`.
    fn dual_start(&self, state: &InnerState, root: &Matrix3<f64>) -> Matrix3<f64> {
        let mut candidates = vec![Matrix3::identity()];
        if let Some(inv) = state.information().try_inverse() {
            candidates.push(-(inv * root));
        }
        candidates.extend(self.warm_start);
        candidates
            .into_iter()
            .filter(|q| q.iter().all(|v| v.is_finite()))
            .map(|q| (state.objective_at(&q), q))
            .filter(|(gamma, _)| gamma.is_finite())
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map_or_else(Matrix3::identity, |(_, q)| q)
    }

    /// One majorize/minimize cycle on `H`.
    ///
    /// The candidate is accepted only if it does not increase the surrogate
    /// above its value at `H_t`, or at least does not increase the objective.
    /// Otherwise the inner solve continues for up to
    /// [`INNER_EXTENSIONS`] more rounds; if the surrogate still does not
    /// decrease, `H_t` is kept and the report has `accepted == false`.
    pub fn step(&mut self) -> Result<StepReport> {
        let weight = self.weight()?;
        let root = match self.settings.criterion {
            Criterion::A => Matrix3::identity(),
            Criterion::D => sym_sqrt3(&weight)?,
        };
        let mut state = InnerState::new(&self.config, &self.noise, &root, None)?;
        let q0 = self.dual_start(&state, &root);
        state.set_q(q0);
        let bound = surrogate_value(&self.config, &self.config, &self.noise, &weight)?;
        let iteration = self.iteration + 1;

        let mut inner = state.solve(&self.settings.inner)?;
        let mut candidate = update_configuration(&state, iteration)?;
        let mut extensions = 0;
        let mut accepted = self.descends(&candidate, &weight, bound);
        while !accepted && extensions < INNER_EXTENSIONS {
            extensions += 1;
            let more = state.solve(&self.settings.inner)?;
            inner.absorb(more);
            candidate = update_configuration(&state, iteration)?;
            accepted = self.descends(&candidate, &weight, bound);
        }
        if !inner.converged {
            debug!("inner solve hit the sweep cap at outer iteration {iteration}");
        }
        let candidate_objective =
            evaluate_fom(&candidate, &self.noise, self.settings.criterion.fom())?;
        let previous_objective = self.objective;
        if !accepted {
            debug!(
                "outer iteration {iteration}: surrogate did not decrease after {} inner sweeps, keeping H_t",
                inner.sweeps
            );
            return Ok(StepReport {
                iteration: self.iteration,
                previous: self.config.clone(),
                previous_objective,
                objective: previous_objective,
                candidate_objective,
                accepted,
                weight,
                inner,
            });
        }

        self.iteration = iteration;
        self.warm_start = Some(*state.q());
        let previous = std::mem::replace(&mut self.config, candidate);
        self.objective = candidate_objective;
        self.trace.push(TraceRecord {
            iteration,
            objective: candidate_objective,
            inner_sweeps: inner.sweeps,
            optimality_defect: self.config.optimality_defect(),
        });
        Ok(StepReport {
            iteration,
            previous,
            previous_objective,
            objective: candidate_objective,
            candidate_objective,
            accepted,
            weight,
            inner,
        })
    }

    /// Surrogate decrease, or failing that a direct decrease of the objective.
    fn descends(&self, candidate: &SensorConfiguration, weight: &Matrix3<f64>, bound: f64) -> bool {
        surrogate_value(candidate, &self.config, &self.noise, weight).is_ok_and(|g| g <= bound)
            || evaluate_fom(candidate, &self.noise, self.settings.criterion.fom())
                .is_ok_and(|f| f <= self.objective)
    }

    /// Steps until the relative objective change falls below the tolerance or the cap is hit.
    pub fn run(mut self) -> Result<Solution> {
        let mut converged = false;
        while self.iteration < self.settings.max_iters {
            let report = self.step()?;
            let scale = self.settings.tolerance * report.previous_objective.abs().max(1.0);
            if !report.accepted {
                // Stalled: converged only if the rejected move was below resolution anyway.
                converged = (report.candidate_objective - report.previous_objective).abs() <= scale;
                break;
            }
            debug!(
                "outer {}: objective {:.12e} (inner sweeps {})",
                report.iteration, report.objective, report.inner.sweeps
            );
            if (report.previous_objective - report.objective).abs() <= scale {
                converged = true;
                break;
            }
        }
        info!(
            "{:?}-optimal solve finished after {} iterations: objective {:.12e}, converged {}",
            self.settings.criterion, self.iteration, self.objective, converged
        );
        Ok(Solution {
            config: self.config,
            criterion: self.settings.criterion,
            objective: self.objective,
            trace: self.trace,
            converged,
            outer_iters: self.iteration,
            seed: self.seed,
        })
    }
}

/// Solves for the requested criterion from `initial` or a seeded random start.
pub fn solve(
    noise: &NoiseModel,
    settings: &SolverSettings,
    initial: Option<SensorConfiguration>,
) -> Result<Solution> {
    MmSolver::new(noise.clone(), *settings, initial)?.run()
}

pub fn solve_a_optimal(
    noise: &NoiseModel,
    settings: &SolverSettings,
    initial: Option<SensorConfiguration>,
) -> Result<Solution> {
    solve(
        noise,
        &SolverSettings {
            criterion: Criterion::A,
            ..*settings
        },
        initial,
    )
}

pub fn solve_d_optimal(
    noise: &NoiseModel,
    settings: &SolverSettings,
    initial: Option<SensorConfiguration>,
) -> Result<Solution> {
    solve(
        noise,
        &SolverSettings {
            criterion: Criterion::D,
            ..*settings
        },
        initial,
    )
}

/// Best of several seeded solves.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiStart {
    pub best: Solution,
    /// `(seed, final objective)` for every restart, in seed order.
    pub objectives: Vec<(u64, f64)>,
    /// `max − min` of the final objectives.
    pub spread: f64,
}

/// Runs `settings.restarts` solves with seeds `seed, seed + 1, …` in parallel.
pub fn multi_start(noise: &NoiseModel, settings: &SolverSettings) -> Result<MultiStart> {
    settings.validate()?;
    let seeds: Vec<u64> = (0..settings.restarts as u64)
        .map(|k| settings.seed.wrapping_add(k))
        .collect();
    let solutions = seeds
        .par_iter()
        .map(|&seed| solve(noise, &SolverSettings { seed, ..*settings }, None))
        .collect::<Result<Vec<_>>>()?;
    let objectives: Vec<(u64, f64)> = seeds
        .iter()
        .zip(&solutions)
        .map(|(&s, sol)| (s, sol.objective))
        .collect();
    let (lo, hi) = objectives
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| {
            (lo.min(v), hi.max(v))
        });
    let best = solutions
        .into_iter()
        .zip(seeds)
        .min_by(|(a, sa), (b, sb)| a.objective.total_cmp(&b.objective).then(sa.cmp(sb)))
        .map(|(sol, _)| sol)
        .expect("at least one restart");
    Ok(MultiStart {
        best,
        objectives,
        spread: hi - lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{random_orthogonal, random_spd};
    use approx::assert_relative_eq;

    #[test]
    fn random_configuration_is_deterministic_and_full_rank() {
        let a = random_configuration(5, 42).unwrap();
        let b = random_configuration(5, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_configuration(5, 43).unwrap());
        for seed in 0..50 {
            let h = random_configuration(3, seed).unwrap();
            assert!(min_eigen3(&h.gram()) >= INIT_RANK_TOL);
        }
        assert!(matches!(
            random_configuration(2, 0),
            Err(Error::TooFewSensors(2))
        ));
    }

    #[test]
    fn random_rows_are_unit() {
        let mut worst: f64 = 0.0;
        for seed in 0..1000 {
            let h = random_configuration(4, seed).unwrap();
            for i in 0..4 {
                worst = worst.max((h.axis(i).norm() - 1.0).abs());
            }
        }
        assert!(worst <= 1e-12);
    }

    #[test]
    fn identity_factor_normalizes_weighted_axes() {
        let h = random_configuration(5, 1).unwrap();
        let noise = NoiseModel::new(random_spd(5, 2)).unwrap();
        let state = InnerState::new(&h, &noise, &Matrix3::identity(), None).unwrap();
        let next = update_configuration(&state, 1).unwrap();
        for (i, row) in state.weighted_axes().row_iter().enumerate() {
            let expected = row.transpose().normalize();
            assert_relative_eq!(next.axis(i), expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn null_space_hit_is_degenerate() {
        // S = diag(1, 1, 0) with c̃_1 = e₃.
        let h =
            SensorConfiguration::from_rows(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
                .unwrap();
        let noise = NoiseModel::isotropic(3, 1.0).unwrap();
        let q = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0));
        let state = InnerState::new(&h, &noise, &Matrix3::identity(), Some(q)).unwrap();
        assert!(matches!(
            update_configuration(&state, 7),
            Err(Error::DegenerateDirection {
                iteration: 7,
                row: 0
            })
        ));
    }

    #[test]
    fn optimum_is_a_fixed_point() {
        let noise = NoiseModel::isotropic(3, 1.0).unwrap();
        for seed in 0..5 {
            let o = random_orthogonal(seed);
            let h = SensorConfiguration::new(MatrixXx3::from_fn(3, |i, j| o[(i, j)])).unwrap();
            let mut state = InnerState::new(&h, &noise, &Matrix3::identity(), None).unwrap();
            state.solve(&InnerSettings::default()).unwrap();
            let next = update_configuration(&state, 0).unwrap();
            assert!((next.axes() - h.axes()).amax() <= 1e-8);
        }
    }

    #[test]
    fn surrogate_touches_at_anchor() {
        let h = random_configuration(6, 9).unwrap();
        let noise = NoiseModel::new(random_spd(6, 10)).unwrap();
        let g = surrogate_value(&h, &h, &noise, &Matrix3::identity()).unwrap();
        let f = evaluate_fom(&h, &noise, FomKind::ATrace).unwrap();
        assert_relative_eq!(g, f, max_relative = 1e-12);

        let triad =
            SensorConfiguration::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
                .unwrap();
        let g = surrogate_value(
            &triad,
            &triad,
            &NoiseModel::isotropic(3, 1.0).unwrap(),
            &Matrix3::identity(),
        )
        .unwrap();
        assert_relative_eq!(g, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn surrogate_majorizes_nearby() {
        let anchor = random_configuration(6, 11).unwrap();
        let noise = NoiseModel::new(random_spd(6, 12)).unwrap();
        let mut checked = 0;
        for k in 0..100 {
            let c = random_orthogonal(1000 + k);
            // Small rotation-like perturbation of every axis.
            let mix = Matrix3::identity() * 0.9 + c * 0.1;
            let mut axes = anchor.axes() * mix.transpose();
            for i in 0..axes.nrows() {
                let n = axes.row(i).norm();
                axes.row_mut(i).unscale_mut(n);
            }
            let probe = SensorConfiguration::new(axes).unwrap();
            match surrogate_value(&probe, &anchor, &noise, &Matrix3::identity()) {
                Ok(g) => {
                    let f = evaluate_fom(&probe, &noise, FomKind::ATrace).unwrap();
                    assert!(g >= f - 1e-10 * f, "surrogate {g} below objective {f}");
                    checked += 1;
                }
                Err(Error::SurrogateIndefinite { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn surrogate_rejects_indefinite_linearization() {
        let anchor =
            SensorConfiguration::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
                .unwrap();
        let flipped =
            SensorConfiguration::from_rows(&[[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
                .unwrap();
        let noise = NoiseModel::isotropic(3, 1.0).unwrap();
        assert!(matches!(
            surrogate_value(&flipped, &anchor, &noise, &Matrix3::identity()),
            Err(Error::SurrogateIndefinite { .. })
        ));
    }

    #[test]
    fn settings_validation() {
        let mut s = SolverSettings::default();
        assert!(s.validate().is_ok());
        s.restarts = 0;
        assert!(s.validate().is_err());
        let s = SolverSettings {
            tolerance: 0.0,
            ..SolverSettings::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn restarts_one_matches_single_solve() {
        let noise = NoiseModel::new(random_spd(5, 3)).unwrap();
        let settings = SolverSettings {
            seed: 17,
            ..SolverSettings::new(Criterion::D)
        };
        let single = solve(&noise, &settings, None).unwrap();
        let multi = multi_start(&noise, &settings).unwrap();
        assert_eq!(multi.best, single);
        assert_eq!(multi.spread, 0.0);
    }

    #[test]
    fn solves_are_deterministic() {
        let noise = NoiseModel::new(random_spd(6, 8)).unwrap();
        let settings = SolverSettings {
            seed: 5,
            ..SolverSettings::default()
        };
        assert_eq!(
            solve(&noise, &settings, None).unwrap(),
            solve(&noise, &settings, None).unwrap()
        );
    }

    #[test]
    fn closed_form_anchors() {
        let a3 = solve_a_optimal(
            &NoiseModel::isotropic(3, 3.0).unwrap(),
            &SolverSettings::default(),
            None,
        )
        .unwrap();
        assert_relative_eq!(a3.objective, 9.0, max_relative = 1e-9);
        assert!(a3.config.optimality_defect() <= 1e-5);
        let a4 = solve_a_optimal(
            &NoiseModel::isotropic(4, 3.0).unwrap(),
            &SolverSettings::default(),
            None,
        )
        .unwrap();
        assert_relative_eq!(a4.objective, 6.75, max_relative = 1e-9);
        assert!(a4.config.optimality_defect() <= 1e-4);

        let d3 = solve_d_optimal(
            &NoiseModel::isotropic(3, 3.0).unwrap(),
            &SolverSettings::default(),
            None,
        )
        .unwrap();
        assert!((d3.objective - 3.0 * 3.0f64.ln()).abs() <= 1e-8);
        let d4 = solve_d_optimal(
            &NoiseModel::isotropic(4, 3.0).unwrap(),
            &SolverSettings::default(),
            None,
        )
        .unwrap();
        assert!((d4.objective - 3.0 * 2.25f64.ln()).abs() <= 1e-8);
        assert!(d4.config.optimality_defect() <= 1e-4);
        for sol in [&a3, &a4, &d3, &d4] {
            assert!(sol.converged);
            assert!(sol.trace.max_increase() <= 1e-12);
        }
    }

    #[test]
    fn correlated_noise_runs_converge_monotonically() {
        for criterion in [Criterion::A, Criterion::D] {
            for seed in 0..4 {
                let noise = NoiseModel::new(random_spd(5, 100 + seed)).unwrap();
                let sol = solve(
                    &noise,
                    &SolverSettings {
                        seed,
                        ..SolverSettings::new(criterion)
                    },
                    None,
                )
                .unwrap();
                assert!(sol.converged, "{criterion:?} seed {seed}");
                assert!(sol.trace.max_increase() <= 1e-12);
                let direct = evaluate_fom(&sol.config, &noise, criterion.fom()).unwrap();
                assert!((sol.objective - direct).abs() <= 1e-12 * direct.abs().max(1.0));
            }
        }
    }

    #[test]
    fn rejected_steps_keep_the_configuration() {
        // Nearly rank-one noise on three sensors makes the inner solve slow enough
        // that some candidates fail to decrease the surrogate.
        let v = nalgebra::DVector::from_column_slice(&[0.8, -0.5, 0.3]);
        let r = &v * v.transpose() * 50.0 + nalgebra::DMatrix::identity(3, 3) * 0.02;
        let noise = NoiseModel::new(r).unwrap();
        for criterion in [Criterion::A, Criterion::D] {
            let settings = SolverSettings {
                max_iters: 40,
                ..SolverSettings::new(criterion)
            };
            let mut solver = MmSolver::new(noise.clone(), settings, None).unwrap();
            let mut rejected = false;
            for _ in 0..40 {
                let before = solver.config().clone();
                let report = solver.step().unwrap();
                assert!(report.objective <= report.previous_objective);
                if !report.accepted {
                    assert_eq!(solver.config(), &before);
                    assert_eq!(report.objective, report.previous_objective);
                    rejected = true;
                    break;
                }
            }
            assert!(rejected, "{criterion:?}");
            assert!(solver.trace().max_increase() <= 0.0);
        }
    }

    #[test]
    fn absorbed_inner_outcomes_concatenate() {
        let mut a = InnerOutcome {
            sweeps: 2,
            converged: false,
            objective_trace: vec![3.0, 2.0, 1.0],
        };
        a.absorb(InnerOutcome {
            sweeps: 1,
            converged: true,
            objective_trace: vec![1.0, 0.5],
        });
        assert_eq!(
            a,
            InnerOutcome {
                sweeps: 3,
                converged: true,
                objective_trace: vec![3.0, 2.0, 1.0, 0.5]
            }
        );
    }

    #[test]
    fn multi_start_spreads() {
        let noise = NoiseModel::isotropic(4, 3.0).unwrap();
        let settings = SolverSettings {
            restarts: 10,
            ..SolverSettings::new(Criterion::D)
        };
        let multi = multi_start(&noise, &settings).unwrap();
        assert!(multi.spread <= 1e-4);
        assert_eq!(multi.objectives.len(), 10);
        assert!(multi
            .objectives
            .iter()
            .all(|&(_, f)| f >= multi.best.objective));

        let noise = NoiseModel::diagonal(&[0.5, 1.0, 2.0, 0.7, 3.0, 1.5]).unwrap();
        let settings = SolverSettings {
            restarts: 10,
            seed: 3,
            ..SolverSettings::new(Criterion::A)
        };
        let multi = multi_start(&noise, &settings).unwrap();
        assert!(multi.spread <= 1e-3 * multi.best.objective.abs());
    }
}
