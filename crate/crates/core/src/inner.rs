//! Inner solver over the dual factor `Q`.
//!
//! For a fixed outer iterate `H_t` the surrogate problem is solved through its
//! Lagrange dual, which reduces to the unconstrained minimization of
//!
//! ```text
//! γ(Q) = 2 Σ_i ‖Q Qᵀ c̃_i‖ + 2 Tr(Qᵀ V) − Tr(Qᵀ A Q)
//! ```
//!
//! with `c̃_i` the rows of `C = R⁻¹ H_t`, `A = H_tᵀ R⁻¹ H_t` and `V` the square
//! root of the trace weight (`I` for the A-criterion). `γ` is itself minimized
//! by majorization: the square roots are replaced by their tangent upper
//! bounds and the concave quadratic by its linearization, giving the quartic
//! matrix polynomial `Tr(F QQᵀQQᵀ) + 2 Tr(Q P)` which is then decreased by one
//! cyclic coordinate-descent sweep.

use nalgebra::{DVector, Matrix3, MatrixXx3};

use crate::error::{Error, Result};
use crate::model::{information3, NoiseModel, SensorConfiguration};
use crate::quartic::{minimize_quartic, QuarticPoly};

/// Norms of `QQᵀc̃_i` below this value are treated as this value in the weights.
pub const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSettings {
    /// Relative change of `γ` between sweeps that counts as converged.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for InnerSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_sweeps: 500,
        }
    }
}

/// Result of [`InnerState::solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct InnerOutcome {
    pub sweeps: usize,
    pub converged: bool,
    /// `γ` before the first sweep followed by its value after every sweep.
    pub objective_trace: Vec<f64>,
}

impl InnerOutcome {
    pub fn objective(&self) -> f64 {
        *self
            .objective_trace
            .last()
            .expect("trace holds the starting value")
    }

    /// Appends a continuation solve started from where this one stopped.
    pub fn absorb(&mut self, more: InnerOutcome) {
        self.sweeps += more.sweeps;
        self.converged = more.converged;
        self.objective_trace
            .extend(more.objective_trace.into_iter().skip(1));
    }
}

#[derive(Debug, Clone)]
pub struct InnerState {
    /// `C_t = R⁻¹ H_t`.
    weighted_axes: MatrixXx3<f64>,
    /// `A_t = H_tᵀ R⁻¹ H_t`.
    information: Matrix3<f64>,
    weight: Matrix3<f64>,
    q: Matrix3<f64>,
    /// Majorization point and the norms `‖Q_τ Q_τᵀ c̃_i‖` there.
    anchor: Matrix3<f64>,
    anchor_norms: DVector<f64>,
    u: DVector<f64>,
    f: Matrix3<f64>,
    p: Matrix3<f64>,
}

impl InnerState {
    /// Builds the state for outer iterate `config` with linear weight `weight`
    /// (symmetric PSD) and starting factor `q0` (identity when omitted).
    pub fn new(
        config: &SensorConfiguration,
        noise: &NoiseModel,
        weight: &Matrix3<f64>,
        q0: Option<Matrix3<f64>>,
    ) -> Result<Self> {
        let information = information3(config, noise)?;
        let weighted_axes = noise.weighted_axes(config.axes());
        let m = config.m();
        let mut state = Self {
            weighted_axes,
            information,
            weight: (weight + weight.transpose()) * 0.5,
            q: q0.unwrap_or_else(Matrix3::identity),
            anchor: Matrix3::zeros(),
            anchor_norms: DVector::zeros(m),
            u: DVector::zeros(m),
            f: Matrix3::zeros(),
            p: Matrix3::zeros(),
        };
        state.refresh();
        Ok(state)
    }

    pub fn q(&self) -> &Matrix3<f64> {
        &self.q
    }

    pub fn set_q(&mut self, q: Matrix3<f64>) {
        self.q = q;
    }

    pub fn weighted_axes(&self) -> &MatrixXx3<f64> {
        &self.weighted_axes
    }

    pub fn information(&self) -> &Matrix3<f64> {
        &self.information
    }

    pub fn weight(&self) -> &Matrix3<f64> {
        &self.weight
    }

    /// Diagonal of `U`.
    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn f(&self) -> &Matrix3<f64> {
        &self.f
    }

    pub fn p(&self) -> &Matrix3<f64> {
        &self.p
    }

    /// `S = QQᵀ`.
    pub fn s(&self) -> Matrix3<f64> {
        self.q * self.q.transpose()
    }

    /// Re-anchors the majorizer at the current `Q`: recomputes `U`, `F` and `P`.
    pub fn refresh(&mut self) {
        let s = self.s();
        let mut f = Matrix3::zeros();
        for (i, row) in self.weighted_axes.row_iter().enumerate() {
            let c = row.transpose();
            let norm = (s * c).norm();
            let u = 1.0 / norm.max(WEIGHT_FLOOR);
            self.anchor_norms[i] = norm;
            self.u[i] = u;
            f += c * c.transpose() * u;
        }
        self.f = (f + f.transpose()) * 0.5;
        self.p = self.weight - self.q.transpose() * self.information;
        self.anchor = self.q;
    }

    fn linear_part(&self, q: &Matrix3<f64>) -> f64 {
        2.0 * (q.transpose() * self.weight).trace() - (q.transpose() * self.information * q).trace()
    }

    /// `γ` at an arbitrary factor `q`.
    pub fn objective_at(&self, q: &Matrix3<f64>) -> f64 {
        let s = q * q.transpose();
        let roots: f64 = self
            .weighted_axes
            .row_iter()
            .map(|row| (s * row.transpose()).norm())
            .sum();
        2.0 * roots + self.linear_part(q)
    }

    /// `γ(Q)` at the current factor.
    pub fn objective(&self) -> f64 {
        self.objective_at(&self.q)
    }

    /// Quartic majorizer `Tr(F QQᵀQQᵀ) + 2 Tr(Q P)` with the current `F` and `P`.
    pub fn majorizer_objective(&self, q: &Matrix3<f64>) -> f64 {
        let s = q * q.transpose();
        (self.f * s * s).trace() + 2.0 * (q * self.p).trace()
    }

    /// Upper bound `g_γ(Q | Q_τ)` of `γ` built at the last refresh point `Q_τ`.
    ///
    /// Differs from [`Self::majorizer_objective`] only by a constant.
    pub fn surrogate_at(&self, q: &Matrix3<f64>) -> f64 {
        let s = q * q.transpose();
        let tangent: f64 = self
            .weighted_axes
            .row_iter()
            .enumerate()
            .map(|(i, row)| {
                let beta = (s * row.transpose()).norm_squared();
                let s0 = self.anchor_norms[i];
                2.0 * s0 + self.u[i] * (beta - s0 * s0)
            })
            .sum();
        tangent + self.linear_part(&self.anchor) + 2.0 * (self.p * (q - self.anchor)).trace()
    }

    /// Coefficients of the majorizer restricted to entry `(i, j)` of `Q`, zero based.
    pub fn quartic_coefficients(&self, i: usize, j: usize) -> Result<QuarticPoly> {
        if i > 2 || j > 2 {
            return Err(Error::IndexOutOfRange { row: i, col: j });
        }
        let mut rest = self.q;
        rest[(i, j)] = 0.0;
        let mut e_ij = Matrix3::zeros();
        e_ij[(i, j)] = 1.0;
        let e_ji = e_ij.transpose();
        let k = e_ij * e_ji;
        let l = rest * e_ji + e_ij * rest.transpose();
        let m = rest * rest.transpose();
        let f = &self.f;
        Ok(QuarticPoly {
            a: (f * k).trace(),
            b: (f * (k * l + l * k)).trace(),
            c: (f * (m * k + l * l + k * m)).trace(),
            d: (f * (m * l + l * m)).trace() + 2.0 * (e_ij * self.p).trace(),
            e: (f * m * m).trace() + 2.0 * (rest * self.p).trace(),
        })
    }

    /// Replaces `q_ij` by the global minimizer of the majorizer along that coordinate.
    pub fn update_coordinate(&mut self, i: usize, j: usize) -> Result<()> {
        let poly = self.quartic_coefficients(i, j)?;
        self.q[(i, j)] = minimize_quartic(&poly)?.q;
        Ok(())
    }

    /// One row-major pass over all nine coordinates, majorizer held fixed.
    pub fn sweep(&mut self) -> Result<()> {
        for i in 0..3 {
            for j in 0..3 {
                self.update_coordinate(i, j)?;
            }
        }
        Ok(())
    }

    /// Alternates refresh and sweep until `γ` stalls or the sweep cap is hit.
    pub fn solve(&mut self, settings: &InnerSettings) -> Result<InnerOutcome> {
        let mut gamma = self.objective();
        let mut trace = Vec::with_capacity(16);
        trace.push(gamma);
        let mut converged = false;
        let mut sweeps = 0;
        while sweeps < settings.max_sweeps {
            self.refresh();
            self.sweep()?;
            sweeps += 1;
            let next = self.objective();
            if !next.is_finite() {
                return Err(Error::NonFinite);
            }
            trace.push(next);
            let change = (gamma - next).abs();
            gamma = next;
            if change <= settings.tolerance * gamma.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        Ok(InnerOutcome {
            sweeps,
            converged,
            objective_trace: trace,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{random_matrix3, random_orthogonal, random_spd, random_unit_rows};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn identity_state(q0: Option<Matrix3<f64>>) -> InnerState {
        let h =
            SensorConfiguration::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
                .unwrap();
        InnerState::new(
            &h,
            &NoiseModel::isotropic(3, 1.0).unwrap(),
            &Matrix3::identity(),
            q0,
        )
        .unwrap()
    }

    fn random_state(m: usize, seed: u64) -> InnerState {
        let h = random_unit_rows(m, seed);
        let noise = NoiseModel::new(random_spd(m, seed ^ 0x77)).unwrap();
        let v = random_matrix3(seed ^ 0x99);
        let v = v * v.transpose();
        InnerState::new(&h, &noise, &v, Some(random_matrix3(seed ^ 0x55))).unwrap()
    }

    /// Term-by-term `γ` without matrix shortcuts.
    fn naive_gamma(state: &InnerState, q: &Matrix3<f64>) -> f64 {
        let mut total = 0.0;
        for row in state.weighted_axes().row_iter() {
            let mut v = [0.0; 3];
            for a in 0..3 {
                for b in 0..3 {
                    for k in 0..3 {
                        v[a] += q[(a, k)] * q[(b, k)] * row[b];
                    }
                }
            }
            total += 2.0 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        }
        for a in 0..3 {
            for b in 0..3 {
                total += 2.0 * q[(b, a)] * state.weight()[(b, a)];
                for c in 0..3 {
                    total -= q[(b, a)] * state.information()[(b, c)] * q[(c, a)];
                }
            }
        }
        total
    }

    #[test]
    fn identity_instance_initial_state() {
        let st = identity_state(Some(Matrix3::identity()));
        assert_relative_eq!(*st.weighted_axes(), MatrixXx3::<f64>::identity(3));
        assert_relative_eq!(*st.information(), Matrix3::identity());
        assert_relative_eq!(*st.u(), DVector::from_element(3, 1.0));
        assert_relative_eq!(*st.f(), Matrix3::identity());
        assert_relative_eq!(*st.p(), Matrix3::zeros());
        assert_relative_eq!(st.objective(), 9.0, epsilon = 1e-14);
    }

    #[test]
    fn default_start_is_identity() {
        assert_eq!(*identity_state(None).q(), Matrix3::identity());
    }

    #[test]
    fn zero_start_uses_weight_floor() {
        let st = identity_state(Some(Matrix3::zeros()));
        assert!(st.u().iter().all(|&u| u == 1.0 / WEIGHT_FLOOR));
        assert!(st.f().iter().all(|v| v.is_finite()));
        assert_eq!(st.objective(), 0.0);
    }

    #[test]
    fn coefficients_for_zero_factor() {
        let mut st = identity_state(Some(Matrix3::zeros()));
        // F = I and P = 0 in place of the floored weights.
        st.f = Matrix3::identity();
        st.p = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(
                    st.quartic_coefficients(i, j).unwrap(),
                    QuarticPoly::new(1.0, 0.0, 0.0, 0.0, 0.0)
                );
            }
        }
        assert!(matches!(
            st.quartic_coefficients(3, 0),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn first_sweep_decreases_identity_instance() {
        let mut st = identity_state(None);
        let before = st.objective();
        st.sweep().unwrap();
        assert!(st.objective() < before);
    }

    #[test]
    fn fixed_point_is_kept() {
        // At Q = −I the majorizer is Tr((QQᵀ)²) + 4 Tr(Q): diagonal entries solve
        // 4q³ + 4 = 0 and off-diagonal ones are even quartics with a minimum at 0.
        let mut st = identity_state(Some(-Matrix3::identity()));
        st.sweep().unwrap();
        assert!((st.q() + Matrix3::identity()).amax() <= 1e-12);

        // The same holds for any orthonormal triad.
        let o = random_orthogonal(4);
        let h = SensorConfiguration::new(MatrixXx3::from_fn(3, |i, j| o[(i, j)])).unwrap();
        let noise = NoiseModel::isotropic(3, 1.0).unwrap();
        let mut st =
            InnerState::new(&h, &noise, &Matrix3::identity(), Some(-Matrix3::identity())).unwrap();
        st.sweep().unwrap();
        assert!((st.q() + Matrix3::identity()).amax() <= 1e-12);
    }

    #[test]
    fn infinite_tolerance_runs_one_cycle() {
        let mut st = random_state(4, 8);
        let out = st
            .solve(&InnerSettings {
                tolerance: f64::INFINITY,
                max_sweeps: 500,
            })
            .unwrap();
        assert_eq!(out.sweeps, 1);
        assert!(out.converged);
    }

    #[test]
    fn identity_instance_solves_consistently_from_random_starts() {
        let values: Vec<f64> = (0..5)
            .map(|k| {
                let mut st = identity_state(Some(random_matrix3(100 + k)));
                st.solve(&InnerSettings::default()).unwrap().objective()
            })
            .collect();
        for v in &values {
            assert!((v - values[0]).abs() <= 1e-6, "{values:?}");
        }
        // Dual optimum equals minus the primal optimum Tr(I) = 3.
        assert!((values[0] + 3.0).abs() <= 1e-6);
    }

    #[test]
    fn five_sensor_trace_is_monotone() {
        let mut st = random_state(5, 21);
        let out = st.solve(&InnerSettings::default()).unwrap();
        for w in out.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    proptest! {
        #[test]
        fn objective_matches_naive_sum(m in 3usize..9, seed in any::<u64>()) {
            let st = random_state(m, seed);
            let q = random_matrix3(seed ^ 1);
            let a = st.objective_at(&q);
            let b = naive_gamma(&st, &q);
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }

        #[test]
        fn coefficients_reproduce_direct_objective(m in 3usize..9, seed in any::<u64>(), i in 0usize..3, j in 0usize..3) {
            let st = random_state(m, seed);
            let poly = st.quartic_coefficients(i, j).unwrap();
            let here = st.majorizer_objective(st.q());
            prop_assert!((poly.eval(st.q()[(i, j)]) - here).abs() <= 1e-9 * here.abs().max(1.0));
            for k in 0..11 {
                let v = -2.5 + 0.5 * k as f64;
                let mut q = *st.q();
                q[(i, j)] = v;
                let direct = st.majorizer_objective(&q);
                prop_assert!((poly.eval(v) - direct).abs() <= 1e-9 * direct.abs().max(1.0),
                    "q={v}: poly {} direct {}", poly.eval(v), direct);
            }
        }

        #[test]
        fn every_coordinate_update_descends(m in 3usize..9, seed in any::<u64>()) {
            let mut st = random_state(m, seed);
            let mut value = st.majorizer_objective(st.q());
            for i in 0..3 {
                for j in 0..3 {
                    st.update_coordinate(i, j).unwrap();
                    let next = st.majorizer_objective(st.q());
                    prop_assert!(next <= value + 1e-12 * value.abs().max(1.0));
                    value = next;
                }
            }
        }

        #[test]
        fn surrogate_touches_and_majorizes(m in 3usize..9, seed in any::<u64>()) {
            let st = random_state(m, seed);
            let here = st.objective();
            prop_assert!((st.surrogate_at(st.q()) - here).abs() <= 1e-10 * here.abs().max(1.0));
            for k in 0..100u64 {
                let probe = random_matrix3(seed.wrapping_add(k * 7919)) * (0.2 + (k % 5) as f64);
                let g = st.surrogate_at(&probe);
                let f = st.objective_at(&probe);
                prop_assert!(g >= f - 1e-9 * f.abs().max(1.0), "g {g} < γ {f}");
            }
            // The majorizer differs from the surrogate by a constant.
            let q = random_matrix3(seed ^ 5);
            let d0 = st.surrogate_at(st.q()) - st.majorizer_objective(st.q());
            let d1 = st.surrogate_at(&q) - st.majorizer_objective(&q);
            prop_assert!((d0 - d1).abs() <= 1e-8 * d0.abs().max(1.0));
        }

        #[test]
        fn solve_is_monotone(m in 3usize..11, seed in any::<u64>()) {
            let mut st = random_state(m, seed);
            let out = st.solve(&InnerSettings::default()).unwrap();
            for w in out.objective_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn identity_weight_gives_textbook_p() {
        let h = random_unit_rows(6, 4);
        let noise = NoiseModel::new(random_spd(6, 5)).unwrap();
        let mut st =
            InnerState::new(&h, &noise, &Matrix3::identity(), Some(random_matrix3(6))).unwrap();
        st.refresh();
        let expected = Matrix3::identity() - st.q().transpose() * st.information();
        assert_eq!(*st.p(), expected);
    }
}
