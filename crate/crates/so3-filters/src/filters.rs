//! Complementary attitude observers on SO(3).
//!
//! Three matrix-form filters share the structure
//! `d/dt R^ = R^ [Omega_m - b^ - (...) - W]x` driven by the feedback error
//! `R~ = R_y^T R^` against the reconstructed attitude `R_y`:
//!
//! - **deterministic** (passive complementary): `W = k1 Y`, `d/dt b^ = g1 Y`;
//! - **Ito stochastic**: `W = (k1/e) (2 - x)/(1 - x) Y + k2 D_Y s^` with
//!   adaptive bias (`b^`) and noise-bound (`s^`) estimates under leakage;
//! - **Stratonovich stochastic**: as Ito plus the rate term
//!   `-(1/2) diag(Y) s^ / (1 - x)` and a matching extra term in `d/dt s^`,
//!
//! where `Y = Upsilon_a(R~)`, `x = |R~|_I` and `D_Y = [Y, Y, Y]`. The
//! quaternion variants evaluate the same laws through `Y = 2 q0~ q~` and
//! `x = 1 - q0~^2`, so matrix and quaternion trajectories agree to rounding
//! under identical measurement streams.
//!
//! Every step is a pure transition (state in, state out), evaluated with all
//! right-hand sides at the pre-step state: one explicit-Euler stage for `b^`
//! and `s^` and a geometric exponential step for the attitude.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::quat::UnitQuat;
use crate::so3::{exp_so3, normalized_distance, upsilon_a, RotationMatrix};
use crate::{Error, Result};

/// The `1/(1 - x)` correction gains saturate once `1 - x` drops below this
/// margin; saturation preserves the correction direction near 180° error.
pub const GAIN_SATURATION_MARGIN: f64 = 1e-6;

/// Hard error margin: at `1 - x <= 1e-12` (equivalently `q0~^2 <= 1e-12`) the
/// error rotation is numerically at 180° and no correction direction exists.
pub const SINGULARITY_MARGIN: f64 = 1e-12;

/// Observer gains. The boundedness analysis asks for `g1, g2 >= 1`,
/// `k1 >= 9/32`, `k2 >= 1/8`; the constructor warns (but does not fail)
/// outside that set since useful tunings may ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterGains {
    /// Bias adaptation gain (g1 > 0).
    pub gamma1: f64,
    /// Noise-bound adaptation gain (g2 > 0).
    pub gamma2: f64,
    /// Primary correction gain (k1 > 0).
    pub k1: f64,
    /// Noise-bound correction gain (k2 > 0).
    pub k2: f64,
    /// Bias leakage (kb > 0).
    pub kb: f64,
    /// Noise-bound leakage (ksigma > 0).
    pub ksigma: f64,
    /// Small positive design constant dividing the primary correction.
    pub epsilon: f64,
}

impl FilterGains {
    /// Validating constructor; warns when the gains fall outside the
    /// stability-consistent set.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        gamma1: f64,
        gamma2: f64,
        k1: f64,
        k2: f64,
        kb: f64,
        ksigma: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let gains = FilterGains {
            gamma1,
            gamma2,
            k1,
            k2,
            kb,
            ksigma,
            epsilon,
        };
        gains.validate()?;
        Ok(gains)
    }

    /// The gain set used in the reproduction scenario:
    /// `g1 = g2 = 1`, `kb = ksigma = k1 = k2 = 0.5`, `e = 0.5`.
    pub fn reproduction() -> Self {
        FilterGains {
            gamma1: 1.0,
            gamma2: 1.0,
            k1: 0.5,
            k2: 0.5,
            kb: 0.5,
            ksigma: 0.5,
            epsilon: 0.5,
        }
    }

    /// Positivity check plus the stability-conditions warning.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("k1", self.k1),
            ("k2", self.k2),
            ("kb", self.kb),
            ("ksigma", self.ksigma),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "gain {name} = {v} must be > 0"
                )));
            }
        }
        if !self.satisfies_stability_conditions() {
            log::warn!(
                "gains outside the stability-analysis set (need gamma1 >= 1, gamma2 >= 1, \
                 k1 >= 9/32, k2 >= 1/8); boundedness guarantees may not hold"
            );
        }
        Ok(())
    }

    /// Whether the gains satisfy `g1 >= 1`, `g2 >= 1`, `k1 >= 9/32`, `k2 >= 1/8`.
    pub fn satisfies_stability_conditions(&self) -> bool {
        self.gamma1 >= 1.0 && self.gamma2 >= 1.0 && self.k1 >= 9.0 / 32.0 && self.k2 >= 1.0 / 8.0
    }
}

/// Matrix-form observer state `(R^, b^, s^)`.
///
/// `sigma_hat` is meaningful for the stochastic filters only; it is not
/// clamped to nonnegative values, the `ksigma` leakage keeps it bounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub r_hat: RotationMatrix,
    pub b_hat: Vector3<f64>,
    pub sigma_hat: Vector3<f64>,
}

impl FilterState {
    /// Zero-estimate state at the given initial attitude.
    pub fn new(r_hat: RotationMatrix) -> Self {
        FilterState {
            r_hat,
            b_hat: Vector3::zeros(),
            sigma_hat: Vector3::zeros(),
        }
    }
}

/// Quaternion-form observer state `(Q^, b^, s^)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuatFilterState {
    pub q_hat: UnitQuat,
    pub b_hat: Vector3<f64>,
    pub sigma_hat: Vector3<f64>,
}

impl QuatFilterState {
    /// Zero-estimate state at the given initial attitude.
    pub fn new(q_hat: UnitQuat) -> Self {
        QuatFilterState {
            q_hat,
            b_hat: Vector3::zeros(),
            sigma_hat: Vector3::zeros(),
        }
    }
}

/// Identifier for the five observer variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    Det,
    Ito,
    Strat,
    ItoQuat,
    StratQuat,
}

impl FilterKind {
    /// All variants, in presentation order.
    pub const ALL: [FilterKind; 5] = [
        FilterKind::Det,
        FilterKind::Ito,
        FilterKind::Strat,
        FilterKind::ItoQuat,
        FilterKind::StratQuat,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::Det => "det",
            FilterKind::Ito => "ito",
            FilterKind::Strat => "strat",
            FilterKind::ItoQuat => "ito-quat",
            FilterKind::StratQuat => "strat-quat",
        }
    }
}

impl std::fmt::Display for FilterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "det" => Ok(FilterKind::Det),
            "ito" => Ok(FilterKind::Ito),
            "strat" => Ok(FilterKind::Strat),
            "ito-quat" => Ok(FilterKind::ItoQuat),
            "strat-quat" => Ok(FilterKind::StratQuat),
            other => Err(Error::InvalidArgument(format!(
                "unknown filter '{other}' (expected det, ito, strat, ito-quat, strat-quat)"
            ))),
        }
    }
}

/// Per-step diagnostics of a filter state against a reference attitude
/// (the true attitude in simulation, the reconstruction in flight).
#[derive(Debug, Clone, Copy)]
pub struct FilterDiagnostics {
    /// `|R_ref^T R^|_I` in `[0, 1]`.
    pub err_dist: f64,
    /// `Upsilon_a` of the error rotation.
    pub upsilon: Vector3<f64>,
    /// Rodriguez vector of the error; `None` within the 180° chart guard.
    pub rho_err: Option<Vector3<f64>>,
    /// Potential value: deterministic form for [`FilterKind::Det`],
    /// stochastic form otherwise, evaluated chart-free through the identity
    /// `|rho|^2/(1 + |rho|^2) = |R~|_I`.
    pub lyapunov_v: f64,
}

impl FilterDiagnostics {
    pub fn compute(
        filter: FilterKind,
        r_reference: &RotationMatrix,
        r_hat: &RotationMatrix,
        b_err: Vector3<f64>,
        sigma_err: Vector3<f64>,
        gains: &FilterGains,
    ) -> Self {
        let (r_err, upsilon, err_dist) = attitude_error(r_reference, r_hat);
        let rho_err = crate::so3::RodriguezVector::from_rotation(&r_err)
            .ok()
            .map(|r| r.0);
        let lyapunov_v = match filter {
            FilterKind::Det => err_dist + b_err.norm_squared() / (4.0 * gains.gamma1),
            _ => {
                err_dist * err_dist
                    + b_err.norm_squared() / (2.0 * gains.gamma1)
                    + sigma_err.norm_squared() / (2.0 * gains.gamma2)
            }
        };
        FilterDiagnostics {
            err_dist,
            upsilon,
            rho_err,
            lyapunov_v,
        }
    }
}

/// Attitude feedback error: returns `(R~, Upsilon_a(R~), |R~|_I)` for
/// `R~ = R_y^T R^`.
pub fn attitude_error(
    r_y: &RotationMatrix,
    r_hat: &RotationMatrix,
) -> (RotationMatrix, Vector3<f64>, f64) {
    let r_err = r_y.transpose_mul(r_hat);
    let upsilon = upsilon_a(&r_err);
    let dist = normalized_distance(&r_err);
    (r_err, upsilon, dist)
}

/// `D_Y = [Y, Y, Y]`, three identical columns.
fn d_upsilon(upsilon: Vector3<f64>) -> Matrix3<f64> {
    Matrix3::from_columns(&[upsilon, upsilon, upsilon])
}

fn ensure_regular(x: f64) -> Result<()> {
    if 1.0 - x <= SINGULARITY_MARGIN {
        return Err(Error::NearSingularity { margin: 1.0 - x });
    }
    Ok(())
}

/// Saturated error distance used inside the `1/(1 - x)` gains.
fn saturated(x: f64) -> f64 {
    x.min(1.0 - GAIN_SATURATION_MARGIN)
}

/// Ito adaptation laws evaluated at `(Y, x)`: returns `(W, db^/dt, ds^/dt)`.
fn ito_rates(
    upsilon: Vector3<f64>,
    x: f64,
    b_hat: Vector3<f64>,
    sigma_hat: Vector3<f64>,
    g: &FilterGains,
) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let xs = saturated(x);
    let dy = d_upsilon(upsilon);
    let w = (g.k1 / g.epsilon) * ((2.0 - xs) / (1.0 - xs)) * upsilon + g.k2 * dy * sigma_hat;
    let b_dot = g.gamma1 * x * upsilon - g.gamma1 * g.kb * b_hat;
    let sigma_dot = g.k1 * g.gamma2 * x * (dy.transpose() * upsilon) - g.gamma2 * g.ksigma * sigma_hat;
    (w, b_dot, sigma_dot)
}

/// Stratonovich adaptation laws: returns `(W, db^/dt, ds^/dt, rate_extra)`
/// where `rate_extra = (1/2) diag(Y) s^ / (1 - x)` is subtracted from the
/// body rate alongside `W`.
fn strat_rates(
    upsilon: Vector3<f64>,
    x: f64,
    b_hat: Vector3<f64>,
    sigma_hat: Vector3<f64>,
    g: &FilterGains,
) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let xs = saturated(x);
    let dy = d_upsilon(upsilon);
    let inv = 0.5 / (1.0 - xs);
    let w = (g.k1 / g.epsilon) * ((2.0 - xs) / (1.0 - xs)) * upsilon + g.k2 * dy * sigma_hat;
    let b_dot = g.gamma1 * x * upsilon - g.gamma1 * g.kb * b_hat;
    let sigma_dot = g.gamma2 * x * (g.k1 * (dy.transpose() * upsilon) + inv * upsilon.component_mul(&upsilon))
        - g.gamma2 * g.ksigma * sigma_hat;
    let rate_extra = inv * upsilon.component_mul(&sigma_hat);
    (w, b_dot, sigma_dot, rate_extra)
}

/// One step of the deterministic passive complementary filter:
/// `W = k1 Y`, `d/dt b^ = g1 Y`; `s^` is untouched (this filter has none).
pub fn det_filter_step(
    state: &FilterState,
    omega_m: Vector3<f64>,
    r_y: &RotationMatrix,
    gains: &FilterGains,
    dt: f64,
) -> FilterState {
    let (_, upsilon, _) = attitude_error(r_y, &state.r_hat);
    let w = gains.k1 * upsilon;
    let rate = omega_m - state.b_hat - w;
    FilterState {
        r_hat: state.r_hat * exp_so3(rate, dt),
        b_hat: state.b_hat + gains.gamma1 * upsilon * dt,
        sigma_hat: state.sigma_hat,
    }
}

/// One step of the Ito-sense stochastic filter.
pub fn ito_filter_step(
    state: &FilterState,
    omega_m: Vector3<f64>,
    r_y: &RotationMatrix,
    gains: &FilterGains,
    dt: f64,
) -> Result<FilterState> {
    let (_, upsilon, x) = attitude_error(r_y, &state.r_hat);
    ensure_regular(x)?;
    let (w, b_dot, sigma_dot) = ito_rates(upsilon, x, state.b_hat, state.sigma_hat, gains);
    let rate = omega_m - state.b_hat - w;
    Ok(FilterState {
        r_hat: state.r_hat * exp_so3(rate, dt),
        b_hat: state.b_hat + b_dot * dt,
        sigma_hat: state.sigma_hat + sigma_dot * dt,
    })
}

/// One step of the Stratonovich-sense stochastic filter.
pub fn strat_filter_step(
    state: &FilterState,
    omega_m: Vector3<f64>,
    r_y: &RotationMatrix,
    gains: &FilterGains,
    dt: f64,
) -> Result<FilterState> {
    let (_, upsilon, x) = attitude_error(r_y, &state.r_hat);
    ensure_regular(x)?;
    let (w, b_dot, sigma_dot, rate_extra) =
        strat_rates(upsilon, x, state.b_hat, state.sigma_hat, gains);
    let rate = omega_m - state.b_hat - rate_extra - w;
    Ok(FilterState {
        r_hat: state.r_hat * exp_so3(rate, dt),
        b_hat: state.b_hat + b_dot * dt,
        sigma_hat: state.sigma_hat + sigma_dot * dt,
    })
}

/// Feedback quantities of the quaternion error `Q~ = Q_y^-1 ⊙ Q^`:
/// `Y = 2 q0~ q~` and `x = 1 - q0~^2`, matching the matrix-form
/// `Upsilon_a(R~)` and `|R~|_I` exactly under the quaternion-to-rotation map.
fn quat_feedback(q_y: &UnitQuat, q_hat: &UnitQuat) -> (Vector3<f64>, f64) {
    let q_err = q_y.inverse() * *q_hat;
    let upsilon = 2.0 * q_err.w * q_err.v;
    let x = (1.0 - q_err.w * q_err.w).clamp(0.0, 1.0);
    (upsilon, x)
}

/// Quaternion form of [`ito_filter_step`].
pub fn ito_filter_step_quat(
    state: &QuatFilterState,
    omega_m: Vector3<f64>,
    q_y: &UnitQuat,
    gains: &FilterGains,
    dt: f64,
) -> Result<QuatFilterState> {
    let (upsilon, x) = quat_feedback(q_y, &state.q_hat);
    ensure_regular(x)?;
    let (w, b_dot, sigma_dot) = ito_rates(upsilon, x, state.b_hat, state.sigma_hat, gains);
    let gamma = omega_m - state.b_hat - w;
    Ok(QuatFilterState {
        q_hat: state.q_hat.kinematics_step(gamma, dt),
        b_hat: state.b_hat + b_dot * dt,
        sigma_hat: state.sigma_hat + sigma_dot * dt,
    })
}

/// Quaternion form of [`strat_filter_step`].
pub fn strat_filter_step_quat(
    state: &QuatFilterState,
    omega_m: Vector3<f64>,
    q_y: &UnitQuat,
    gains: &FilterGains,
    dt: f64,
) -> Result<QuatFilterState> {
    let (upsilon, x) = quat_feedback(q_y, &state.q_hat);
    ensure_regular(x)?;
    let (w, b_dot, sigma_dot, rate_extra) =
        strat_rates(upsilon, x, state.b_hat, state.sigma_hat, gains);
    let gamma = omega_m - state.b_hat - rate_extra - w;
    Ok(QuatFilterState {
        q_hat: state.q_hat.kinematics_step(gamma, dt),
        b_hat: state.b_hat + b_dot * dt,
        sigma_hat: state.sigma_hat + sigma_dot * dt,
    })
}

/// Deterministic-filter potential
/// `V = |rho~|^2 / (1 + |rho~|^2) + b~^T b~ / (4 g1)`.
///
/// Along the deterministic filter this decreases as
/// `dV/dt = -(k1/2) |Upsilon_a(R~)|^2` in the noise-free case: the identity
/// `d|R~|_I/dt = (1/2) Upsilon_a(R~)^T (b~ - W)` forces the `1/(4 g1)` bias
/// weight for the cross terms to cancel against `d/dt b^ = g1 Upsilon_a(R~)`.
pub fn lyapunov_v_det(rho_err: Vector3<f64>, b_err: Vector3<f64>, gains: &FilterGains) -> f64 {
    let n2 = rho_err.norm_squared();
    n2 / (1.0 + n2) + b_err.norm_squared() / (4.0 * gains.gamma1)
}

/// Stochastic-filter potential
/// `V = (|rho~|^2 / (1 + |rho~|^2))^2 + b~^T b~ / (2 g1) + s~^T s~ / (2 g2)`.
pub fn lyapunov_v_stochastic(
    rho_err: Vector3<f64>,
    b_err: Vector3<f64>,
    sigma_err: Vector3<f64>,
    gains: &FilterGains,
) -> f64 {
    let n2 = rho_err.norm_squared();
    let d = n2 / (1.0 + n2);
    d * d + b_err.norm_squared() / (2.0 * gains.gamma1)
        + sigma_err.norm_squared() / (2.0 * gains.gamma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::RodriguezVector;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn rng() -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(0xF117)
    }

    fn random_vec(rng: &mut ChaCha12Rng, scale: f64) -> Vector3<f64> {
        Vector3::new(
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
        )
    }

    fn random_rotation(rng: &mut ChaCha12Rng) -> RotationMatrix {
        exp_so3(random_vec(rng, 3.0), 1.0)
    }

    /// State whose feedback error against `r_y = I` is the Rodriguez vector `rho`.
    fn state_with_error(rho: Vector3<f64>) -> FilterState {
        FilterState::new(RodriguezVector(rho).to_rotation())
    }

    #[test]
    fn gains_validation() {
        assert!(FilterGains::reproduction().satisfies_stability_conditions());
        let weak = FilterGains::new(0.5, 1.0, 0.1, 0.05, 0.5, 0.5, 0.5).unwrap();
        assert!(!weak.satisfies_stability_conditions());
        assert!(FilterGains::new(0.0, 1.0, 0.5, 0.5, 0.5, 0.5, 0.5).is_err());
        assert!(FilterGains::new(1.0, 1.0, 0.5, 0.5, 0.5, 0.5, -0.5).is_err());
    }

    #[test]
    fn attitude_error_basics() {
        let mut r = rng();
        let r_y = random_rotation(&mut r);
        let (err, upsilon, dist) = attitude_error(&r_y, &r_y);
        assert_abs_diff_eq!(*err.matrix(), *RotationMatrix::identity().matrix(), epsilon = 1e-14);
        assert_abs_diff_eq!(upsilon, Vector3::zeros(), epsilon = 1e-14);
        assert_abs_diff_eq!(dist, 0.0, epsilon = 1e-14);

        // r_hat = r_y * R(rho = e1): Y = e1, x = 1/2
        let r_hat = r_y * RodriguezVector(Vector3::x()).to_rotation();
        let (_, upsilon, dist) = attitude_error(&r_y, &r_hat);
        assert_abs_diff_eq!(upsilon, Vector3::x(), epsilon = 1e-13);
        assert_abs_diff_eq!(dist, 0.5, epsilon = 1e-13);

        // invariant under a common left rotation
        let s = random_rotation(&mut r);
        let (_, upsilon2, dist2) = attitude_error(&(s * r_y), &(s * r_hat));
        assert_abs_diff_eq!(upsilon2, upsilon, epsilon = 1e-12);
        assert_abs_diff_eq!(dist2, dist, epsilon = 1e-12);
    }

    #[test]
    fn det_step_fixed_point_and_correction() {
        let gains = FilterGains::reproduction();
        // zero error and Omega_m = b^: state unchanged
        let mut state = state_with_error(Vector3::zeros());
        state.b_hat = Vector3::new(0.1, -0.2, 0.3);
        let next = det_filter_step(&state, state.b_hat, &RotationMatrix::identity(), &gains, 1e-3);
        assert_abs_diff_eq!(*next.r_hat.matrix(), *state.r_hat.matrix(), epsilon = 1e-15);
        assert_abs_diff_eq!(next.b_hat, state.b_hat, epsilon = 1e-15);

        // from rho~ = e1 with k1 = 0.5: W = 0.5 e1
        let state = state_with_error(Vector3::x());
        let dt = 1e-3;
        let next = det_filter_step(&state, Vector3::zeros(), &RotationMatrix::identity(), &gains, dt);
        let expected_r = state.r_hat * exp_so3(-0.5 * Vector3::x(), dt);
        assert_abs_diff_eq!(*next.r_hat.matrix(), *expected_r.matrix(), epsilon = 1e-14);
        assert_abs_diff_eq!(next.b_hat, Vector3::x() * gains.gamma1 * dt, epsilon = 1e-14);
    }

    #[test]
    fn ito_step_hand_computed_rates() {
        // rho~ = e1 (Y = e1, x = 1/2), reproduction gains, b^ = s^ = 0:
        // W = (0.5/0.5) (1.5/0.5) e1 = [3,0,0]
        // db^/dt = [0.5,0,0]; ds^/dt = [0.25,0.25,0.25]
        let gains = FilterGains::reproduction();
        let state = state_with_error(Vector3::x());
        let dt = 1e-3;
        let next =
            ito_filter_step(&state, Vector3::zeros(), &RotationMatrix::identity(), &gains, dt)
                .unwrap();
        assert_abs_diff_eq!(next.b_hat, Vector3::new(0.5, 0.0, 0.0) * dt, epsilon = 1e-13);
        assert_abs_diff_eq!(next.sigma_hat, Vector3::repeat(0.25) * dt, epsilon = 1e-13);
        let expected_r = state.r_hat * exp_so3(-Vector3::new(3.0, 0.0, 0.0), dt);
        assert_abs_diff_eq!(*next.r_hat.matrix(), *expected_r.matrix(), epsilon = 1e-12);
    }

    #[test]
    fn strat_step_hand_computed_rates() {
        // same configuration: ds^/dt = [0.75,0.25,0.25]; W and db^/dt as Ito
        let gains = FilterGains::reproduction();
        let state = state_with_error(Vector3::x());
        let dt = 1e-3;
        let next =
            strat_filter_step(&state, Vector3::zeros(), &RotationMatrix::identity(), &gains, dt)
                .unwrap();
        assert_abs_diff_eq!(next.b_hat, Vector3::new(0.5, 0.0, 0.0) * dt, epsilon = 1e-13);
        assert_abs_diff_eq!(
            next.sigma_hat,
            Vector3::new(0.75, 0.25, 0.25) * dt,
            epsilon = 1e-13
        );
        // s^ = 0 makes the extra rate term vanish: same attitude update as Ito
        let expected_r = state.r_hat * exp_so3(-Vector3::new(3.0, 0.0, 0.0), dt);
        assert_abs_diff_eq!(*next.r_hat.matrix(), *expected_r.matrix(), epsilon = 1e-12);
    }

    #[test]
    fn stochastic_steps_decay_at_zero_error() {
        // R~ = I: pure leakage on b^ and s^, W = 0
        let gains = FilterGains::reproduction();
        let mut state = state_with_error(Vector3::zeros());
        state.b_hat = Vector3::new(1.0, -2.0, 0.5);
        state.sigma_hat = Vector3::new(0.3, 0.3, 0.3);
        let dt = 1e-3;
        let omega_m = Vector3::new(0.2, 0.0, -0.1);
        for step in [ito_filter_step, strat_filter_step] {
            let next = step(&state, omega_m, &RotationMatrix::identity(), &gains, dt).unwrap();
            assert_abs_diff_eq!(
                next.b_hat,
                state.b_hat * (1.0 - gains.gamma1 * gains.kb * dt),
                epsilon = 1e-14
            );
            assert_abs_diff_eq!(
                next.sigma_hat,
                state.sigma_hat * (1.0 - gains.gamma2 * gains.ksigma * dt),
                epsilon = 1e-14
            );
            let expected_r = state.r_hat * exp_so3(omega_m - state.b_hat, dt);
            assert_abs_diff_eq!(*next.r_hat.matrix(), *expected_r.matrix(), epsilon = 1e-13);
        }
    }

    #[test]
    fn near_singularity_is_rejected() {
        let gains = FilterGains::reproduction();
        let half_turn =
            RotationMatrix::from_angle_axis(std::f64::consts::PI, Vector3::z()).unwrap();
        let state = FilterState::new(half_turn);
        let res = ito_filter_step(
            &state,
            Vector3::zeros(),
            &RotationMatrix::identity(),
            &gains,
            1e-3,
        );
        assert!(matches!(res, Err(Error::NearSingularity { .. })));

        let qstate = QuatFilterState::new(UnitQuat::new(0.0, Vector3::z()));
        let res = ito_filter_step_quat(
            &qstate,
            Vector3::zeros(),
            &UnitQuat::identity(),
            &gains,
            1e-3,
        );
        assert!(matches!(res, Err(Error::NearSingularity { .. })));
    }

    #[test]
    fn saturation_keeps_large_error_steps_finite() {
        // 179.9°: inside the saturation band but well clear of the hard margin
        let gains = FilterGains::reproduction();
        let axis = Vector3::new(1.0, 5.0, 3.0).normalize();
        let r_hat = RotationMatrix::from_angle_axis(179.9_f64.to_radians(), axis).unwrap();
        let state = FilterState::new(r_hat);
        let next = ito_filter_step(
            &state,
            Vector3::zeros(),
            &RotationMatrix::identity(),
            &gains,
            1e-3,
        )
        .unwrap();
        assert!(next.r_hat.orthonormality_residual() < 1e-12);
        assert!(next.b_hat.norm().is_finite());
        // the saturated gain still pushes the error down
        let before = normalized_distance(&attitude_error(&RotationMatrix::identity(), &r_hat).0);
        let after =
            normalized_distance(&attitude_error(&RotationMatrix::identity(), &next.r_hat).0);
        assert!(after < before);
    }

    #[test]
    fn quat_and_matrix_filters_agree_on_random_streams() {
        let gains = FilterGains::reproduction();
        let mut r = rng();
        let r_true = random_rotation(&mut r);
        let r0 = r_true * exp_so3(Vector3::new(0.4, -0.3, 0.2), 1.0);
        let dt = 1e-3;
        for strat in [false, true] {
            let mut m_state = FilterState::new(r0);
            let mut q_state = QuatFilterState::new(UnitQuat::from_rotation(&r0));
            for _ in 0..500 {
                let omega_m = random_vec(&mut r, 1.0);
                // noisy reconstruction jittering around the reference attitude
                let r_y = r_true * exp_so3(random_vec(&mut r, 0.15), 1.0);
                let q_y = UnitQuat::from_rotation(&r_y);
                if strat {
                    m_state = strat_filter_step(&m_state, omega_m, &r_y, &gains, dt).unwrap();
                    q_state = strat_filter_step_quat(&q_state, omega_m, &q_y, &gains, dt).unwrap();
                } else {
                    m_state = ito_filter_step(&m_state, omega_m, &r_y, &gains, dt).unwrap();
                    q_state = ito_filter_step_quat(&q_state, omega_m, &q_y, &gains, dt).unwrap();
                }
            }
            let diff = (q_state.q_hat.to_rotation().matrix() - m_state.r_hat.matrix()).norm();
            assert!(diff < 1e-9, "strat={strat}: representations diverged by {diff}");
            assert_abs_diff_eq!(q_state.b_hat, m_state.b_hat, epsilon = 1e-10);
            assert_abs_diff_eq!(q_state.sigma_hat, m_state.sigma_hat, epsilon = 1e-10);
        }
    }

    #[test]
    fn quat_filters_are_sign_invariant() {
        let gains = FilterGains::reproduction();
        let mut r = rng();
        let q0 = UnitQuat::from_rotation(&random_rotation(&mut r));
        let mut state = QuatFilterState::new(q0);
        state.b_hat = Vector3::new(0.05, -0.02, 0.01);
        state.sigma_hat = Vector3::new(0.1, 0.2, 0.3);
        let q_y = UnitQuat::from_rotation(&random_rotation(&mut r));
        let omega_m = Vector3::new(0.3, -0.1, 0.2);
        for step in [ito_filter_step_quat, strat_filter_step_quat] {
            let a = step(&state, omega_m, &q_y, &gains, 1e-3).unwrap();
            let b = step(&state, omega_m, &(-q_y), &gains, 1e-3).unwrap();
            assert_eq!(a.b_hat, b.b_hat);
            assert_eq!(a.sigma_hat, b.sigma_hat);
            assert_eq!(a.q_hat, b.q_hat);
        }
    }

    #[test]
    fn lyapunov_values() {
        let gains = FilterGains::reproduction();
        assert_eq!(
            lyapunov_v_stochastic(Vector3::zeros(), Vector3::zeros(), Vector3::zeros(), &gains),
            0.0
        );
        assert_abs_diff_eq!(
            lyapunov_v_stochastic(Vector3::x(), Vector3::zeros(), Vector3::zeros(), &gains),
            0.25,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            lyapunov_v_det(Vector3::x(), Vector3::zeros(), &gains),
            0.5,
            epsilon = 1e-15
        );
        // bias-error weight is 1/(4 g1) in the deterministic form
        assert_abs_diff_eq!(
            lyapunov_v_det(Vector3::zeros(), Vector3::new(2.0, 0.0, 0.0), &gains),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn det_potential_decreases_along_noise_free_trajectories() {
        // V = |R~|_I + |b~|^2/(4 g1) with exact R_y and gyro bias only
        let gains = FilterGains::reproduction();
        let b_true: Vector3<f64> = 0.1 * Vector3::new(1.0, -1.0, 1.0);
        let dt = 1e-3;
        let mut r_true = RotationMatrix::identity();
        let mut state = state_with_error(Vector3::new(0.4, -0.8, 0.3));
        let mut v_prev = f64::INFINITY;
        for k in 0..4000 {
            let t = k as f64 * dt;
            let omega = Vector3::new(t.sin(), 0.7 * (0.5 * t).cos(), 0.2);
            let (r_err, _, dist) = attitude_error(&r_true, &state.r_hat);
            let _ = r_err;
            let v = dist + (b_true - state.b_hat).norm_squared() / (4.0 * gains.gamma1);
            assert!(v <= v_prev + 1e-9, "V increased at step {k}: {v} > {v_prev}");
            v_prev = v;
            state = det_filter_step(&state, omega + b_true, &r_true, &gains, dt);
            r_true = r_true * exp_so3(omega, dt);
        }
        // V(0) ~ 0.48; material decrease within 4 s (full-horizon convergence
        // is covered by the acceptance suite)
        assert!(v_prev < 0.25, "V after 4 s = {v_prev}");
    }

    #[test]
    fn estimates_stay_on_so3_over_noisy_runs() {
        let gains = FilterGains::reproduction();
        let mut r = rng();
        let mut state = state_with_error(Vector3::new(0.3, -0.2, 0.5));
        for _ in 0..5000 {
            let omega_m = random_vec(&mut r, 2.0);
            let r_y = random_rotation(&mut r);
            state = strat_filter_step(&state, omega_m, &r_y, &gains, 1e-3).unwrap();
        }
        assert!(state.r_hat.orthonormality_residual() < 1e-9);
    }
}
