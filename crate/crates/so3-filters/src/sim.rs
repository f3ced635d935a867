//! Ground-truth synthesis for attitude filter experiments.
//!
//! Propagates the true attitude with the geometric step `R <- R exp([Omega]x dt)`,
//! synthesizes gyro and body-vector measurements under two angular-velocity
//! noise conventions, and integrates the Rodriguez-vector SDE
//! `d rho = f(rho, b) dt + g(rho) Q d beta` by Euler-Maruyama in both its Ito
//! form and its Stratonovich-derived form (Ito form plus the Wong-Zakai drift
//! correction).
//!
//! All randomness flows through caller-owned RNGs; equal seeds give
//! bit-identical outputs.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::so3::{exp_so3, hat, RodriguezVector, RotationMatrix};
use crate::{Error, Result};

/// `|rho|` beyond which an SDE trajectory is declared to have escaped the chart.
pub const CHART_ESCAPE_NORM: f64 = 1e9;
/// Inertial vector pairs with a smaller cross product are rejected as collinear.
pub const COLLINEAR_TOL: f64 = 1e-6;

/// How gyro noise samples are drawn at each step.
///
/// `PerStep` draws a fresh Gaussian with fixed standard deviation per sample
/// (rate-dependent intensity, matching experiment logs that add `std * randn`
/// each tick); `White` scales the intensity diagonal `q_diag` as
/// `q_diag * N(0, I) / sqrt(dt)`, the discretization of `Q d beta / dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseConvention {
    PerStep { std: f64 },
    White,
}

/// Noise and bias model for the gyro and the body-frame vector sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Diagonal of the white-noise intensity matrix `Q` (nonnegative).
    pub q_diag: Vector3<f64>,
    /// Constant gyro bias `b` (rad/s).
    pub gyro_bias: Vector3<f64>,
    /// Gyro noise convention.
    pub convention: NoiseConvention,
    /// Per-sensor additive bias on the body-frame vector measurements.
    pub vector_bias: Vec<Vector3<f64>>,
    /// Per-sensor, per-component noise standard deviation.
    pub vector_noise_std: Vec<f64>,
}

impl NoiseModel {
    /// A noise- and bias-free model for `n_sensors` vector sensors.
    pub fn noiseless(n_sensors: usize) -> Self {
        NoiseModel {
            q_diag: Vector3::zeros(),
            gyro_bias: Vector3::zeros(),
            convention: NoiseConvention::PerStep { std: 0.0 },
            vector_bias: vec![Vector3::zeros(); n_sensors],
            vector_noise_std: vec![0.0; n_sensors],
        }
    }

    /// Element-wise upper bound of `Q^2`; for a time-invariant `q_diag` this
    /// is simply `q_diag^2`.
    pub fn sigma_bound(&self) -> Vector3<f64> {
        self.q_diag.component_mul(&self.q_diag)
    }

    /// Checks sign constraints on the noise intensities.
    pub fn validate(&self) -> Result<()> {
        if self.q_diag.iter().any(|q| *q < 0.0) {
            return Err(Error::InvalidArgument(
                "q_diag components must be nonnegative".into(),
            ));
        }
        if self.vector_noise_std.iter().any(|s| *s < 0.0) {
            return Err(Error::InvalidArgument(
                "vector noise std must be nonnegative".into(),
            ));
        }
        if let NoiseConvention::PerStep { std } = self.convention {
            if std < 0.0 {
                return Err(Error::InvalidArgument(
                    "per-step gyro noise std must be nonnegative".into(),
                ));
            }
        }
        if self.vector_bias.len() != self.vector_noise_std.len() {
            return Err(Error::InvalidArgument(format!(
                "{} vector biases for {} noise stds",
                self.vector_bias.len(),
                self.vector_noise_std.len()
            )));
        }
        Ok(())
    }
}

/// Uniform time grid `[t0, t_end]` with step `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl TimeGrid {
    /// Validating constructor: `dt > 0`, `t_end > t0`, and `(t_end - t0) / dt`
    /// integral within 1e-9.
    pub fn new(t0: f64, t_end: f64, dt: f64) -> Result<Self> {
        let grid = TimeGrid { t0, t_end, dt };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(Error::InvalidArgument(format!("dt = {} must be > 0", self.dt)));
        }
        if !self.t_end.is_finite() || self.t_end <= self.t0 {
            return Err(Error::InvalidArgument(format!(
                "t_end = {} must exceed t0 = {}",
                self.t_end, self.t0
            )));
        }
        let steps = (self.t_end - self.t0) / self.dt;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "(t_end - t0) / dt = {steps} is not an integer step count"
            )));
        }
        Ok(())
    }

    /// Number of integration steps (`samples - 1`).
    pub fn n_steps(&self) -> usize {
        ((self.t_end - self.t0) / self.dt).round() as usize
    }

    /// Time of sample `k`.
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }
}

/// Draws a Brownian increment: three independent `N(0, dt)` samples.
pub fn brownian_increment<R: Rng + ?Sized>(rng: &mut R, dt: f64) -> Vector3<f64> {
    let s = dt.sqrt();
    Vector3::new(
        s * rng.sample::<f64, _>(StandardNormal),
        s * rng.sample::<f64, _>(StandardNormal),
        s * rng.sample::<f64, _>(StandardNormal),
    )
}

/// Synthesizes a gyro reading `Omega_m = Omega + b + omega` with `omega` drawn
/// per the model's [`NoiseConvention`].
pub fn measured_omega<R: Rng + ?Sized>(
    omega_true: Vector3<f64>,
    model: &NoiseModel,
    rng: &mut R,
    dt: f64,
) -> Vector3<f64> {
    let noise = match model.convention {
        NoiseConvention::PerStep { std } => {
            std * Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            )
        }
        NoiseConvention::White => model.q_diag.component_mul(&brownian_increment(rng, dt)) / dt,
    };
    omega_true + model.gyro_bias + noise
}

/// Advances the true attitude one geometric step: `R * exp([Omega]x dt)`.
pub fn true_attitude_step(
    r: &RotationMatrix,
    omega_true: Vector3<f64>,
    dt: f64,
) -> RotationMatrix {
    *r * exp_so3(omega_true, dt)
}

/// The shared chart Jacobian `(I + [rho]x + rho rho^T)`.
fn chart_jacobian(rho: Vector3<f64>) -> Matrix3<f64> {
    Matrix3::identity() + *hat(rho).matrix() + rho * rho.transpose()
}

/// Rodriguez kinematics drift: `(1/2) (I + [rho]x + rho rho^T) omega_eff`.
///
/// Applies the chart Jacobian to any effective body rate; the SDE drift is
/// `rodriguez_drift(rho, Omega_m - b)` and the diffusion applies the same
/// factor (negated) to the scaled Brownian increment.
pub fn rodriguez_drift(rho: &RodriguezVector, omega_eff: Vector3<f64>) -> Vector3<f64> {
    0.5 * chart_jacobian(rho.0) * omega_eff
}

/// Wong-Zakai drift correction
/// `W(rho) = (1/4) (I + [rho]x + rho rho^T) diag(q^2) rho`,
/// the extra Ito drift of a Stratonovich-interpreted Rodriguez SDE.
pub fn wong_zakai_correction(
    rho: &RodriguezVector,
    q_squared_diag: Vector3<f64>,
) -> Vector3<f64> {
    0.25 * chart_jacobian(rho.0) * q_squared_diag.component_mul(&rho.0)
}

fn check_escape(rho: Vector3<f64>) -> Result<RodriguezVector> {
    let norm = rho.norm();
    if norm > CHART_ESCAPE_NORM || !norm.is_finite() {
        return Err(Error::ChartEscape { norm });
    }
    Ok(RodriguezVector(rho))
}

/// One Euler-Maruyama step of the Ito SDE
/// `d rho = f(rho, b) dt + g(rho) Q d beta`.
pub fn sde_step_ito<R: Rng + ?Sized>(
    rho: &RodriguezVector,
    omega_m: Vector3<f64>,
    b: Vector3<f64>,
    model: &NoiseModel,
    rng: &mut R,
    dt: f64,
) -> Result<RodriguezVector> {
    let diffusion = model.q_diag.component_mul(&brownian_increment(rng, dt));
    let next = rho.0 + rodriguez_drift(rho, omega_m - b) * dt - rodriguez_drift(rho, diffusion);
    check_escape(next)
}

/// One Euler-Maruyama step of the Stratonovich dynamics written in Ito form:
/// the drift gains the Wong-Zakai correction.
pub fn sde_step_stratonovich<R: Rng + ?Sized>(
    rho: &RodriguezVector,
    omega_m: Vector3<f64>,
    b: Vector3<f64>,
    model: &NoiseModel,
    rng: &mut R,
    dt: f64,
) -> Result<RodriguezVector> {
    let diffusion = model.q_diag.component_mul(&brownian_increment(rng, dt));
    let drift = rodriguez_drift(rho, omega_m - b) + wong_zakai_correction(rho, model.sigma_bound());
    let next = rho.0 + drift * dt - rodriguez_drift(rho, diffusion);
    check_escape(next)
}

/// Cross-augments (when exactly two vectors are given) and normalizes a set of
/// inertial reference directions.
pub fn augmented_inertial(v_inertial: &[Vector3<f64>]) -> Result<Vec<Vector3<f64>>> {
    if v_inertial.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 inertial vectors, got {}",
            v_inertial.len()
        )));
    }
    let mut out = v_inertial.to_vec();
    if out.len() == 2 {
        let cross = out[0].cross(&out[1]);
        if cross.norm() < COLLINEAR_TOL {
            return Err(Error::DegenerateGeometry {
                reason: format!(
                    "inertial vectors are collinear (|v1 x v2| = {:.3e})",
                    cross.norm()
                ),
            });
        }
        out.push(cross);
    }
    out.iter_mut().try_for_each(|v| {
        let n = v.norm();
        if n < COLLINEAR_TOL {
            return Err(Error::DegenerateGeometry {
                reason: "inertial vector has near-zero norm".into(),
            });
        }
        *v /= n;
        Ok(())
    })?;
    Ok(out)
}

/// Synthesizes normalized body-frame vector measurements
/// `v_i^B = R^T v_i^I + b_i^B + omega_i^B`.
///
/// When exactly two sensors are configured, the cross product of the two
/// measured vectors is appended as a third measurement before normalization,
/// mirroring [`augmented_inertial`] on the reference side.
pub fn synthesize_body_vectors<R: Rng + ?Sized>(
    r_true: &RotationMatrix,
    v_inertial: &[Vector3<f64>],
    model: &NoiseModel,
    rng: &mut R,
) -> Result<Vec<Vector3<f64>>> {
    if v_inertial.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 inertial vectors, got {}",
            v_inertial.len()
        )));
    }
    if model.vector_bias.len() != v_inertial.len() {
        return Err(Error::InvalidArgument(format!(
            "{} sensor biases for {} inertial vectors",
            model.vector_bias.len(),
            v_inertial.len()
        )));
    }
    if v_inertial.len() == 2 {
        let cross = v_inertial[0].cross(&v_inertial[1]);
        if cross.norm() < COLLINEAR_TOL {
            return Err(Error::DegenerateGeometry {
                reason: format!(
                    "inertial vectors are collinear (|v1 x v2| = {:.3e})",
                    cross.norm()
                ),
            });
        }
    }

    let rt = r_true.transpose();
    let mut measured: Vec<Vector3<f64>> = Vec::with_capacity(v_inertial.len() + 1);
    for (i, v) in v_inertial.iter().enumerate() {
        let noise = model.vector_noise_std[i]
            * Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
        measured.push(rt * *v + model.vector_bias[i] + noise);
    }
    if measured.len() == 2 {
        let cross = measured[0].cross(&measured[1]);
        measured.push(cross);
    }
    measured.iter_mut().try_for_each(|v| {
        let n = v.norm();
        if n < COLLINEAR_TOL {
            return Err(Error::DegenerateGeometry {
                reason: "measured body vector has near-zero norm".into(),
            });
        }
        *v /= n;
        Ok(())
    })?;
    Ok(measured)
}
