//! Simulation scenario configuration and presets.
//!
//! A [`Scenario`] is the full description of one experiment: time grid,
//! angular-velocity profile, noise/bias model, reference vectors, initial
//! conditions, observer gains, the filter set and the RNG seeds. Scenarios
//! round-trip through TOML (see the repository README for the schema) and the
//! `paper-sV` preset pins the reproduction configuration.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::filters::{FilterGains, FilterKind};
use crate::sim::{NoiseConvention, NoiseModel, TimeGrid};
use crate::so3::RotationMatrix;
use crate::{Error, Result};

/// Named angular-velocity profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OmegaProfile {
    /// `Omega_i(t) = amplitude_i * sin(frequency_i * t + phase_i)`.
    Sinusoid {
        amplitude: [f64; 3],
        frequency: [f64; 3],
        phase: [f64; 3],
    },
    /// Constant body rate.
    Constant { omega: [f64; 3] },
}

impl OmegaProfile {
    /// The reproduction profile
    /// `[sin(0.7 t), 0.7 sin(0.5 t + pi), 0.5 sin(0.3 t + pi/3)]` rad/s.
    pub fn reproduction_sinusoid() -> Self {
        OmegaProfile::Sinusoid {
            amplitude: [1.0, 0.7, 0.5],
            frequency: [0.7, 0.5, 0.3],
            phase: [0.0, std::f64::consts::PI, std::f64::consts::FRAC_PI_3],
        }
    }

    /// Evaluates the profile at time `t`.
    pub fn at(&self, t: f64) -> Vector3<f64> {
        match self {
            OmegaProfile::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => Vector3::new(
                amplitude[0] * (frequency[0] * t + phase[0]).sin(),
                amplitude[1] * (frequency[1] * t + phase[1]).sin(),
                amplitude[2] * (frequency[2] * t + phase[2]).sin(),
            ),
            OmegaProfile::Constant { omega } => Vector3::new(omega[0], omega[1], omega[2]),
        }
    }
}

/// Initial attitude estimate as an angle-axis pair; the axis is normalized
/// when the rotation is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialEstimate {
    pub angle_deg: f64,
    pub axis: [f64; 3],
}

impl InitialEstimate {
    pub fn to_rotation(&self) -> Result<RotationMatrix> {
        let axis = Vector3::new(self.axis[0], self.axis[1], self.axis[2]);
        let norm = axis.norm();
        if norm < 1e-12 {
            return Err(Error::InvalidArgument(
                "initial estimate axis must be nonzero".into(),
            ));
        }
        RotationMatrix::from_angle_axis(self.angle_deg.to_radians(), axis / norm)
    }
}

/// Full simulation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub grid: TimeGrid,
    pub omega_profile: OmegaProfile,
    pub noise: NoiseModel,
    /// Inertial reference directions, one per vector sensor (>= 2).
    pub inertial_vectors: Vec<Vector3<f64>>,
    pub initial_true_attitude: RotationMatrix,
    pub initial_estimate: InitialEstimate,
    pub gains: FilterGains,
    /// Filters to run; all consume identical measurement streams per seed.
    pub filters: Vec<FilterKind>,
    pub seeds: Vec<u64>,
}

impl Scenario {
    /// Full cross-checks of every embedded model.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.noise.validate()?;
        self.gains.validate()?;
        if self.inertial_vectors.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 inertial vectors, got {}",
                self.inertial_vectors.len()
            )));
        }
        if self.noise.vector_bias.len() != self.inertial_vectors.len() {
            return Err(Error::InvalidArgument(format!(
                "{} sensor noise entries for {} inertial vectors",
                self.noise.vector_bias.len(),
                self.inertial_vectors.len()
            )));
        }
        if self.filters.is_empty() {
            return Err(Error::InvalidArgument("no filters selected".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("no seeds configured".into()));
        }
        self.initial_estimate.to_rotation()?;
        Ok(())
    }

    /// The configured gyro noise convention.
    pub fn noise_convention(&self) -> NoiseConvention {
        self.noise.convention
    }

    /// Parses a scenario from TOML text and validates it.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("scenario parse error: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Reads and validates a scenario file.
    pub fn from_toml_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidArgument(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    /// Renders the scenario as TOML.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }
}

/// The simulation-study reproduction scenario.
///
/// dt = 1e-3 s over 15 s; per-step gyro noise with std 0.5 rad/s and bias
/// `0.1 [1, -1, 1]`; two vector sensors (`[1,-1,1]/sqrt(3)` and `e3`) with
/// noise std 0.15 and biases `0.1 [-1, 1, 0.5]` / `0.1 [0, 0, 1]`; true
/// attitude starting at the identity and the estimate initialized 179.9°
/// away about `[1, 5, 3]`; gains `g1 = g2 = 1`, `kb = ksigma = k1 = k2 = 0.5`,
/// `e = 0.5`.
pub fn reproduction_scenario() -> Scenario {
    Scenario {
        grid: TimeGrid {
            t0: 0.0,
            t_end: 15.0,
            dt: 1e-3,
        },
        omega_profile: OmegaProfile::reproduction_sinusoid(),
        noise: NoiseModel {
            q_diag: Vector3::repeat(0.5),
            gyro_bias: 0.1 * Vector3::new(1.0, -1.0, 1.0),
            convention: NoiseConvention::PerStep { std: 0.5 },
            vector_bias: vec![
                0.1 * Vector3::new(-1.0, 1.0, 0.5),
                0.1 * Vector3::new(0.0, 0.0, 1.0),
            ],
            vector_noise_std: vec![0.15, 0.15],
        },
        inertial_vectors: vec![
            Vector3::new(1.0, -1.0, 1.0) / 3.0_f64.sqrt(),
            Vector3::z(),
        ],
        initial_true_attitude: RotationMatrix::identity(),
        initial_estimate: InitialEstimate {
            angle_deg: 179.9,
            axis: [1.0, 5.0, 3.0],
        },
        gains: FilterGains::reproduction(),
        filters: vec![FilterKind::Ito, FilterKind::Strat],
        seeds: vec![42],
    }
}

/// The reproduction scenario with every noise source silenced: constant gyro
/// bias only, exact vector measurements (hence exact reconstruction), running
/// the deterministic filter from a 60° initial error.
pub fn noise_free_deterministic_scenario() -> Scenario {
    let mut s = reproduction_scenario();
    s.noise.convention = NoiseConvention::PerStep { std: 0.0 };
    s.noise.q_diag = Vector3::zeros();
    s.noise.vector_bias = vec![Vector3::zeros(), Vector3::zeros()];
    s.noise.vector_noise_std = vec![0.0, 0.0];
    s.initial_estimate = InitialEstimate {
        angle_deg: 60.0,
        axis: [1.0, 5.0, 3.0],
    };
    s.filters = vec![FilterKind::Det];
    s
}

/// Built-in presets as `(name, description)` pairs.
pub const PRESET_NAMES: [(&str, &str); 2] = [
    (
        "paper-sV",
        "the reference simulation scenario (15 s, per-step gyro noise std 0.5, \
         two biased vector sensors, 179.9° initial estimate error)",
    ),
    (
        "det-noise-free",
        "bias-only, noise-free variant driving the deterministic passive filter \
         (exact reconstruction, 60° initial error)",
    ),
];

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<Scenario> {
    match name {
        "paper-sV" => Ok(reproduction_scenario()),
        "det-noise-free" => Ok(noise_free_deterministic_scenario()),
        other => Err(Error::InvalidArgument(format!(
            "unknown preset '{other}'; available: {}",
            PRESET_NAMES
                .iter()
                .map(|(n, _)| *n)
                .collect::<Vec<_>>()
                .join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reproduction_profile_values() {
        let p = OmegaProfile::reproduction_sinusoid();
        assert_abs_diff_eq!(p.at(0.0).x, 0.0, epsilon = 1e-15);
        let t: f64 = 2.3;
        let expected = Vector3::new(
            (0.7 * t).sin(),
            0.7 * (0.5 * t + std::f64::consts::PI).sin(),
            0.5 * (0.3 * t + std::f64::consts::FRAC_PI_3).sin(),
        );
        assert_abs_diff_eq!(p.at(t), expected, epsilon = 1e-15);
    }

    #[test]
    fn presets_validate() {
        for (name, _) in PRESET_NAMES {
            let s = preset(name).unwrap();
            s.validate().unwrap();
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn reproduction_initialization_is_near_180_degrees() {
        let s = reproduction_scenario();
        let r0 = s.initial_estimate.to_rotation().unwrap();
        let err = s.initial_true_attitude.transpose_mul(&r0);
        let dist = crate::so3::normalized_distance(&err);
        assert!(dist > 0.99999, "initial error distance {dist}");
    }

    #[test]
    fn toml_round_trip() {
        let s = reproduction_scenario();
        let text = s.to_toml_string();
        let back = Scenario::from_toml_str(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn validation_catches_mismatches() {
        let mut s = reproduction_scenario();
        s.filters.clear();
        assert!(s.validate().is_err());

        let mut s = reproduction_scenario();
        s.noise.vector_noise_std.pop();
        assert!(s.validate().is_err());

        let mut s = reproduction_scenario();
        s.initial_estimate.axis = [0.0; 3];
        assert!(s.validate().is_err());
    }

    #[test]
    fn bad_rotation_in_toml_is_rejected() {
        #[derive(Deserialize)]
        struct Holder {
            #[allow(dead_code)]
            r: RotationMatrix,
        }
        let bad = "r = [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]";
        assert!(toml::from_str::<Holder>(bad).is_err());
        let good = "r = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]";
        assert!(toml::from_str::<Holder>(good).is_ok());
    }
}
