//! Intrinsic Z-Y-X (yaw-pitch-roll) Euler angle extraction.
//!
//! Factors a rotation as `R = Rz(psi) Ry(theta) Rx(phi)`. The error metrics
//! elsewhere in the crate are convention-free; this decomposition exists only
//! for plotting and CSV export of tracked angles.

use nalgebra::Vector3;

use crate::so3::RotationMatrix;

/// Samples closer than this to `|sin(theta)| = 1` are flagged as gimbal-locked.
pub const GIMBAL_TOL: f64 = 1e-15;

/// Yaw-pitch-roll angles in radians with a gimbal-lock validity marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    /// Roll, rotation about x.
    pub phi: f64,
    /// Pitch, rotation about y.
    pub theta: f64,
    /// Yaw, rotation about z.
    pub psi: f64,
    /// False when pitch sits numerically at +-90° and roll/yaw are not
    /// individually observable; the angles then carry the `phi = 0` convention.
    pub valid: bool,
}

/// Extracts Z-Y-X Euler angles from a rotation matrix.
///
/// Away from gimbal lock, reassembling via [`from_euler`] reproduces the
/// input to rounding.
pub fn euler_angles(r: &RotationMatrix) -> EulerAngles {
    let m = r.matrix();
    let s_theta = -m[(2, 0)];
    if s_theta.abs() >= 1.0 - GIMBAL_TOL {
        let theta = if s_theta > 0.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            -std::f64::consts::FRAC_PI_2
        };
        // only psi -+ phi is observable; report it as yaw
        return EulerAngles {
            phi: 0.0,
            theta,
            psi: (-m[(0, 1)]).atan2(m[(1, 1)]),
            valid: false,
        };
    }
    EulerAngles {
        phi: m[(2, 1)].atan2(m[(2, 2)]),
        theta: s_theta.clamp(-1.0, 1.0).asin(),
        psi: m[(1, 0)].atan2(m[(0, 0)]),
        valid: true,
    }
}

/// Composes `Rz(psi) Ry(theta) Rx(phi)`.
pub fn from_euler(phi: f64, theta: f64, psi: f64) -> RotationMatrix {
    let rz = RotationMatrix::from_angle_axis(psi, Vector3::z()).expect("unit axis");
    let ry = RotationMatrix::from_angle_axis(theta, Vector3::y()).expect("unit axis");
    let rx = RotationMatrix::from_angle_axis(phi, Vector3::x()).expect("unit axis");
    rz * ry * rx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::exp_so3;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn identity_and_single_axis() {
        let e = euler_angles(&RotationMatrix::identity());
        assert_eq!((e.phi, e.theta, e.psi, e.valid), (0.0, 0.0, 0.0, true));

        let r = RotationMatrix::from_angle_axis(0.3, Vector3::z()).unwrap();
        let e = euler_angles(&r);
        assert_abs_diff_eq!(e.psi, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(e.phi, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.theta, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn round_trip_random_rotations() {
        let mut rng = ChaCha12Rng::seed_from_u64(0xE0E0);
        for _ in 0..1000 {
            let r = exp_so3(
                Vector3::new(
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                ),
                1.0,
            );
            let e = euler_angles(&r);
            assert!(e.valid);
            let back = from_euler(e.phi, e.theta, e.psi);
            assert_abs_diff_eq!(*back.matrix(), *r.matrix(), epsilon = 1e-9);
        }
    }

    #[test]
    fn gimbal_lock_is_flagged() {
        let r = from_euler(0.4, std::f64::consts::FRAC_PI_2, 0.2);
        let e = euler_angles(&r);
        assert!(!e.valid);
        assert_abs_diff_eq!(e.theta.abs(), std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        // the reported yaw carries the observable combination psi - phi
        assert_abs_diff_eq!(e.psi, 0.2 - 0.4, epsilon = 1e-12);
    }
}
