//! Unit-quaternion algebra on S^3 and its conversions to and from SO(3).
//!
//! Quaternions are stored as a scalar part `w` and vector part `v`, with the
//! Hamilton product `a ⊙ b = [a.w b.w - a.v . b.v, a.w b.v + b.w a.v + a.v x b.v]`.
//! The map to SO(3) is `R_Q = (w^2 - |v|^2) I + 2 v v^T + 2 w [v]x`, a 2-to-1
//! homomorphism (`Q` and `-Q` describe the same rotation).

use nalgebra::{Matrix3, Vector3};
use std::ops::Mul;

use crate::so3::{hat, RotationMatrix};

/// Norm drift beyond which quaternion products renormalize their output.
pub const NORM_DRIFT: f64 = 1e-12;

/// A unit quaternion `[w, v]` with `w^2 + |v|^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuat {
    /// Scalar part.
    pub w: f64,
    /// Vector part.
    pub v: Vector3<f64>,
}

impl UnitQuat {
    /// The identity quaternion `[1, 0, 0, 0]`.
    pub fn identity() -> Self {
        UnitQuat {
            w: 1.0,
            v: Vector3::zeros(),
        }
    }

    /// Normalizing constructor with the `w >= 0` sign convention.
    pub fn new(w: f64, v: Vector3<f64>) -> Self {
        let q = UnitQuat { w, v }.renormalized();
        if q.w < 0.0 {
            -q
        } else {
            q
        }
    }

    /// Raw constructor; the caller guarantees unit norm. No sign canonicalization.
    pub fn from_parts_unchecked(w: f64, v: Vector3<f64>) -> Self {
        UnitQuat { w, v }
    }

    /// Quaternion norm `sqrt(w^2 + |v|^2)`.
    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.v.norm_squared()).sqrt()
    }

    /// The group inverse `[w, -v]`.
    pub fn inverse(&self) -> Self {
        UnitQuat {
            w: self.w,
            v: -self.v,
        }
    }

    /// Renormalizes only when the norm has drifted beyond [`NORM_DRIFT`];
    /// keeps long product chains on S^3 without perturbing exact values.
    pub fn renormalized(self) -> Self {
        let n = self.norm();
        if (n - 1.0).abs() > NORM_DRIFT {
            UnitQuat {
                w: self.w / n,
                v: self.v / n,
            }
        } else {
            self
        }
    }

    /// The rotation matrix `(w^2 - |v|^2) I + 2 v v^T + 2 w [v]x`.
    pub fn to_rotation(&self) -> RotationMatrix {
        let m = (self.w * self.w - self.v.norm_squared()) * Matrix3::identity()
            + 2.0 * self.v * self.v.transpose()
            + 2.0 * self.w * *hat(self.v).matrix();
        RotationMatrix::from_matrix_unchecked(m)
    }

    /// Extracts the quaternion of a rotation matrix, `w >= 0` branch.
    ///
    /// Uses the largest-diagonal-pivot selection, which stays well conditioned
    /// for rotations near 180°.
    pub fn from_rotation(r: &RotationMatrix) -> Self {
        let m = r.matrix();
        let t = m.trace();
        let (d0, d1, d2) = (m[(0, 0)], m[(1, 1)], m[(2, 2)]);

        let q = if t >= d0 && t >= d1 && t >= d2 {
            let s = (1.0 + t).sqrt();
            let f = 0.5 / s;
            UnitQuat {
                w: 0.5 * s,
                v: Vector3::new(
                    f * (m[(2, 1)] - m[(1, 2)]),
                    f * (m[(0, 2)] - m[(2, 0)]),
                    f * (m[(1, 0)] - m[(0, 1)]),
                ),
            }
        } else if d0 >= d1 && d0 >= d2 {
            let s = (1.0 + 2.0 * d0 - t).sqrt();
            let f = 0.5 / s;
            UnitQuat {
                w: f * (m[(2, 1)] - m[(1, 2)]),
                v: Vector3::new(
                    0.5 * s,
                    f * (m[(0, 1)] + m[(1, 0)]),
                    f * (m[(0, 2)] + m[(2, 0)]),
                ),
            }
        } else if d1 >= d2 {
            let s = (1.0 + 2.0 * d1 - t).sqrt();
            let f = 0.5 / s;
            UnitQuat {
                w: f * (m[(0, 2)] - m[(2, 0)]),
                v: Vector3::new(
                    f * (m[(0, 1)] + m[(1, 0)]),
                    0.5 * s,
                    f * (m[(1, 2)] + m[(2, 1)]),
                ),
            }
        } else {
            let s = (1.0 + 2.0 * d2 - t).sqrt();
            let f = 0.5 / s;
            UnitQuat {
                w: f * (m[(1, 0)] - m[(0, 1)]),
                v: Vector3::new(
                    f * (m[(0, 2)] + m[(2, 0)]),
                    f * (m[(1, 2)] + m[(2, 1)]),
                    0.5 * s,
                ),
            }
        };
        let q = q.renormalized();
        if q.w < 0.0 {
            -q
        } else {
            q
        }
    }

    /// Advances the quaternion by the body rate `gamma` held for `dt` seconds.
    ///
    /// Closed-form exponential update, equivalent to right-multiplying the
    /// attitude by `exp_so3(gamma, dt)`; see [`crate::so3::exp_so3`].
    pub fn kinematics_step(&self, gamma: Vector3<f64>, dt: f64) -> Self {
        let rot = gamma * dt;
        let theta = rot.norm();
        let half = 0.5 * theta;
        let delta = if theta < crate::so3::tol::SMALL_ANGLE {
            // sin(theta/2)/theta ~ 1/2 - theta^2/48
            UnitQuat {
                w: 1.0 - half * half / 2.0,
                v: rot * (0.5 - theta * theta / 48.0),
            }
        } else {
            UnitQuat {
                w: half.cos(),
                v: rot * (half.sin() / theta),
            }
        };
        (*self * delta).renormalized()
    }

    /// One explicit-Euler step of the linear kinematics
    /// `Q' = Q + (dt/2) Q ⊙ [0, gamma]`, renormalized.
    ///
    /// First-order variant of [`UnitQuat::kinematics_step`], retained for
    /// integration-fidelity experiments.
    pub fn kinematics_step_euler(&self, gamma: Vector3<f64>, dt: f64) -> Self {
        let dw = -self.v.dot(&gamma);
        let dv = self.w * gamma + self.v.cross(&gamma);
        let w = self.w + 0.5 * dt * dw;
        let v = self.v + 0.5 * dt * dv;
        let n = (w * w + v.norm_squared()).sqrt();
        UnitQuat { w: w / n, v: v / n }
    }
}

impl Mul for UnitQuat {
    type Output = UnitQuat;

    /// The quaternion product ⊙, renormalized on drift.
    fn mul(self, rhs: UnitQuat) -> UnitQuat {
        UnitQuat {
            w: self.w * rhs.w - self.v.dot(&rhs.v),
            v: self.w * rhs.v + rhs.w * self.v + self.v.cross(&rhs.v),
        }
        .renormalized()
    }
}

impl std::ops::Neg for UnitQuat {
    type Output = UnitQuat;

    fn neg(self) -> UnitQuat {
        UnitQuat {
            w: -self.w,
            v: -self.v,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{exp_so3, normalized_distance};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn rng() -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(0x5155)
    }

    fn random_vec(rng: &mut ChaCha12Rng, scale: f64) -> Vector3<f64> {
        Vector3::new(
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
        )
    }

    fn random_quat(rng: &mut ChaCha12Rng) -> UnitQuat {
        UnitQuat::new(rng.random_range(-1.0..1.0), random_vec(rng, 1.0))
    }

    #[test]
    fn identity_and_basis_products() {
        let i = UnitQuat::from_parts_unchecked(0.0, Vector3::x());
        let j = UnitQuat::from_parts_unchecked(0.0, Vector3::y());
        let k = UnitQuat::from_parts_unchecked(0.0, Vector3::z());
        assert_eq!(UnitQuat::identity() * i, i);
        assert_eq!(i * j, k);
        let mut rng = rng();
        for _ in 0..20 {
            let q = random_quat(&mut rng);
            let p = UnitQuat::identity() * q;
            assert_abs_diff_eq!(p.w, q.w, epsilon = 1e-15);
            assert_abs_diff_eq!(p.v, q.v, epsilon = 1e-15);
        }
    }

    #[test]
    fn product_is_homomorphism() {
        let mut rng = rng();
        for _ in 0..100 {
            let a = random_quat(&mut rng);
            let b = random_quat(&mut rng);
            let lhs = (a * b).to_rotation();
            let rhs = a.to_rotation() * b.to_rotation();
            assert_abs_diff_eq!(*lhs.matrix(), *rhs.matrix(), epsilon = 1e-10);
        }
    }

    #[test]
    fn inverse_is_group_inverse() {
        assert_eq!(UnitQuat::identity().inverse(), UnitQuat::identity());
        let i = UnitQuat::from_parts_unchecked(0.0, Vector3::x());
        assert_eq!(i.inverse().v, -Vector3::x());
        let mut rng = rng();
        for _ in 0..100 {
            let q = random_quat(&mut rng);
            let p = q * q.inverse();
            assert_abs_diff_eq!(p.w, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(p.v, Vector3::zeros(), epsilon = 1e-12);
        }
    }

    #[test]
    fn rotation_map_evaluations() {
        assert_eq!(
            UnitQuat::identity().to_rotation().matrix(),
            &Matrix3::identity()
        );
        // 90° about e1
        let h = std::f64::consts::FRAC_PI_4;
        let q = UnitQuat::new(h.cos(), Vector3::new(h.sin(), 0.0, 0.0));
        let expected = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert_abs_diff_eq!(*q.to_rotation().matrix(), expected, epsilon = 1e-15);
    }

    #[test]
    fn double_cover() {
        let mut rng = rng();
        for _ in 0..100 {
            let q = random_quat(&mut rng);
            assert_abs_diff_eq!(
                *q.to_rotation().matrix(),
                *(-q).to_rotation().matrix(),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn from_rotation_round_trip() {
        assert_eq!(
            UnitQuat::from_rotation(&RotationMatrix::identity()),
            UnitQuat::identity()
        );
        let mut rng = rng();
        for _ in 0..1000 {
            let r = exp_so3(random_vec(&mut rng, 3.1), 1.0);
            let q = UnitQuat::from_rotation(&r);
            assert!(q.w >= 0.0);
            assert_abs_diff_eq!(*q.to_rotation().matrix(), *r.matrix(), epsilon = 1e-9);
        }
    }

    #[test]
    fn from_rotation_half_turn() {
        let r = RotationMatrix::from_matrix(Matrix3::from_diagonal(&Vector3::new(
            -1.0, -1.0, 1.0,
        )))
        .unwrap();
        let q = UnitQuat::from_rotation(&r);
        assert_abs_diff_eq!(q.w, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.v.abs(), Vector3::z(), epsilon = 1e-15);
    }

    #[test]
    fn sandwich_transforms_vectors() {
        // Q^-1 ⊙ [0, v] ⊙ Q = [0, R_Q^T v]
        let mut rng = rng();
        for _ in 0..100 {
            let q = random_quat(&mut rng);
            let v = random_vec(&mut rng, 2.0).normalize();
            let pure = UnitQuat::from_parts_unchecked(0.0, v);
            let s = q.inverse() * pure * q;
            assert_abs_diff_eq!(s.w, 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(s.v, q.to_rotation().transpose() * v, epsilon = 1e-10);
        }
    }

    #[test]
    fn kinematics_step_basics() {
        let q = UnitQuat::identity();
        assert_eq!(q.kinematics_step(Vector3::zeros(), 0.01), q);
        // half turn about e3 in one second
        let stepped = q.kinematics_step(Vector3::new(0.0, 0.0, std::f64::consts::PI), 1.0);
        let target = exp_so3(Vector3::new(0.0, 0.0, std::f64::consts::PI), 1.0);
        assert!(normalized_distance(&stepped.to_rotation().transpose_mul(&target)) < 1e-12);
    }

    #[test]
    fn kinematics_step_matches_matrix_exponential() {
        let mut rng = rng();
        for _ in 0..100 {
            let q = random_quat(&mut rng);
            let gamma = random_vec(&mut rng, 5.0);
            let dt = 0.013;
            let lhs = q.kinematics_step(gamma, dt).to_rotation();
            let rhs = q.to_rotation() * exp_so3(gamma, dt);
            assert_abs_diff_eq!(*lhs.matrix(), *rhs.matrix(), epsilon = 1e-9);
        }
    }

    #[test]
    fn euler_step_is_first_order() {
        let q = UnitQuat::new(0.3, Vector3::new(0.5, -0.2, 0.8));
        let gamma = Vector3::new(0.4, 1.1, -0.7);
        for dt in [1e-3, 1e-4] {
            let exact = q.kinematics_step(gamma, dt);
            let euler = q.kinematics_step_euler(gamma, dt);
            let diff = (exact.w - euler.w).abs() + (exact.v - euler.v).norm();
            assert!(diff < 5.0 * dt * dt, "dt={dt}: diff={diff}");
        }
    }
}
