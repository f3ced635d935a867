//! Exact SO(3) algebra and its parameterizations.
//!
//! Provides the skew map `[.]x` and its inverse `vex`, the anti-symmetric
//! projection onto the Lie algebra so(3), the normalized Euclidean distance
//! `|R|_I = Tr(I - R) / 4` in `[0, 1]`, and the conversions between rotation
//! matrices, angle-axis pairs and Rodriguez vectors `rho = tan(angle/2) * axis`.
//!
//! All functions are pure over value types and safe for concurrent use.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::ops::Mul;

use crate::{Error, Result};

/// Library tolerance constants, single source of truth for the property tests.
pub mod tol {
    /// Orthonormality / determinant tolerance for checked rotation construction.
    pub const ROTATION: f64 = 1e-9;
    /// Skew-symmetry tolerance for checked `vex`.
    pub const SKEW: f64 = 1e-9;
    /// Unit-axis tolerance for angle-axis construction.
    pub const UNIT_AXIS: f64 = 1e-9;
    /// Guard on Tr(R) + 1 below which the Rodriguez chart inverse is refused.
    pub const CHART_GUARD: f64 = 1e-6;
    /// Rotation angles below this use a Taylor expansion of the exponential map.
    pub const SMALL_ANGLE: f64 = 1e-8;
}

/// A skew-symmetric 3x3 matrix, element of the Lie algebra so(3).
///
/// Constructed via [`hat`] or [`anti_sym_projection`]; skewness holds exactly
/// by construction and is never re-checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewMatrix(Matrix3<f64>);

impl SkewMatrix {
    /// The underlying 3x3 matrix.
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Inverse of the skew map: reads `alpha` back out of `[alpha]x`.
    ///
    /// Exact for exact inputs; no tolerance check is needed because the type
    /// guarantees skewness.
    pub fn vex(&self) -> Vector3<f64> {
        Vector3::new(self.0[(2, 1)], self.0[(0, 2)], self.0[(1, 0)])
    }
}

/// The skew map `[.]x : R^3 -> so(3)`, with `hat(a) * b = a x b`.
pub fn hat(alpha: Vector3<f64>) -> SkewMatrix {
    SkewMatrix(Matrix3::new(
        0.0, -alpha.z, alpha.y, //
        alpha.z, 0.0, -alpha.x, //
        -alpha.y, alpha.x, 0.0,
    ))
}

/// Checked `vex` for arbitrary matrices: verifies skew-symmetry within `tol::SKEW`.
pub fn vex(m: &Matrix3<f64>) -> Result<Vector3<f64>> {
    vex_with_tol(m, tol::SKEW)
}

/// [`vex`] with a caller-supplied skew-symmetry tolerance.
pub fn vex_with_tol(m: &Matrix3<f64>, tol: f64) -> Result<Vector3<f64>> {
    let asymmetry = (m + m.transpose()).norm();
    if asymmetry > tol {
        return Err(Error::NotSkewSymmetric { asymmetry, tol });
    }
    Ok(Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]))
}

/// Anti-symmetric projection onto so(3): `P_a(B) = (B - B^T) / 2`.
pub fn anti_sym_projection(b: &Matrix3<f64>) -> SkewMatrix {
    SkewMatrix((b - b.transpose()) * 0.5)
}

/// A rotation matrix on SO(3): orthonormal with determinant +1.
///
/// Serializes as three row arrays; deserialization re-checks the invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl Serialize for RotationMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: [[f64; 3]; 3] = [
            [self.0[(0, 0)], self.0[(0, 1)], self.0[(0, 2)]],
            [self.0[(1, 0)], self.0[(1, 1)], self.0[(1, 2)]],
            [self.0[(2, 0)], self.0[(2, 1)], self.0[(2, 2)]],
        ];
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RotationMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(deserializer)?;
        let m = Matrix3::new(
            rows[0][0], rows[0][1], rows[0][2], //
            rows[1][0], rows[1][1], rows[1][2], //
            rows[2][0], rows[2][1], rows[2][2],
        );
        RotationMatrix::from_matrix(m).map_err(serde::de::Error::custom)
    }
}

impl RotationMatrix {
    /// The identity rotation.
    pub fn identity() -> Self {
        RotationMatrix(Matrix3::identity())
    }

    /// Checked construction: requires `|m^T m - I|_F <= tol` and `|det m - 1| <= tol`
    /// with the default tolerance [`tol::ROTATION`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        Self::from_matrix_with_tol(m, tol::ROTATION)
    }

    /// [`RotationMatrix::from_matrix`] with a caller-supplied tolerance.
    pub fn from_matrix_with_tol(m: Matrix3<f64>, tol: f64) -> Result<Self> {
        let residual = (m.transpose() * m - Matrix3::identity()).norm();
        let det = m.determinant();
        if residual > tol || (det - 1.0).abs() > tol {
            return Err(Error::NotARotation { residual, det, tol });
        }
        Ok(RotationMatrix(m))
    }

    /// Unchecked construction for matrices that are rotations by construction
    /// (exponential map outputs, products of rotations).
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        RotationMatrix(m)
    }

    /// Angle-axis construction `I + sin(a) [u]x + (1 - cos(a)) [u]x^2`.
    ///
    /// The axis must be unit norm within [`tol::UNIT_AXIS`].
    pub fn from_angle_axis(angle: f64, axis: Vector3<f64>) -> Result<Self> {
        let norm = axis.norm();
        if (norm - 1.0).abs() > tol::UNIT_AXIS {
            return Err(Error::NonUnitAxis {
                norm,
                tol: tol::UNIT_AXIS,
            });
        }
        let k = hat(axis).0;
        Ok(RotationMatrix(
            Matrix3::identity() + angle.sin() * k + (1.0 - angle.cos()) * (k * k),
        ))
    }

    /// The underlying 3x3 matrix.
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Consumes the wrapper.
    pub fn into_inner(self) -> Matrix3<f64> {
        self.0
    }

    /// The inverse rotation, `R^T`.
    pub fn transpose(&self) -> Self {
        RotationMatrix(self.0.transpose())
    }

    /// `R^T * other`, the relative rotation from `self` to `other`.
    pub fn transpose_mul(&self, other: &Self) -> Self {
        RotationMatrix(self.0.tr_mul(&other.0))
    }

    /// Trace of the matrix, in `[-1, 3]` for rotations.
    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Frobenius norm of `R^T R - I`; zero for an exact rotation.
    pub fn orthonormality_residual(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for RotationMatrix {
    type Output = Vector3<f64>;

    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// Composition map `Upsilon_a(R) = vex(P_a(R))`.
///
/// For `R` built from the Rodriguez vector `rho` this equals
/// `2 rho / (1 + |rho|^2)`; it is the correction direction used by every
/// filter in [`crate::filters`].
pub fn upsilon_a(r: &RotationMatrix) -> Vector3<f64> {
    anti_sym_projection(&r.0).vex()
}

/// Normalized Euclidean distance `|R|_I = Tr(I - R) / 4`, clamped to `[0, 1]`.
///
/// Zero at the identity, one at 180° rotations; equals
/// `|rho|^2 / (1 + |rho|^2)` in the Rodriguez chart.
pub fn normalized_distance(r: &RotationMatrix) -> f64 {
    (0.25 * (3.0 - r.trace())).clamp(0.0, 1.0)
}

/// A Rodriguez parameter vector `rho = tan(angle/2) * axis`.
///
/// Charts all of SO(3) except the 180° rotations (`Tr(R) = -1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RodriguezVector(pub Vector3<f64>);

impl RodriguezVector {
    /// The zero vector, mapping to the identity rotation.
    pub fn zero() -> Self {
        RodriguezVector(Vector3::zeros())
    }

    /// Map to SO(3):
    /// `R = ((1 - |rho|^2) I + 2 rho rho^T + 2 [rho]x) / (1 + |rho|^2)`.
    pub fn to_rotation(&self) -> RotationMatrix {
        let rho = self.0;
        let n2 = rho.norm_squared();
        let m = (1.0 - n2) * Matrix3::identity()
            + 2.0 * rho * rho.transpose()
            + 2.0 * hat(rho).0;
        RotationMatrix(m / (1.0 + n2))
    }

    /// Chart inverse `rho = Upsilon_a(R) / (2 (1 - |R|_I)) = 2 Upsilon_a(R) / (1 + Tr R)`.
    ///
    /// Fails with [`Error::ChartSingularity`] when `Tr(R) + 1 <= tol::CHART_GUARD`,
    /// i.e. within the chart's 180° exclusion.
    pub fn from_rotation(r: &RotationMatrix) -> Result<Self> {
        let trace_plus_one = r.trace() + 1.0;
        if trace_plus_one <= tol::CHART_GUARD {
            return Err(Error::ChartSingularity {
                trace_plus_one,
                guard: tol::CHART_GUARD,
            });
        }
        Ok(RodriguezVector(2.0 * upsilon_a(r) / trace_plus_one))
    }
}

/// Exponential-map step: the exact rotation through `|omega| * dt` about `omega`.
///
/// Uses a Taylor expansion of the `sin` / `(1 - cos)` coefficients below
/// [`tol::SMALL_ANGLE`] to avoid 0/0; returns the identity for `omega = 0`.
pub fn exp_so3(omega: Vector3<f64>, dt: f64) -> RotationMatrix {
    let v = omega * dt;
    let theta = v.norm();
    let k = hat(v).0;
    let (a, b) = if theta < tol::SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    RotationMatrix(Matrix3::identity() + a * k + b * (k * k))
}
