//! Static attitude determination from weighted vector pairs (Wahba's problem).
//!
//! Builds the attitude profile matrix `B = sum_i s_i b_i a_i^T` from unit
//! vector pairs `(a_i, b_i)` observed in the inertial and body frames, factors
//! it with a dedicated 3x3 Jacobi SVD, and returns
//! `R_y = V+ U+^T` where `U+ = U diag(1, 1, det U)` and
//! `V+ = V diag(1, 1, det V)`. The determinant fix guarantees a proper
//! rotation even for reflection-prone measurement sets, and the result
//! minimizes the Wahba cost `J(R) = 1 - sum_i s_i b_i^T R^T a_i` over SO(3).

use nalgebra::{Matrix3, Vector3};

use crate::so3::RotationMatrix;
use crate::{Error, Result};

/// Unit-norm tolerance for measurement vectors.
const UNIT_TOL: f64 = 1e-9;
/// Singular values below this count as zero for the rank check.
const RANK_TOL: f64 = 1e-9;

/// A weighted set of (inertial, body) unit-vector pairs.
///
/// Weights are confidence levels normalized to sum to one; at least three
/// pairs are required (two physical sensors plus their cross product, or
/// three direct measurements).
#[derive(Debug, Clone)]
pub struct VectorPairSet {
    pairs: Vec<(Vector3<f64>, Vector3<f64>)>,
    weights: Vec<f64>,
}

impl VectorPairSet {
    /// Builds a set with equal weights `1/n`.
    pub fn equal_weights(pairs: Vec<(Vector3<f64>, Vector3<f64>)>) -> Result<Self> {
        let n = pairs.len();
        Self::with_weights(pairs, vec![1.0; n])
    }

    /// Builds a set with the given nonnegative weights, normalized to sum to one.
    pub fn with_weights(
        pairs: Vec<(Vector3<f64>, Vector3<f64>)>,
        raw_weights: Vec<f64>,
    ) -> Result<Self> {
        if pairs.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "need at least 3 vector pairs, got {}",
                pairs.len()
            )));
        }
        if raw_weights.len() != pairs.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} pairs",
                raw_weights.len(),
                pairs.len()
            )));
        }
        for (i, (a, b)) in pairs.iter().enumerate() {
            for (name, v) in [("inertial", a), ("body", b)] {
                if (v.norm() - 1.0).abs() > UNIT_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "{name} vector {i} has norm {:.12}, expected unit",
                        v.norm()
                    )));
                }
            }
        }
        let sum: f64 = raw_weights.iter().sum();
        if !sum.is_finite() || sum <= 0.0 || raw_weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidArgument(
                "weights must be nonnegative with positive sum".into(),
            ));
        }
        let weights = raw_weights.into_iter().map(|w| w / sum).collect();
        Ok(VectorPairSet { pairs, weights })
    }

    /// The (inertial, body) pairs.
    pub fn pairs(&self) -> &[(Vector3<f64>, Vector3<f64>)] {
        &self.pairs
    }

    /// The normalized confidence weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The attitude profile matrix `B = sum_i s_i b_i a_i^T`.
    pub fn profile_matrix(&self) -> Matrix3<f64> {
        let mut b = Matrix3::zeros();
        for ((a, bv), s) in self.pairs.iter().zip(&self.weights) {
            b += *s * bv * a.transpose();
        }
        b
    }
}

/// Wahba cost `J(R) = 1 - sum_i s_i b_i^T R^T a_i = 1 - Tr(R^T B^T)`.
pub fn wahba_cost(set: &VectorPairSet, r: &RotationMatrix) -> f64 {
    1.0 - (r.matrix().transpose() * set.profile_matrix().transpose()).trace()
}

/// Reconstructs the attitude `R_y` from the vector-pair set.
///
/// Fails with [`Error::DegenerateGeometry`] when the two smallest singular
/// values of `B` both vanish (pairs do not span two directions).
pub fn svd_reconstruct(set: &VectorPairSet) -> Result<RotationMatrix> {
    let b = set.profile_matrix();
    let (u, s, v) = svd3(&b);
    if s[1] < RANK_TOL {
        return Err(Error::DegenerateGeometry {
            reason: format!(
                "profile matrix has rank < 2 (singular values {:.3e}, {:.3e}, {:.3e})",
                s[0], s[1], s[2]
            ),
        });
    }
    let u_plus = fix_last_column(&u);
    let v_plus = fix_last_column(&v);
    Ok(RotationMatrix::from_matrix_unchecked(
        v_plus * u_plus.transpose(),
    ))
}

/// Multiplies the last column by the determinant, mapping O(3) into SO(3).
fn fix_last_column(m: &Matrix3<f64>) -> Matrix3<f64> {
    let mut out = *m;
    if m.determinant() < 0.0 {
        out.set_column(2, &(-m.column(2)));
    }
    out
}

/// Dedicated 3x3 singular value decomposition `A = U diag(s) V^T`.
///
/// Eigen-decomposes `A^T A` by cyclic Jacobi rotations (quadratically
/// convergent for symmetric 3x3), sorts singular values descending and
/// recovers `U` from `A V`, completing a near-null third column with the
/// cross product of the first two so `U` stays exactly orthonormal.
pub fn svd3(a: &Matrix3<f64>) -> (Matrix3<f64>, Vector3<f64>, Matrix3<f64>) {
    let mut s = a.transpose() * a;
    let mut v = Matrix3::identity();

    for _sweep in 0..30 {
        let off = (s[(0, 1)].powi(2) + s[(0, 2)].powi(2) + s[(1, 2)].powi(2)).sqrt();
        if off < 1e-30 + 1e-15 * s.trace().abs() {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = s[(p, q)];
            if apq == 0.0 {
                continue;
            }
            // Jacobi rotation zeroing s[(p, q)]
            let tau = (s[(q, q)] - s[(p, p)]) / (2.0 * apq);
            let t = if tau >= 0.0 {
                1.0 / (tau + (1.0 + tau * tau).sqrt())
            } else {
                -1.0 / (-tau + (1.0 + tau * tau).sqrt())
            };
            let c = 1.0 / (1.0 + t * t).sqrt();
            let sn = t * c;
            let mut j = Matrix3::identity();
            j[(p, p)] = c;
            j[(q, q)] = c;
            j[(p, q)] = sn;
            j[(q, p)] = -sn;
            s = j.transpose() * s * j;
            s[(p, q)] = 0.0;
            s[(q, p)] = 0.0;
            v *= j;
        }
    }

    // sort eigenvalues descending, permuting the eigenvector columns
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| s[(j, j)].partial_cmp(&s[(i, i)]).unwrap());
    let eigs = Vector3::new(
        s[(order[0], order[0])].max(0.0),
        s[(order[1], order[1])].max(0.0),
        s[(order[2], order[2])].max(0.0),
    );
    let v_sorted = Matrix3::from_columns(&[
        v.column(order[0]).into_owned(),
        v.column(order[1]).into_owned(),
        v.column(order[2]).into_owned(),
    ]);

    let sing = eigs.map(f64::sqrt);
    let tiny = 1e-13 * sing[0].max(1.0);
    let u0 = if sing[0] > tiny {
        (a * v_sorted.column(0)) / sing[0]
    } else {
        Vector3::x()
    };
    let u1 = if sing[1] > tiny {
        (a * v_sorted.column(1)) / sing[1]
    } else {
        // rank <= 1: any unit vector orthogonal to u0
        let pick = if u0.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        u0.cross(&pick).normalize()
    };
    // re-orthogonalize against u0 to absorb Jacobi convergence error
    let u1 = (u1 - u0.dot(&u1) * u0).normalize();
    let u2 = if sing[2] > tiny {
        let raw = a * v_sorted.column(2);
        let c = u0.cross(&u1);
        if c.dot(&raw) >= 0.0 {
            c
        } else {
            -c
        }
    } else {
        u0.cross(&u1)
    };
    let u = Matrix3::from_columns(&[u0, u1, u2]);
    (u, sing, v_sorted)
}
