//! Attitude filtering on the Special Orthogonal Group SO(3).
//!
//! This crate implements a family of complementary attitude observers that
//! fuse biased, noisy rate-gyro readings with vector measurements (e.g.
//! accelerometer / magnetometer directions):
//!
//! - a deterministic passive complementary filter,
//! - a nonlinear stochastic filter derived in the Ito sense, and
//! - a nonlinear stochastic filter derived in the Stratonovich sense,
//!
//! together with quaternion-form variants of the two stochastic filters.
//! The stochastic filters adapt online estimates of the gyro bias and of the
//! bound on the angular-velocity noise covariance, and use a correction gain
//! that grows near 180° attitude error for fast large-error recovery.
//!
//! Supporting machinery includes exact SO(3) algebra and its Rodriguez-vector
//! and angle-axis charts ([`so3`]), unit-quaternion algebra ([`quat`]),
//! static attitude reconstruction from weighted vector pairs via a dedicated
//! 3x3 SVD ([`wahba`]), ground-truth/SDE synthesis with the Wong-Zakai drift
//! correction ([`sim`]), and a seeded, byte-reproducible Monte-Carlo harness
//! ([`harness`]) driven by TOML scenarios ([`scenario`]).
//!
//! The `so3-sim` binary exposes the harness on the command line; see the
//! repository README for the CSV and report schemas.

pub mod euler;
pub mod filters;
pub mod harness;
pub mod quat;
pub mod scenario;
pub mod sim;
pub mod so3;
pub mod wahba;

pub use filters::{FilterGains, FilterKind, FilterState};
pub use quat::UnitQuat;
pub use scenario::Scenario;
pub use so3::{RodriguezVector, RotationMatrix};

use thiserror::Error;

/// Errors surfaced by the attitude library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A matrix expected to be skew-symmetric is not, beyond tolerance.
    #[error("matrix is not skew-symmetric: |A + A^T| = {asymmetry:.3e} exceeds {tol:.1e}")]
    NotSkewSymmetric { asymmetry: f64, tol: f64 },

    /// A matrix failed the rotation-matrix invariants (orthonormality, det = +1).
    #[error("matrix is not a rotation: orthonormality residual {residual:.3e}, det {det:.6} (tol {tol:.1e})")]
    NotARotation { residual: f64, det: f64, tol: f64 },

    /// A rotation axis was expected to be unit norm.
    #[error("axis norm {norm:.6} is not unit within {tol:.1e}")]
    NonUnitAxis { norm: f64, tol: f64 },

    /// The Rodriguez chart excludes rotations at (or numerically at) 180°.
    #[error("rotation is too close to 180°: Tr(R) + 1 = {trace_plus_one:.3e} <= {guard:.1e}")]
    ChartSingularity { trace_plus_one: f64, guard: f64 },

    /// A Rodriguez-vector trajectory blew up towards the 180° singularity.
    #[error("Rodriguez trajectory escaped the chart: |rho| = {norm:.3e}")]
    ChartEscape { norm: f64 },

    /// The filter attitude error reached 180° where no correction direction exists.
    #[error("attitude error is at 180° (1 - |R~|_I = {margin:.3e}); filter correction is undefined")]
    NearSingularity { margin: f64 },

    /// Vector-measurement geometry does not span three dimensions.
    #[error("degenerate measurement geometry: {reason}")]
    DegenerateGeometry { reason: String },

    /// Generic precondition violation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A trial failed at a specific integration step.
    #[error("trial failed at step {step} (t = {t:.6} s): {source}")]
    TrialStep {
        step: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
