//! Riemannian manifolds used by the wFM layers.
//!
//! Every manifold implements [`Manifold`]: distance, exponential and log
//! maps, geodesic interpolation, isometry actions, sampling in geodesic
//! balls and projection of raw ambient data back onto the manifold.
//!
//! Supported spaces:
//!
//! | manifold | point | tangent | isometries |
//! |----------|-------|---------|------------|
//! | [`Spd`] | n×n SPD matrix | symmetric n×n | `G·X·Gᵀ` |
//! | [`Grassmann`] | n×k orthonormal basis | horizontal n×k (`Xᵀ·Z = 0`) | `Q·X` |
//! | [`Sphere`] | unit vector in Rⁿ | vector orthogonal to p | `R·x` |
//! | [`Euclidean`] | vector in Rⁿ | vector | `R·x + t` |
//!
//! Everything here is a pure function of its inputs. Randomness is drawn from
//! an RNG passed in by the caller.

mod euclidean;
mod grassmann;
pub mod linalg;
mod sphere;
mod spd;

use std::fmt::Debug;
use std::ops::{Add, Mul};

use rand::Rng;

use crate::error::{Error, Result};

pub use euclidean::{Euclidean, EuclideanPoint, RigidMotion};
pub use grassmann::{Grassmann, GrassmannPoint, OrthogonalAction};
pub use sphere::{Rotation, Sphere, SpherePoint};
pub use spd::{Spd, SpdIsometry, SpdMetric, SpdPoint};

/// Numerical tolerances shared by the manifolds. Defaults are tuned for
/// double precision with matrix sizes up to 16.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max |a_ij − a_ji| for a matrix to count as symmetric.
    pub symmetry: f64,
    /// Smallest admissible eigenvalue of an SPD point.
    pub min_eigenvalue: f64,
    /// Floor applied when projecting onto SPD.
    pub eigenvalue_floor: f64,
    /// Max entry of |BᵀB − I| for an orthonormal basis.
    pub orthonormality: f64,
    /// Max |‖x‖ − 1| for a sphere point.
    pub unit_norm: f64,
    /// Max tangent-space violation (asymmetry, normal component).
    pub tangent: f64,
    /// Max entry of |QᵀQ − I| for an orthogonal group element.
    pub group: f64,
    /// Max |det R − 1| for a rotation.
    pub rotation_det: f64,
    /// Max condition number of an SPD congruence.
    pub max_condition: f64,
    /// Sphere points closer than π minus this are treated as antipodal.
    pub antipodal: f64,
    /// Relative singular-value floor below which a basis is rank deficient.
    pub rank: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            symmetry: 1e-10,
            min_eigenvalue: 1e-12,
            eigenvalue_floor: 1e-10,
            orthonormality: 1e-10,
            unit_norm: 1e-12,
            tangent: 1e-8,
            group: 1e-10,
            rotation_det: 1e-8,
            max_condition: 1e8,
            antipodal: 1e-6,
            rank: 1e-10,
        }
    }
}

/// An open geodesic ball `{x : d(center, x) < radius}`.
#[derive(Debug, Clone)]
pub struct BallSpec<P> {
    pub center: P,
    pub radius: f64,
}

impl<P> BallSpec<P> {
    pub fn new(center: P, radius: f64) -> Self {
        Self { center, radius }
    }
}

/// A Riemannian manifold with closed-form geometry.
///
/// Tangent vectors and raw ambient data share the `Vector` type: symmetric
/// matrices for SPD, n×k matrices for Grassmann, plain vectors for the sphere
/// and Euclidean space.
pub trait Manifold: Send + Sync + Debug {
    type Point: Clone + Debug + Send + Sync;
    type Vector: Clone
        + Debug
        + Send
        + Sync
        + Add<Output = Self::Vector>
        + Mul<f64, Output = Self::Vector>;
    type Isometry: Clone + Debug + Send + Sync;

    fn name(&self) -> &'static str;

    fn tolerances(&self) -> &Tolerances;

    /// Validates that `p` is a point of this manifold (shape and invariants).
    fn check_point(&self, p: &Self::Point) -> Result<()>;

    fn distance(&self, p: &Self::Point, q: &Self::Point) -> Result<f64>;

    /// Riemannian logarithm: the tangent vector at `p` pointing to `q` with
    /// norm `distance(p, q)`.
    fn log_map(&self, p: &Self::Point, q: &Self::Point) -> Result<Self::Vector>;

    fn exp_map(&self, p: &Self::Point, v: &Self::Vector) -> Result<Self::Point>;

    /// Norm of `v` in the tangent space at `p`.
    fn tangent_norm(&self, p: &Self::Point, v: &Self::Vector) -> f64;

    fn zero_tangent(&self, p: &Self::Point) -> Self::Vector;

    /// `Σ wᵢ·Log_p(qᵢ)`. Implementations may share per-base-point work.
    fn weighted_log_sum(
        &self,
        p: &Self::Point,
        qs: &[Self::Point],
        weights: &[f64],
    ) -> Result<Self::Vector> {
        let mut acc = self.zero_tangent(p);
        for (q, &w) in qs.iter().zip(weights) {
            acc = acc + self.log_map(p, q)? * w;
        }
        Ok(acc)
    }

    /// A uniformly oriented tangent vector at `p` with unit norm.
    fn random_unit_tangent<R: Rng + ?Sized>(&self, p: &Self::Point, rng: &mut R) -> Self::Vector;

    /// Point on the shortest geodesic from `p` (t = 0) to `q` (t = 1).
    fn geodesic(&self, p: &Self::Point, q: &Self::Point, t: f64) -> Result<Self::Point> {
        check_unit_interval(t)?;
        if t == 0.0 {
            return Ok(p.clone());
        }
        if t == 1.0 {
            return Ok(q.clone());
        }
        let v = self.log_map(p, q)?;
        self.exp_map(p, &(v * t))
    }

    /// Applies the group element `g` to `p`.
    fn act(&self, g: &Self::Isometry, p: &Self::Point) -> Result<Self::Point>;

    fn identity_isometry(&self) -> Self::Isometry;

    fn random_isometry<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Isometry;

    /// Largest admissible ball radius, `None` when balls of any radius are
    /// regular (nonpositive curvature or flat).
    fn ball_bound(&self) -> Option<f64>;

    fn check_ball(&self, ball: &BallSpec<Self::Point>) -> Result<()> {
        self.check_point(&ball.center)?;
        let bound = self.ball_bound().unwrap_or(f64::INFINITY);
        if !(ball.radius > 0.0) || !ball.radius.is_finite() || ball.radius >= bound {
            return Err(Error::InvalidBall {
                radius: ball.radius,
                bound,
            });
        }
        Ok(())
    }

    /// Draws a point strictly inside `ball`.
    fn random_point_in_ball<R: Rng + ?Sized>(
        &self,
        ball: &BallSpec<Self::Point>,
        rng: &mut R,
    ) -> Result<Self::Point> {
        self.check_ball(ball)?;
        let dir = self.random_unit_tangent(&ball.center, rng);
        // shrink slightly so rounding in exp cannot land on the boundary
        let r = ball.radius * rng.random::<f64>() * (1.0 - 1e-9);
        self.exp_map(&ball.center, &(dir * r))
    }

    /// Maps raw ambient data to the nearest valid point.
    fn project(&self, raw: &Self::Vector) -> Result<Self::Point>;
}

pub(crate) fn check_unit_interval(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param("t", format!("{t} is outside [0, 1]")));
    }
    Ok(())
}
