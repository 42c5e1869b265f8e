use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::linalg::{gaussian_vector, random_rotation};
use super::sphere::check_rotation;
use super::{check_unit_interval, Manifold, Tolerances};
use crate::error::{Error, Result};

/// Point of flat Rⁿ. The wFM here is the weighted arithmetic mean, which
/// makes it the reference space for every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanPoint {
    vec: DVector<f64>,
}

impl EuclideanPoint {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        let vec = DVector::from_vec(v);
        if vec.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("Euclidean point"));
        }
        Ok(Self { vec })
    }

    pub(crate) fn from_trusted(vec: DVector<f64>) -> Self {
        Self { vec }
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.vec
    }

    pub fn as_slice(&self) -> &[f64] {
        self.vec.as_slice()
    }
}

/// Rigid motion `x ↦ R·x + t` with R ∈ SO(n).
#[derive(Debug, Clone, PartialEq)]
pub struct RigidMotion {
    rotation: DMatrix<f64>,
    translation: DVector<f64>,
}

impl RigidMotion {
    pub fn new(rotation: DMatrix<f64>, translation: Vec<f64>) -> Result<Self> {
        check_rotation(&rotation, &Tolerances::default())?;
        if translation.len() != rotation.nrows() {
            return Err(Error::LengthMismatch {
                what: "rotation rows vs translation",
                left: rotation.nrows(),
                right: translation.len(),
            });
        }
        Ok(Self {
            rotation,
            translation: DVector::from_vec(translation),
        })
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &DVector<f64> {
        &self.translation
    }
}

#[derive(Debug, Clone)]
pub struct Euclidean {
    n: usize,
    tol: Tolerances,
}

impl Euclidean {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            tol: Tolerances::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn check_len(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: format!("R^{}", self.n),
                got: format!("R^{}", v.len()),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("Euclidean vector"));
        }
        Ok(())
    }
}

impl Manifold for Euclidean {
    type Point = EuclideanPoint;
    type Vector = DVector<f64>;
    type Isometry = RigidMotion;

    fn name(&self) -> &'static str {
        "euclidean"
    }

    fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    fn check_point(&self, p: &EuclideanPoint) -> Result<()> {
        self.check_len(&p.vec)
    }

    fn distance(&self, p: &EuclideanPoint, q: &EuclideanPoint) -> Result<f64> {
        self.check_len(&p.vec)?;
        self.check_len(&q.vec)?;
        Ok((&p.vec - &q.vec).norm())
    }

    fn log_map(&self, p: &EuclideanPoint, q: &EuclideanPoint) -> Result<DVector<f64>> {
        self.check_len(&p.vec)?;
        self.check_len(&q.vec)?;
        Ok(&q.vec - &p.vec)
    }

    fn exp_map(&self, p: &EuclideanPoint, v: &DVector<f64>) -> Result<EuclideanPoint> {
        self.check_len(&p.vec)?;
        self.check_len(v)?;
        Ok(EuclideanPoint::from_trusted(&p.vec + v))
    }

    fn tangent_norm(&self, _p: &EuclideanPoint, v: &DVector<f64>) -> f64 {
        v.norm()
    }

    fn zero_tangent(&self, _p: &EuclideanPoint) -> DVector<f64> {
        DVector::zeros(self.n)
    }

    fn random_unit_tangent<R: Rng + ?Sized>(&self, _p: &EuclideanPoint, rng: &mut R) -> DVector<f64> {
        loop {
            let g = gaussian_vector(self.n, rng);
            let norm = g.norm();
            if norm > 1e-8 {
                return g / norm;
            }
        }
    }

    /// `(1 − t)·p + t·q`.
    fn geodesic(&self, p: &EuclideanPoint, q: &EuclideanPoint, t: f64) -> Result<EuclideanPoint> {
        check_unit_interval(t)?;
        self.check_len(&p.vec)?;
        self.check_len(&q.vec)?;
        if t == 0.0 {
            return Ok(p.clone());
        }
        Ok(EuclideanPoint::from_trusted(&p.vec + (&q.vec - &p.vec) * t))
    }

    fn act(&self, g: &RigidMotion, p: &EuclideanPoint) -> Result<EuclideanPoint> {
        self.check_point(p)?;
        if g.rotation.nrows() != self.n {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} rotation", self.n),
                got: format!("{}x{}", g.rotation.nrows(), g.rotation.ncols()),
            });
        }
        check_rotation(&g.rotation, &self.tol)?;
        Ok(EuclideanPoint::from_trusted(&g.rotation * &p.vec + &g.translation))
    }

    fn identity_isometry(&self) -> RigidMotion {
        RigidMotion {
            rotation: DMatrix::identity(self.n, self.n),
            translation: DVector::zeros(self.n),
        }
    }

    fn random_isometry<R: Rng + ?Sized>(&self, rng: &mut R) -> RigidMotion {
        RigidMotion {
            rotation: random_rotation(self.n, rng),
            translation: gaussian_vector(self.n, rng),
        }
    }

    fn ball_bound(&self) -> Option<f64> {
        None
    }

    fn project(&self, raw: &DVector<f64>) -> Result<EuclideanPoint> {
        self.check_len(raw)?;
        Ok(EuclideanPoint::from_trusted(raw.clone()))
    }
}
