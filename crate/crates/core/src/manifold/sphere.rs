use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::linalg::{gaussian_vector, random_rotation};
use super::spd::check_orthogonal;
use super::{check_unit_interval, Manifold, Tolerances};
use crate::error::{Error, Result};

/// Unit vector in Rⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    vec: DVector<f64>,
}

impl SpherePoint {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        let vec = DVector::from_vec(v);
        check_unit(&vec, Tolerances::default().unit_norm)?;
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

fn check_unit(v: &DVector<f64>, tol: f64) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Empty("sphere point"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("sphere point"));
    }
    let dev = (v.norm() - 1.0).abs();
    if !(dev <= tol) {
        return Err(Error::NotOnManifold(format!("‖x‖ − 1 = {dev:e}")));
    }
    Ok(())
}

/// Element of SO(n).
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation(DMatrix<f64>);

impl Rotation {
    pub fn new(r: DMatrix<f64>) -> Result<Self> {
        let tol = Tolerances::default();
        check_rotation(&r, &tol)?;
        Ok(Self(r))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub(crate) fn from_trusted(r: DMatrix<f64>) -> Self {
        Self(r)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

pub(crate) fn check_rotation(r: &DMatrix<f64>, tol: &Tolerances) -> Result<()> {
    check_orthogonal(r, tol.group)?;
    let det = r.determinant();
    if !((det - 1.0).abs() <= tol.rotation_det) {
        return Err(Error::InvalidGroupElement(format!(
            "rotation determinant {det} is not +1"
        )));
    }
    Ok(())
}

/// The unit sphere in Rⁿ with the great-circle metric.
#[derive(Debug, Clone)]
pub struct Sphere {
    n: usize,
    tol: Tolerances,
}

impl Sphere {
    /// Sphere of unit vectors in Rⁿ (an (n−1)-dimensional manifold).
    pub fn new(n: usize) -> Self {
        Self {
            n,
            tol: Tolerances::default(),
        }
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn ambient_dim(&self) -> usize {
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
            return Err(Error::NonFinite("sphere vector"));
        }
        Ok(())
    }

    /// Great-circle distance via `atan2(‖q − ⟨p,q⟩p‖, ⟨p,q⟩)`, which equals
    /// `acos(clamp(⟨p,q⟩))` but stays accurate for nearly equal points.
    fn angle(p: &DVector<f64>, q: &DVector<f64>) -> f64 {
        let c = p.dot(q);
        let s = (q - p * c).norm();
        s.atan2(c)
    }
}

impl Manifold for Sphere {
    type Point = SpherePoint;
    type Vector = DVector<f64>;
    type Isometry = Rotation;

    fn name(&self) -> &'static str {
        "sphere"
    }

    fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    fn check_point(&self, p: &SpherePoint) -> Result<()> {
        self.check_len(&p.vec)?;
        check_unit(&p.vec, self.tol.unit_norm)
    }

    fn distance(&self, p: &SpherePoint, q: &SpherePoint) -> Result<f64> {
        self.check_len(&p.vec)?;
        self.check_len(&q.vec)?;
        Ok(Self::angle(&p.vec, &q.vec))
    }

    fn log_map(&self, p: &SpherePoint, q: &SpherePoint) -> Result<DVector<f64>> {
        self.check_len(&p.vec)?;
        self.check_len(&q.vec)?;
        let theta = Self::angle(&p.vec, &q.vec);
        if theta >= PI - self.tol.antipodal {
            return Err(Error::OutsideInjectivity("antipodal sphere points".into()));
        }
        let w = &q.vec - &p.vec * p.vec.dot(&q.vec);
        let wn = w.norm();
        if wn == 0.0 {
            return Ok(DVector::zeros(self.n));
        }
        Ok(w * (theta / wn))
    }

    fn exp_map(&self, p: &SpherePoint, v: &DVector<f64>) -> Result<SpherePoint> {
        self.check_len(&p.vec)?;
        self.check_len(v)?;
        let normal = p.vec.dot(v).abs();
        if normal > self.tol.tangent * v.norm().max(1.0) {
            return Err(Error::NotInTangentSpace(format!(
                "sphere tangent must be orthogonal to the base point (⟨p,v⟩ = {normal:e})"
            )));
        }
        let t = v.norm();
        if t == 0.0 {
            return Ok(p.clone());
        }
        let out = &p.vec * t.cos() + v * (t.sin() / t);
        let norm = out.norm();
        Ok(SpherePoint::from_trusted(out / norm))
    }

    fn tangent_norm(&self, _p: &SpherePoint, v: &DVector<f64>) -> f64 {
        v.norm()
    }

    fn zero_tangent(&self, _p: &SpherePoint) -> DVector<f64> {
        DVector::zeros(self.n)
    }

    fn random_unit_tangent<R: Rng + ?Sized>(&self, p: &SpherePoint, rng: &mut R) -> DVector<f64> {
        loop {
            let g = gaussian_vector(self.n, rng);
            let w = &g - &p.vec * p.vec.dot(&g);
            let norm = w.norm();
            if norm > 1e-8 {
                return w / norm;
            }
        }
    }

    /// Spherical linear interpolation.
    fn geodesic(&self, p: &SpherePoint, q: &SpherePoint, t: f64) -> Result<SpherePoint> {
        check_unit_interval(t)?;
        let v = self.log_map(p, q)?;
        if t == 0.0 {
            return Ok(p.clone());
        }
        if t == 1.0 {
            return Ok(q.clone());
        }
        self.exp_map(p, &(v * t))
    }

    fn act(&self, g: &Rotation, p: &SpherePoint) -> Result<SpherePoint> {
        self.check_point(p)?;
        let r = g.matrix();
        if r.nrows() != self.n {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} rotation", self.n),
                got: format!("{}x{}", r.nrows(), r.ncols()),
            });
        }
        check_rotation(r, &self.tol)?;
        Ok(SpherePoint::from_trusted(r * &p.vec))
    }

    fn identity_isometry(&self) -> Rotation {
        Rotation::identity(self.n)
    }

    fn random_isometry<R: Rng + ?Sized>(&self, rng: &mut R) -> Rotation {
        Rotation::from_trusted(random_rotation(self.n, rng))
    }

    fn ball_bound(&self) -> Option<f64> {
        // regular ball radius π/(2√Δ) with sectional curvature Δ = 1
        Some(FRAC_PI_2)
    }

    fn project(&self, raw: &DVector<f64>) -> Result<SpherePoint> {
        self.check_len(raw)?;
        let norm = raw.norm();
        if norm == 0.0 {
            return Err(Error::param("vector", "cannot project the zero vector onto the sphere"));
        }
        if (norm - 1.0).abs() <= self.tol.unit_norm {
            return Ok(SpherePoint::from_trusted(raw.clone()));
        }
        Ok(SpherePoint::from_trusted(raw / norm))
    }
}
