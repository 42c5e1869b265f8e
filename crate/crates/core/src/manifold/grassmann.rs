use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use rand::Rng;

use super::linalg::{gaussian_matrix, orthonormality_residual, orthonormalize, random_orthogonal, thin_svd};
use super::spd::check_orthogonal;
use super::{Manifold, Tolerances};
use crate::error::{Error, Result};

/// A k-dimensional subspace of Rⁿ, stored as an n×k orthonormal basis.
///
/// Two bases that differ by a right k×k orthogonal factor describe the same
/// point; compare points with [`GrassmannPoint::subspace_distance`].
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannPoint {
    basis: DMatrix<f64>,
}

impl GrassmannPoint {
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        check_basis(&basis, Tolerances::default().orthonormality)?;
        Ok(Self { basis })
    }

    /// span(e_1, ..., e_k) in Rⁿ.
    pub fn coordinate(n: usize, k: usize) -> Self {
        Self {
            basis: DMatrix::identity(n, k),
        }
    }

    pub(crate) fn from_trusted(basis: DMatrix<f64>) -> Self {
        Self { basis }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn sub_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Orthogonal projector `B·Bᵀ` onto the subspace.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Principal angles to `other` in ascending order.
    pub fn principal_angles(&self, other: &GrassmannPoint) -> Vec<f64> {
        principal_angles(&self.basis, &other.basis)
    }

    /// ℓ₂ norm of the principal angles (the geodesic distance).
    pub fn subspace_distance(&self, other: &GrassmannPoint) -> f64 {
        self.principal_angles(other)
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
    }
}

fn check_basis(basis: &DMatrix<f64>, tol: f64) -> Result<()> {
    if basis.ncols() == 0 || basis.ncols() > basis.nrows() {
        return Err(Error::DimensionMismatch {
            expected: "n×k basis with 1 ≤ k ≤ n".into(),
            got: format!("{}x{}", basis.nrows(), basis.ncols()),
        });
    }
    if basis.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("Grassmann basis"));
    }
    let res = orthonormality_residual(basis);
    if !(res <= tol) {
        return Err(Error::NotOnManifold(format!(
            "basis columns deviate from orthonormal by {res:e}"
        )));
    }
    Ok(())
}

/// Principal angles between the column spans of two orthonormal bases.
///
/// Cosines come from the singular values of `XᵀY` and sines from those of
/// `(I − XXᵀ)Y`; pairing them through `atan2` keeps small and near-right
/// angles accurate.
fn principal_angles(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Vec<f64> {
    let xty = x.transpose() * y;
    let mut cos: Vec<f64> = xty.clone().singular_values().iter().copied().collect();
    let residual = y - x * &xty;
    let mut sin: Vec<f64> = residual.singular_values().iter().copied().collect();
    cos.sort_by(|a, b| b.total_cmp(a));
    sin.sort_by(|a, b| a.total_cmp(b));
    cos.iter()
        .zip(sin.iter())
        .map(|(&c, &s)| s.max(0.0).atan2(c.max(0.0)))
        .collect()
}

/// Left multiplication `X ↦ Q·X` by an orthogonal n×n matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalAction(DMatrix<f64>);

impl OrthogonalAction {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        check_orthogonal(&q, Tolerances::default().group)?;
        Ok(Self(q))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// The Grassmannian Gr(k, n) with its canonical metric.
#[derive(Debug, Clone)]
pub struct Grassmann {
    n: usize,
    k: usize,
    tol: Tolerances,
}

impl Grassmann {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::param("k", format!("need 1 ≤ k ≤ n, got k={k}, n={n}")));
        }
        Ok(Self {
            n,
            k,
            tol: Tolerances::default(),
        })
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn sub_dim(&self) -> usize {
        self.k
    }

    fn check_shape(&self, m: &DMatrix<f64>) -> Result<()> {
        if m.nrows() != self.n || m.ncols() != self.k {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.n, self.k),
                got: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("Grassmann matrix"));
        }
        Ok(())
    }
}

impl Manifold for Grassmann {
    type Point = GrassmannPoint;
    type Vector = DMatrix<f64>;
    type Isometry = OrthogonalAction;

    fn name(&self) -> &'static str {
        "grassmann"
    }

    fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    fn check_point(&self, p: &GrassmannPoint) -> Result<()> {
        self.check_shape(&p.basis)?;
        check_basis(&p.basis, self.tol.orthonormality)
    }

    fn distance(&self, p: &GrassmannPoint, q: &GrassmannPoint) -> Result<f64> {
        self.check_shape(&p.basis)?;
        self.check_shape(&q.basis)?;
        Ok(p.subspace_distance(q))
    }

    /// `Log_X(Y) = U·atan(Σ)·Vᵀ` where `U·Σ·Vᵀ = (I − XXᵀ)·Y·(XᵀY)⁻¹`.
    fn log_map(&self, p: &GrassmannPoint, q: &GrassmannPoint) -> Result<DMatrix<f64>> {
        self.check_shape(&p.basis)?;
        self.check_shape(&q.basis)?;
        let x = &p.basis;
        let y = &q.basis;
        let xty = x.transpose() * y;
        let sv = xty.clone().singular_values();
        if sv.min() < 1e-12 {
            return Err(Error::OutsideInjectivity(
                "largest principal angle reaches π/2".into(),
            ));
        }
        let horizontal = y - x * &xty;
        // T = H·M⁻¹  ⇔  Mᵀ·Tᵀ = Hᵀ
        let tt = xty
            .transpose()
            .lu()
            .solve(&horizontal.transpose())
            .ok_or_else(|| Error::OutsideInjectivity("XᵀY is singular".into()))?;
        let svd = thin_svd(&tt.transpose());
        let v_t = svd.v_t;
        let mut scaled = svd.u;
        for (j, s) in svd.s.iter().enumerate() {
            let a = s.atan();
            scaled.column_mut(j).scale_mut(a);
        }
        // remove the roundoff component along X that the inverse amplifies
        let z = scaled * v_t;
        Ok(&z - x * (x.transpose() * &z))
    }

    /// `Exp_X(Z) = X·V·cos(Σ)·Vᵀ + U·sin(Σ)·Vᵀ` for the thin SVD `Z = U·Σ·Vᵀ`.
    fn exp_map(&self, p: &GrassmannPoint, v: &DMatrix<f64>) -> Result<GrassmannPoint> {
        self.check_shape(&p.basis)?;
        self.check_shape(v)?;
        let x = &p.basis;
        let normal = (x.transpose() * v).amax();
        if normal > self.tol.tangent * v.norm().max(1.0) {
            return Err(Error::NotInTangentSpace(format!(
                "Grassmann tangent must satisfy XᵀZ = 0 (found {normal:e})"
            )));
        }
        if v.norm() == 0.0 {
            return Ok(p.clone());
        }
        let svd = thin_svd(v);
        let v_t = svd.v_t;
        let mut xv = x * v_t.transpose();
        let mut us = svd.u;
        for (j, s) in svd.s.iter().enumerate() {
            let (sin, cos) = s.sin_cos();
            xv.column_mut(j).scale_mut(cos);
            us.column_mut(j).scale_mut(sin);
        }
        let y = (xv + us) * v_t;
        let y = orthonormalize(&y, self.tol.rank)?;
        Ok(GrassmannPoint::from_trusted(y))
    }

    fn tangent_norm(&self, _p: &GrassmannPoint, v: &DMatrix<f64>) -> f64 {
        v.norm()
    }

    fn zero_tangent(&self, _p: &GrassmannPoint) -> DMatrix<f64> {
        DMatrix::zeros(self.n, self.k)
    }

    fn random_unit_tangent<R: Rng + ?Sized>(
        &self,
        p: &GrassmannPoint,
        rng: &mut R,
    ) -> DMatrix<f64> {
        let g = gaussian_matrix(self.n, self.k, rng);
        let z = &g - &p.basis * (p.basis.transpose() * &g);
        let norm = z.norm();
        // Gr(n, n) is a single point, its tangent space is {0}
        if norm < 1e-12 {
            return DMatrix::zeros(self.n, self.k);
        }
        z / norm
    }

    fn act(&self, g: &OrthogonalAction, p: &GrassmannPoint) -> Result<GrassmannPoint> {
        self.check_point(p)?;
        let q = g.matrix();
        if q.nrows() != self.n {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} group element", self.n),
                got: format!("{}x{}", q.nrows(), q.ncols()),
            });
        }
        check_orthogonal(q, self.tol.group)?;
        Ok(GrassmannPoint::from_trusted(q * &p.basis))
    }

    fn identity_isometry(&self) -> OrthogonalAction {
        OrthogonalAction(DMatrix::identity(self.n, self.n))
    }

    fn random_isometry<R: Rng + ?Sized>(&self, rng: &mut R) -> OrthogonalAction {
        OrthogonalAction(random_orthogonal(self.n, rng))
    }

    fn ball_bound(&self) -> Option<f64> {
        // largest principal angle must stay below π/2 for Log to exist
        Some(FRAC_PI_2)
    }

    fn project(&self, raw: &DMatrix<f64>) -> Result<GrassmannPoint> {
        self.check_shape(raw)?;
        Ok(GrassmannPoint::from_trusted(orthonormalize(raw, self.tol.rank)?))
    }
}
