use nalgebra::DMatrix;
use rand::Rng;

use super::linalg::{
    gaussian_matrix, max_asymmetry, min_eigenvalue, orthonormality_residual, random_orthogonal,
    reconstruct, sqrt_and_inv_sqrt, sym_eigen, sym_exp, sym_log, symmetrize,
};
use super::{check_unit_interval, Manifold, Tolerances};
use crate::error::{Error, Result};

/// Symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdPoint {
    mat: DMatrix<f64>,
}

impl SpdPoint {
    /// Validates symmetry and positive definiteness with default tolerances.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        check_spd(&mat, &Tolerances::default())?;
        Ok(Self { mat })
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut mat = DMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            mat[(i, i)] = d;
        }
        Self::new(mat)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mat: DMatrix::identity(n, n),
        }
    }

    /// Wraps an already-symmetrized result of manifold arithmetic.
    pub(crate) fn from_trusted(mat: DMatrix<f64>) -> Self {
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }
}

fn check_spd(mat: &DMatrix<f64>, tol: &Tolerances) -> Result<()> {
    if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
        return Err(Error::DimensionMismatch {
            expected: "non-empty square matrix".into(),
            got: format!("{}x{}", mat.nrows(), mat.ncols()),
        });
    }
    if mat.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("SPD matrix"));
    }
    let asym = max_asymmetry(mat);
    if asym > tol.symmetry {
        return Err(Error::NotOnManifold(format!("asymmetry {asym:e}")));
    }
    let lmin = min_eigenvalue(mat);
    if !(lmin > tol.min_eigenvalue) {
        return Err(Error::NotOnManifold(format!("smallest eigenvalue {lmin:e}")));
    }
    Ok(())
}

/// Riemannian metric on SPD(n).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpdMetric {
    /// `d(P, Q) = ‖logm(P^{-1/2} Q P^{-1/2})‖_F`; invariant under every
    /// congruence `X ↦ G X Gᵀ`.
    #[default]
    AffineInvariant,
    /// `d(P, Q) = ‖logm P − logm Q‖_F`; invariant under orthogonal
    /// conjugation. Tangent vectors are expressed in the matrix-log chart,
    /// so `exp_P(V) = expm(logm P + V)`.
    LogEuclidean,
}

/// Group element acting on SPD matrices by congruence.
#[derive(Debug, Clone, PartialEq)]
pub enum SpdIsometry {
    /// `X ↦ Q X Qᵀ` with Q orthogonal; an isometry for both metrics.
    Orthogonal(DMatrix<f64>),
    /// `X ↦ G X Gᵀ` with G invertible; an isometry of the affine-invariant
    /// metric only.
    Congruence(DMatrix<f64>),
}

impl SpdIsometry {
    pub fn orthogonal(q: DMatrix<f64>) -> Result<Self> {
        check_orthogonal(&q, Tolerances::default().group)?;
        Ok(Self::Orthogonal(q))
    }

    pub fn congruence(g: DMatrix<f64>) -> Result<Self> {
        check_invertible(&g, Tolerances::default().max_condition)?;
        Ok(Self::Congruence(g))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        match self {
            Self::Orthogonal(m) | Self::Congruence(m) => m,
        }
    }
}

pub(crate) fn check_orthogonal(q: &DMatrix<f64>, tol: f64) -> Result<()> {
    if q.nrows() != q.ncols() {
        return Err(Error::InvalidGroupElement(format!(
            "{}x{} matrix is not square",
            q.nrows(),
            q.ncols()
        )));
    }
    let res = orthonormality_residual(q);
    if !(res <= tol) {
        return Err(Error::InvalidGroupElement(format!(
            "QᵀQ deviates from I by {res:e}"
        )));
    }
    Ok(())
}

fn check_invertible(g: &DMatrix<f64>, max_cond: f64) -> Result<()> {
    if g.nrows() != g.ncols() {
        return Err(Error::InvalidGroupElement("congruence must be square".into()));
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("congruence"));
    }
    let sv = g.clone().singular_values();
    let cond = sv.max() / sv.min();
    if !(cond < max_cond) {
        return Err(Error::InvalidGroupElement(format!(
            "condition number {cond:e} exceeds {max_cond:e}"
        )));
    }
    Ok(())
}

/// The manifold of n×n symmetric positive-definite matrices.
#[derive(Debug, Clone)]
pub struct Spd {
    dim: usize,
    metric: SpdMetric,
    tol: Tolerances,
}

impl Spd {
    pub fn new(dim: usize, metric: SpdMetric) -> Self {
        Self {
            dim,
            metric,
            tol: Tolerances::default(),
        }
    }

    pub fn affine_invariant(dim: usize) -> Self {
        Self::new(dim, SpdMetric::AffineInvariant)
    }

    pub fn log_euclidean(dim: usize) -> Self {
        Self::new(dim, SpdMetric::LogEuclidean)
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> SpdMetric {
        self.metric
    }

    fn check_same(&self, p: &SpdPoint, q: &SpdPoint) -> Result<()> {
        for x in [p, q] {
            if x.dim() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: format!("{0}x{0}", self.dim),
                    got: format!("{0}x{0}", x.dim()),
                });
            }
            if x.mat.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("SPD matrix"));
            }
        }
        Ok(())
    }

    fn check_tangent(&self, p: &SpdPoint, v: &DMatrix<f64>) -> Result<()> {
        if v.nrows() != self.dim || v.ncols() != self.dim || p.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0}", self.dim),
                got: format!("{}x{}", v.nrows(), v.ncols()),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("tangent vector"));
        }
        let asym = max_asymmetry(v);
        if asym > self.tol.tangent * v.amax().max(1.0) {
            return Err(Error::NotInTangentSpace(format!(
                "SPD tangent must be symmetric (asymmetry {asym:e})"
            )));
        }
        Ok(())
    }

    /// `P^{-1/2} Q P^{-1/2}` together with the square-root factors of P.
    fn whitened(&self, p: &SpdPoint, q: &SpdPoint) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let (s, is) = sqrt_and_inv_sqrt(&p.mat);
        let inner = symmetrize(&(&is * &q.mat * &is));
        (s, is, inner)
    }
}

impl Manifold for Spd {
    type Point = SpdPoint;
    type Vector = DMatrix<f64>;
    type Isometry = SpdIsometry;

    fn name(&self) -> &'static str {
        "spd"
    }

    fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    fn check_point(&self, p: &SpdPoint) -> Result<()> {
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0}", self.dim),
                got: format!("{0}x{0}", p.dim()),
            });
        }
        check_spd(&p.mat, &self.tol)
    }

    fn distance(&self, p: &SpdPoint, q: &SpdPoint) -> Result<f64> {
        self.check_same(p, q)?;
        let d = match self.metric {
            SpdMetric::AffineInvariant => {
                let (_, _, inner) = self.whitened(p, q);
                let eig = sym_eigen(&inner);
                eig.eigenvalues
                    .iter()
                    .map(|&mu| mu.max(f64::MIN_POSITIVE).ln().powi(2))
                    .sum::<f64>()
                    .sqrt()
            }
            SpdMetric::LogEuclidean => (sym_log(&p.mat) - sym_log(&q.mat)).norm(),
        };
        Ok(d)
    }

    fn log_map(&self, p: &SpdPoint, q: &SpdPoint) -> Result<DMatrix<f64>> {
        self.check_same(p, q)?;
        Ok(match self.metric {
            SpdMetric::AffineInvariant => {
                let (s, _, inner) = self.whitened(p, q);
                symmetrize(&(&s * sym_log(&inner) * &s))
            }
            SpdMetric::LogEuclidean => sym_log(&q.mat) - sym_log(&p.mat),
        })
    }

    fn exp_map(&self, p: &SpdPoint, v: &DMatrix<f64>) -> Result<SpdPoint> {
        self.check_tangent(p, v)?;
        let v = symmetrize(v);
        let mat = match self.metric {
            SpdMetric::AffineInvariant => {
                let (s, is) = sqrt_and_inv_sqrt(&p.mat);
                let inner = symmetrize(&(&is * v * &is));
                symmetrize(&(&s * sym_exp(&inner) * &s))
            }
            SpdMetric::LogEuclidean => sym_exp(&(sym_log(&p.mat) + v)),
        };
        Ok(SpdPoint::from_trusted(mat))
    }

    fn weighted_log_sum(
        &self,
        p: &SpdPoint,
        qs: &[SpdPoint],
        weights: &[f64],
    ) -> Result<DMatrix<f64>> {
        for q in qs {
            self.check_same(p, q)?;
        }
        match self.metric {
            SpdMetric::AffineInvariant => {
                // P^{1/2} (Σ wᵢ logm(P^{-1/2} Qᵢ P^{-1/2})) P^{1/2}
                let (s, is) = sqrt_and_inv_sqrt(&p.mat);
                let mut acc = DMatrix::zeros(self.dim, self.dim);
                for (q, &w) in qs.iter().zip(weights) {
                    let inner = symmetrize(&(&is * &q.mat * &is));
                    acc += sym_log(&inner) * w;
                }
                Ok(symmetrize(&(&s * acc * &s)))
            }
            SpdMetric::LogEuclidean => {
                let lp = sym_log(&p.mat);
                let mut acc = DMatrix::zeros(self.dim, self.dim);
                for (q, &w) in qs.iter().zip(weights) {
                    acc += (sym_log(&q.mat) - &lp) * w;
                }
                Ok(acc)
            }
        }
    }

    fn tangent_norm(&self, p: &SpdPoint, v: &DMatrix<f64>) -> f64 {
        match self.metric {
            SpdMetric::AffineInvariant => {
                let (_, is) = sqrt_and_inv_sqrt(&p.mat);
                (&is * v * &is).norm()
            }
            SpdMetric::LogEuclidean => v.norm(),
        }
    }

    fn zero_tangent(&self, _p: &SpdPoint) -> DMatrix<f64> {
        DMatrix::zeros(self.dim, self.dim)
    }

    fn random_unit_tangent<R: Rng + ?Sized>(&self, p: &SpdPoint, rng: &mut R) -> DMatrix<f64> {
        let mut s = symmetrize(&gaussian_matrix(self.dim, self.dim, rng));
        let norm = s.norm();
        s /= norm;
        match self.metric {
            SpdMetric::AffineInvariant => {
                let (sq, _) = sqrt_and_inv_sqrt(&p.mat);
                symmetrize(&(&sq * s * &sq))
            }
            SpdMetric::LogEuclidean => s,
        }
    }

    fn geodesic(&self, p: &SpdPoint, q: &SpdPoint, t: f64) -> Result<SpdPoint> {
        check_unit_interval(t)?;
        self.check_same(p, q)?;
        if t == 0.0 {
            return Ok(p.clone());
        }
        if t == 1.0 {
            return Ok(q.clone());
        }
        let mat = match self.metric {
            SpdMetric::AffineInvariant => {
                // P^{1/2} (P^{-1/2} Q P^{-1/2})^t P^{1/2}
                let (s, _, inner) = self.whitened(p, q);
                let pow = reconstruct(&sym_eigen(&inner), |mu| mu.powf(t));
                symmetrize(&(&s * pow * &s))
            }
            SpdMetric::LogEuclidean => {
                sym_exp(&(sym_log(&p.mat) * (1.0 - t) + sym_log(&q.mat) * t))
            }
        };
        Ok(SpdPoint::from_trusted(mat))
    }

    fn act(&self, g: &SpdIsometry, p: &SpdPoint) -> Result<SpdPoint> {
        self.check_point(p)?;
        let m = g.matrix();
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} group element", self.dim),
                got: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        match g {
            SpdIsometry::Orthogonal(q) => check_orthogonal(q, self.tol.group)?,
            SpdIsometry::Congruence(g) => {
                if self.metric != SpdMetric::AffineInvariant {
                    return Err(Error::InvalidGroupElement(
                        "general congruences are isometries of the affine-invariant metric only"
                            .into(),
                    ));
                }
                check_invertible(g, self.tol.max_condition)?;
            }
        }
        let out = SpdPoint::from_trusted(symmetrize(&(m * &p.mat * m.transpose())));
        self.check_point(&out)?;
        Ok(out)
    }

    fn identity_isometry(&self) -> SpdIsometry {
        SpdIsometry::Orthogonal(DMatrix::identity(self.dim, self.dim))
    }

    fn random_isometry<R: Rng + ?Sized>(&self, rng: &mut R) -> SpdIsometry {
        let q1 = random_orthogonal(self.dim, rng);
        match self.metric {
            SpdMetric::AffineInvariant => {
                let q2 = random_orthogonal(self.dim, rng);
                let scales =
                    DMatrix::from_diagonal(&nalgebra::DVector::from_fn(self.dim, |_, _| {
                        rng.random_range(-1.0..1.0_f64).exp()
                    }));
                SpdIsometry::Congruence(q1 * scales * q2)
            }
            SpdMetric::LogEuclidean => SpdIsometry::Orthogonal(q1),
        }
    }

    fn ball_bound(&self) -> Option<f64> {
        // nonpositive curvature: every ball is regular
        None
    }

    fn project(&self, raw: &DMatrix<f64>) -> Result<SpdPoint> {
        if raw.nrows() != self.dim || raw.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0}", self.dim),
                got: format!("{}x{}", raw.nrows(), raw.ncols()),
            });
        }
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("SPD projection input"));
        }
        let sym = symmetrize(raw);
        let eig = sym_eigen(&sym);
        let floor = self.tol.eigenvalue_floor;
        if eig.eigenvalues.min() >= floor {
            return Ok(SpdPoint::from_trusted(sym));
        }
        Ok(SpdPoint::from_trusted(reconstruct(&eig, |l| l.max(floor))))
    }
}
