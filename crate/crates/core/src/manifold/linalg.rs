//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Eigen-decomposition of the symmetric part of `m`.
pub fn sym_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(symmetrize(m))
}

/// `V · diag(f(λ)) · Vᵀ` for the eigen-decomposition `V · diag(λ) · Vᵀ`.
pub fn reconstruct(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = f(lambda);
        scaled.column_mut(j).scale_mut(s);
    }
    symmetrize(&(scaled * v.transpose()))
}

/// Applies a scalar function to a symmetric matrix through its spectrum.
pub fn sym_apply(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    reconstruct(&sym_eigen(m), f)
}

pub fn sym_log(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(m, f64::ln)
}

pub fn sym_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(m, f64::exp)
}

/// `(m^{1/2}, m^{-1/2})` from a single eigen-decomposition.
pub fn sqrt_and_inv_sqrt(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let eig = sym_eigen(m);
    (reconstruct(&eig, f64::sqrt), reconstruct(&eig, |l| 1.0 / l.sqrt()))
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).eigenvalues.min()
}

/// Largest entry of |MᵀM − I|.
pub fn orthonormality_residual(m: &DMatrix<f64>) -> f64 {
    let gram = m.transpose() * m;
    let k = gram.nrows();
    (gram - DMatrix::identity(k, k)).amax()
}

/// Nearest matrix with orthonormal columns (polar factor `U·Vᵀ` of the thin
/// SVD). Returns an error when the columns are numerically dependent.
pub fn orthonormalize(m: &DMatrix<f64>, rank_tol: f64) -> Result<DMatrix<f64>> {
    if m.ncols() > m.nrows() {
        return Err(Error::RankDeficient(format!(
            "{} columns in dimension {}",
            m.ncols(),
            m.nrows()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("basis"));
    }
    let svd = thin_svd(m);
    let smax = svd.s.max();
    let smin = svd.s.min();
    if !(smax > 0.0) || smin <= rank_tol * smax.max(1.0) {
        return Err(Error::RankDeficient(format!(
            "smallest singular value {smin:e} (largest {smax:e})"
        )));
    }
    Ok(svd.u * svd.v_t)
}

/// Thin SVD `A = U·diag(s)·Vᵀ` with `s` sorted in decreasing order.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

impl ThinSvd {
    pub fn recompose(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * &self.v_t
    }
}

/// One-sided Jacobi SVD. nalgebra 0.35 loses accuracy on nearly rank
/// deficient inputs once singular vectors are requested, so every
/// factorization that needs U or V goes through here.
pub fn thin_svd(a: &DMatrix<f64>) -> ThinSvd {
    if a.nrows() < a.ncols() {
        let t = thin_svd(&a.transpose());
        return ThinSvd { u: t.v_t.transpose(), s: t.s, v_t: t.u.transpose() };
    }
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = DMatrix::zeros(m, n);
    let mut vs = DMatrix::zeros(n, n);
    let mut s = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        s[dst] = norms[src];
        vs.set_column(dst, &v.column(src));
        if norms[src] > 0.0 {
            u.set_column(dst, &(w.column(src) / norms[src]));
        }
    }
    // exact zero singular values leave U columns to be completed
    for j in 0..n {
        if s[j] > 0.0 {
            continue;
        }
        for e in 0..m {
            let mut cand = DVector::<f64>::zeros(m);
            cand[e] = 1.0;
            for i in 0..n {
                if i != j && (s[i] > 0.0 || i < j) {
                    let proj = u.column(i).dot(&cand);
                    cand -= u.column(i) * proj;
                }
            }
            let norm = cand.norm();
            if norm > 0.5 {
                u.set_column(j, &(cand / norm));
                break;
            }
        }
    }
    ThinSvd { u, s, v_t: vs.transpose() }
}

fn rotate_columns(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let (a, b) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = c * a - s * b;
        m[(i, q)] = s * a + c * b;
    }
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the sign
/// convention `diag(R) > 0`).
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = gaussian_matrix(n, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random element of SO(n).
pub fn random_rotation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut q = random_orthogonal(n, rng);
    if n > 0 && q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

/// Rotation by `angle` in the plane of the first two coordinates.
pub fn plane_rotation(n: usize, angle: f64) -> DMatrix<f64> {
    let mut r = DMatrix::identity(n, n);
    if n >= 2 {
        let (s, c) = angle.sin_cos();
        r[(0, 0)] = c;
        r[(0, 1)] = -s;
        r[(1, 0)] = s;
        r[(1, 1)] = c;
    }
    r
}

/// Writes a matrix as row-major CSV, one row per line.
pub fn to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
