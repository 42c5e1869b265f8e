use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::layers::{sigmoid, weight_penalty};
use crate::manifold::linalg::{orthonormalize, sym_eigen, thin_svd};
use crate::manifold::{Grassmann, GrassmannPoint, Manifold};

/// Weighted subspace average of the row blocks of a centered matrix.
#[derive(Debug, Clone)]
pub struct BlockAverage {
    pub subspace: GrassmannPoint,
    pub blocks_used: usize,
    pub skipped_rank_deficient: usize,
    pub skipped_cut_locus: usize,
}

/// Groups the rows of `fc` into consecutive blocks of k, turns each block into
/// the span of its rows and folds the spans together with the inductive mean
/// update. Block b carries weight `σ(theta[b mod len])`; a trailing partial
/// block is ignored.
pub fn weighted_block_average(fc: &DMatrix<f64>, k: usize, theta: &[f64]) -> Result<BlockAverage> {
    let (n_rows, dim) = fc.shape();
    if k == 0 || k > dim {
        return Err(Error::param("k", format!("must lie in 1..={dim}")));
    }
    if n_rows < k {
        return Err(Error::param("F", format!("need at least k = {k} rows, got {n_rows}")));
    }
    if theta.is_empty() {
        return Err(Error::Empty("theta"));
    }
    let manifold = Grassmann::new(dim, k)?;
    let rank_tol = manifold.tolerances().rank;
    let mut mean: Option<GrassmannPoint> = None;
    let mut total = 0.0;
    let mut used = 0;
    let mut skipped_rank_deficient = 0;
    let mut skipped_cut_locus = 0;
    for b in 0..n_rows / k {
        let rows = fc.rows(b * k, k).transpose();
        let basis = match orthonormalize(&rows, rank_tol) {
            Ok(basis) => basis,
            Err(Error::RankDeficient(_)) => {
                skipped_rank_deficient += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let x = GrassmannPoint::new(basis)?;
        let w = sigmoid(theta[b % theta.len()]);
        match &mean {
            None => {
                mean = Some(x);
                total = w;
                used = 1;
            }
            Some(m) => match manifold.geodesic(m, &x, w / (total + w)) {
                Ok(next) => {
                    mean = Some(next);
                    total += w;
                    used += 1;
                }
                Err(Error::OutsideInjectivity(_)) => skipped_cut_locus += 1,
                Err(e) => return Err(e),
            },
        }
    }
    let subspace = mean.ok_or_else(|| Error::RankDeficient("every row block is rank deficient".into()))?;
    Ok(BlockAverage {
        subspace,
        blocks_used: used,
        skipped_rank_deficient,
        skipped_cut_locus,
    })
}

/// Centers the rows of `f`, returning the centered copy and the row mean.
pub fn center_rows(f: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mean = f.row_mean();
    let mut fc = f.clone();
    for mut row in fc.row_iter_mut() {
        row -= &mean;
    }
    (fc, mean.transpose())
}

/// Output of [`grassmann_avg_layer`].
#[derive(Debug, Clone)]
pub struct AvgLayerOutput {
    /// N×k coordinates of the centered rows in the averaged subspace.
    pub projected: DMatrix<f64>,
    pub subspace: GrassmannPoint,
    pub mean: DVector<f64>,
    pub blocks_used: usize,
    pub skipped: usize,
}

/// Stateless form of the averaging layer: center, average the row-block
/// spans, project. The returned coordinates use the basis of
/// [`canonical_basis`].
pub fn grassmann_avg_layer(f: &DMatrix<f64>, k: usize, theta: &[f64]) -> Result<AvgLayerOutput> {
    let (fc, mean) = center_rows(f);
    let avg = weighted_block_average(&fc, k, theta)?;
    let basis = canonical_basis(avg.subspace.basis(), &fc);
    Ok(AvgLayerOutput {
        projected: &fc * &basis,
        subspace: avg.subspace,
        mean,
        blocks_used: avg.blocks_used,
        skipped: avg.skipped_rank_deficient + avg.skipped_cut_locus,
    })
}

/// Rotates an orthonormal basis within its span so the columns follow the
/// principal axes of the projected data, largest variance first, each column
/// signed so its largest entry is positive.
pub fn canonical_basis(basis: &DMatrix<f64>, fc: &DMatrix<f64>) -> DMatrix<f64> {
    let z = fc * basis;
    let eig = sym_eigen(&(z.transpose() * &z));
    let mut order: Vec<usize> = (0..basis.ncols()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = basis * &eig.eigenvectors.select_columns(&order);
    for mut col in out.column_iter_mut() {
        let pivot = col.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
    out
}

/// Rotates `basis` within its span to the orthonormal frame closest to
/// `reference` (orthogonal Procrustes).
pub fn align_basis(basis: &DMatrix<f64>, reference: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = thin_svd(&(basis.transpose() * reference));
    basis * (svd.u * svd.v_t)
}

/// Learnable Grassmann averaging and projection block.
///
/// In training mode the subspace and row mean are recomputed from the batch.
/// The in-span frame is fixed by Procrustes alignment to the previously
/// stored basis so downstream layers see consistent coordinates. Evaluation
/// mode reuses the stored mean and basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannAvgLayer {
    pub k: usize,
    pub theta: Vec<f64>,
    pub lambda: f64,
    mean: Option<DVector<f64>>,
    basis: Option<DMatrix<f64>>,
}

/// Fitted state of a [`GrassmannAvgLayer`] on one input.
#[derive(Debug, Clone)]
pub struct LayerFit {
    pub mean: DVector<f64>,
    pub basis: DMatrix<f64>,
    pub centered: DMatrix<f64>,
    pub skipped: usize,
}

impl LayerFit {
    pub fn projected(&self) -> DMatrix<f64> {
        &self.centered * &self.basis
    }
}

impl GrassmannAvgLayer {
    /// `blocks` raw weights initialised to uniform `σ(θ) = 1/blocks`.
    pub fn new(k: usize, blocks: usize, lambda: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("latent_k", "must be positive"));
        }
        if blocks == 0 {
            return Err(Error::param("blocks", "must be positive"));
        }
        let t = if blocks == 1 { 0.0 } else { crate::layers::logit(1.0 / blocks as f64) };
        Ok(Self {
            k,
            theta: vec![t; blocks],
            lambda,
            mean: None,
            basis: None,
        })
    }

    pub fn blocks(&self) -> usize {
        self.theta.len()
    }

    pub fn param_count(&self) -> usize {
        self.theta.len()
    }

    pub fn penalty(&self) -> f64 {
        weight_penalty(&self.theta, self.lambda)
    }

    pub fn weight_sum_deviation(&self) -> f64 {
        (self.theta.iter().map(|&t| sigmoid(t)).sum::<f64>() - 1.0).abs()
    }

    pub fn stored_basis(&self) -> Option<&DMatrix<f64>> {
        self.basis.as_ref()
    }

    pub fn stored_mean(&self) -> Option<&DVector<f64>> {
        self.mean.as_ref()
    }

    /// Fits mean and basis to `f` with raw weights `theta`, without touching
    /// the stored state.
    pub fn fit_with(&self, f: &DMatrix<f64>, theta: &[f64]) -> Result<LayerFit> {
        let (centered, mean) = center_rows(f);
        let avg = weighted_block_average(&centered, self.k, theta)?;
        let basis = match &self.basis {
            Some(reference) if reference.shape() == avg.subspace.basis().shape() => {
                align_basis(avg.subspace.basis(), reference)
            }
            _ => canonical_basis(avg.subspace.basis(), &centered),
        };
        Ok(LayerFit {
            mean,
            basis,
            centered,
            skipped: avg.skipped_rank_deficient + avg.skipped_cut_locus,
        })
    }

    /// Training mode refits on `f` and stores the result; evaluation mode
    /// projects with the stored state.
    pub fn forward(&mut self, f: &DMatrix<f64>, train_mode: bool) -> Result<LayerFit> {
        if train_mode {
            let fit = self.fit_with(f, &self.theta.clone())?;
            self.mean = Some(fit.mean.clone());
            self.basis = Some(fit.basis.clone());
            return Ok(fit);
        }
        let (mean, basis) = match (&self.mean, &self.basis) {
            (Some(m), Some(b)) => (m.clone(), b.clone()),
            _ => return Err(Error::param("train_mode", "evaluation before the layer was fitted")),
        };
        if mean.len() != f.ncols() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} columns", mean.len()),
                got: format!("{} columns", f.ncols()),
            });
        }
        let mut centered = f.clone();
        let mt = mean.transpose();
        for mut row in centered.row_iter_mut() {
            row -= &mt;
        }
        Ok(LayerFit {
            mean,
            basis,
            centered,
            skipped: 0,
        })
    }
}
