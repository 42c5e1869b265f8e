use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::manifold::linalg::orthonormalize;
use crate::manifold::{Grassmann, GrassmannPoint, Manifold};

/// Current subspace estimate of a stream.
#[derive(Debug, Clone)]
pub struct SubspaceEstimate {
    pub point: GrassmannPoint,
    /// Vectors consumed, including those of skipped and pending blocks.
    pub samples_seen: usize,
    /// Blocks folded into the estimate.
    pub blocks_used: usize,
    /// Blocks dropped because their vectors were linearly dependent.
    pub skipped_rank_deficient: usize,
    /// Blocks dropped because they were a right angle away from the estimate.
    pub skipped_cut_locus: usize,
}

/// Streaming principal-subspace estimator on Gr(k, n).
///
/// Vectors are grouped into consecutive disjoint blocks of k. Each block is
/// orthonormalized into a point of Gr(k, n) and folded into the running
/// estimate with the inductive mean update of weight `1/blocks`.
#[derive(Debug, Clone)]
pub struct StreamingSubspace {
    manifold: Grassmann,
    pending: Vec<DVector<f64>>,
    estimate: Option<GrassmannPoint>,
    samples_seen: usize,
    blocks_used: usize,
    skipped_rank_deficient: usize,
    skipped_cut_locus: usize,
}

impl StreamingSubspace {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        Ok(Self {
            manifold: Grassmann::new(n, k)?,
            pending: Vec::with_capacity(k),
            estimate: None,
            samples_seen: 0,
            blocks_used: 0,
            skipped_rank_deficient: 0,
            skipped_cut_locus: 0,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.manifold.ambient_dim()
    }

    pub fn sub_dim(&self) -> usize {
        self.manifold.sub_dim()
    }

    pub fn push(&mut self, v: DVector<f64>) -> Result<()> {
        if v.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("R^{}", self.ambient_dim()),
                got: format!("R^{}", v.len()),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("stream vector"));
        }
        self.samples_seen += 1;
        self.pending.push(v);
        if self.pending.len() == self.sub_dim() {
            let block = DMatrix::from_columns(&self.pending);
            self.pending.clear();
            self.fold_block(&block)?;
        }
        Ok(())
    }

    /// Folds an n×k block whose columns span a sample subspace.
    pub fn push_block(&mut self, block: &DMatrix<f64>) -> Result<()> {
        if block.shape() != (self.ambient_dim(), self.sub_dim()) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} block", self.ambient_dim(), self.sub_dim()),
                got: format!("{}x{}", block.nrows(), block.ncols()),
            });
        }
        self.samples_seen += block.ncols();
        self.fold_block(block)
    }

    fn fold_block(&mut self, block: &DMatrix<f64>) -> Result<()> {
        let basis = match orthonormalize(block, self.manifold.tolerances().rank) {
            Ok(b) => b,
            Err(Error::RankDeficient(_)) => {
                self.skipped_rank_deficient += 1;
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        let x = GrassmannPoint::new(basis)?;
        match &self.estimate {
            None => {
                self.estimate = Some(x);
                self.blocks_used = 1;
            }
            Some(m) => {
                let t = 1.0 / (self.blocks_used + 1) as f64;
                match self.manifold.geodesic(m, &x, t) {
                    Ok(next) => {
                        self.estimate = Some(next);
                        self.blocks_used += 1;
                    }
                    Err(Error::OutsideInjectivity(_)) => self.skipped_cut_locus += 1,
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(())
    }

    pub fn estimate(&self) -> Result<SubspaceEstimate> {
        let point = self
            .estimate
            .clone()
            .ok_or(Error::Empty("no full-rank block has been consumed"))?;
        Ok(SubspaceEstimate {
            point,
            samples_seen: self.samples_seen,
            blocks_used: self.blocks_used,
            skipped_rank_deficient: self.skipped_rank_deficient,
            skipped_cut_locus: self.skipped_cut_locus,
        })
    }
}

/// Runs [`StreamingSubspace`] over `vectors` in order. The data are assumed
/// centered.
pub fn stream_principal_subspace<I>(vectors: I, n: usize, k: usize) -> Result<SubspaceEstimate>
where
    I: IntoIterator<Item = DVector<f64>>,
{
    let mut s = StreamingSubspace::new(n, k)?;
    for v in vectors {
        s.push(v)?;
    }
    s.estimate()
}

/// [`stream_principal_subspace`] over the rows of an N×n matrix.
pub fn stream_rows(data: &DMatrix<f64>, k: usize) -> Result<SubspaceEstimate> {
    let n = data.ncols();
    stream_principal_subspace(data.row_iter().map(|r| r.transpose()), n, k)
}
