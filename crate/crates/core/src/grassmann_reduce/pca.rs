use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::manifold::linalg::{sym_eigen, symmetrize};
use crate::manifold::GrassmannPoint;

/// Smallest eigen-gap `λ_k − λ_{k+1}` for which the top-k subspace is
/// considered well defined.
pub const MIN_EIGEN_GAP: f64 = 1e-10;

/// Column means of an N×n data matrix.
pub fn column_means(data: &DMatrix<f64>) -> nalgebra::DVector<f64> {
    data.row_mean().transpose()
}

/// `(1/N)·XcᵀXc` for the column-centered data.
pub fn sample_covariance(data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if data.nrows() == 0 || data.ncols() == 0 {
        return Err(Error::Empty("data"));
    }
    let mean = data.row_mean();
    let mut xc = data.clone();
    for mut row in xc.row_iter_mut() {
        row -= &mean;
    }
    Ok(symmetrize(&(xc.transpose() * &xc / data.nrows() as f64)))
}

/// Top-k eigenvectors of the sample covariance, together with all
/// eigenvalues in descending order.
pub fn pca_with_spectrum(data: &DMatrix<f64>, k: usize) -> Result<(GrassmannPoint, Vec<f64>)> {
    let n = data.ncols();
    if k == 0 || k > n {
        return Err(Error::param("k", format!("must lie in 1..={n}")));
    }
    if data.nrows() < k {
        return Err(Error::param("data", format!("need at least k = {k} rows, got {}", data.nrows())));
    }
    let eig = sym_eigen(&sample_covariance(data)?);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if k < n && values[k - 1] - values[k] < MIN_EIGEN_GAP {
        return Err(Error::IllPosed(format!(
            "eigen-gap {:e} between components {k} and {}",
            values[k - 1] - values[k],
            k + 1
        )));
    }
    let basis = DMatrix::from_columns(&order[..k].iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
    Ok((GrassmannPoint::new(basis)?, values))
}

/// Principal k-subspace of the rows of `data`.
pub fn pca_oracle(data: &DMatrix<f64>, k: usize) -> Result<GrassmannPoint> {
    Ok(pca_with_spectrum(data, k)?.0)
}
