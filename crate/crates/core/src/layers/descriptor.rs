use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::manifold::linalg::symmetrize;
use crate::manifold::SpdPoint;

/// Default diagonal regularizer of [`covariance_descriptor`].
pub const DEFAULT_COVARIANCE_EPS: f64 = 1e-6;

/// Per-frame covariance of feature maps.
///
/// `features[f]` is a C×L matrix: C channels observed at L locations. Each
/// frame is centered over its locations and mapped to `(1/L)·Xc·Xcᵀ + eps·I`.
pub fn covariance_descriptor(features: &[DMatrix<f64>], eps: f64) -> Result<Vec<SpdPoint>> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::param("eps", format!("{eps} must be positive")));
    }
    let Some(first) = features.first() else {
        return Err(Error::Empty("feature frames"));
    };
    let (c, l) = first.shape();
    if c == 0 || l == 0 {
        return Err(Error::param("features", "need at least one channel and one location"));
    }
    features
        .iter()
        .map(|x| {
            if x.shape() != (c, l) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{c}x{l}"),
                    got: format!("{}x{}", x.nrows(), x.ncols()),
                });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("features"));
            }
            let mut xc = x.clone();
            for mut row in xc.row_iter_mut() {
                let mean = row.mean();
                row.add_scalar_mut(-mean);
            }
            let cov = &xc * xc.transpose() / l as f64 + DMatrix::identity(c, c) * eps;
            SpdPoint::new(symmetrize(&cov))
        })
        .collect()
}
