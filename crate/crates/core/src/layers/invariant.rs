use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::ifme::{wfm_oracle_from, OracleConfig, WeightVector};
use crate::manifold::Manifold;

/// Output of the invariant layer.
#[derive(Debug, Clone)]
pub struct InvariantOutput<P> {
    /// Unweighted Fréchet mean of the inputs.
    pub mean: P,
    /// `oᵢ = d(mean, Zᵢ)`.
    pub distances: DVector<f64>,
}

/// Distances of every input to their unweighted Fréchet mean. The mean is
/// the oracle solution, so the output does not depend on input order.
pub fn invariant_final_layer<M: Manifold>(
    manifold: &M,
    points: &[M::Point],
    cfg: &OracleConfig,
) -> Result<InvariantOutput<M::Point>> {
    let first = points.first().ok_or(Error::Empty("invariant layer inputs"))?;
    invariant_final_layer_from(manifold, points, cfg, first.clone())
}

/// As [`invariant_final_layer`], starting the mean search at `init`.
pub fn invariant_final_layer_from<M: Manifold>(
    manifold: &M,
    points: &[M::Point],
    cfg: &OracleConfig,
    init: M::Point,
) -> Result<InvariantOutput<M::Point>> {
    let w = WeightVector::uniform(points.len())?;
    let mean = wfm_oracle_from(manifold, points, &w, cfg, init)?.point;
    let distances = points
        .iter()
        .map(|z| manifold.distance(&mean, z))
        .collect::<Result<Vec<_>>>()?;
    Ok(InvariantOutput {
        mean,
        distances: DVector::from_vec(distances),
    })
}
