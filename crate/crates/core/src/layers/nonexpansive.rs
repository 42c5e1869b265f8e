use crate::error::{Error, Result};
use crate::ifme::{wfm_oracle, OracleConfig, WeightVector};
use crate::manifold::Manifold;

/// A weight at or above `1 − TRIVIAL_MARGIN` (after normalization) makes the
/// choice trivial.
pub const TRIVIAL_MARGIN: f64 = 1e-9;

/// Denominators below this report a ratio of zero.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionReport {
    /// `d(wFM(X, α), wFM(Y, β))`.
    pub numerator: f64,
    /// `max_{i,j} d(X̃ᵢ, Yⱼ)` over the tiled embedding of X.
    pub denominator: f64,
    pub ratio: f64,
}

impl ContractionReport {
    pub fn is_nonexpansive(&self, slack: f64) -> bool {
        self.ratio <= 1.0 + slack
    }
}

/// `X̃ᵢ = X_{i mod N}` for `i < m` (zero-based form of the cyclic embedding).
pub fn tile<P: Clone>(xs: &[P], m: usize) -> Vec<P> {
    (0..m).map(|i| xs[i % xs.len()].clone()).collect()
}

fn check_nontrivial(w: &WeightVector, name: &'static str) -> Result<()> {
    if w.normalized().iter().any(|&x| x >= 1.0 - TRIVIAL_MARGIN) {
        return Err(Error::param(name, "trivial weights (a single weight carries all mass)"));
    }
    Ok(())
}

/// Compares the distance between two weighted Fréchet means with the largest
/// pairwise distance between the sets. Requires `|X| ≤ |Y|`.
pub fn nonexpansive_check<M: Manifold>(
    manifold: &M,
    xs: &[M::Point],
    ys: &[M::Point],
    alphas: &WeightVector,
    betas: &WeightVector,
    cfg: &OracleConfig,
) -> Result<ContractionReport> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::Empty("point sets"));
    }
    if xs.len() > ys.len() {
        return Err(Error::param("xs", "the first set must not be larger than the second"));
    }
    check_nontrivial(alphas, "alphas")?;
    check_nontrivial(betas, "betas")?;
    let mx = wfm_oracle(manifold, xs, alphas, cfg)?;
    let my = wfm_oracle(manifold, ys, betas, cfg)?;
    let numerator = manifold.distance(&mx, &my)?;
    let tiled = tile(xs, ys.len());
    let mut denominator: f64 = 0.0;
    for x in &tiled {
        for y in ys {
            denominator = denominator.max(manifold.distance(x, y)?);
        }
    }
    let ratio = if denominator < DEGENERATE_DENOMINATOR {
        0.0
    } else {
        numerator / denominator
    };
    Ok(ContractionReport {
        numerator,
        denominator,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{Euclidean, EuclideanPoint};

    fn pts(v: &[f64]) -> Vec<EuclideanPoint> {
        v.iter().map(|&x| EuclideanPoint::new(vec![x]).unwrap()).collect()
    }

    #[test]
    fn identical_sets_have_zero_numerator() {
        let m = Euclidean::new(1);
        let x = pts(&[0.0, 1.0, 3.0]);
        let w = WeightVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        let r = nonexpansive_check(&m, &x, &x, &w, &w, &OracleConfig::default()).unwrap();
        assert!(r.numerator < 1e-10);
    }

    #[test]
    fn tiling_is_cyclic() {
        assert_eq!(tile(&[1, 2], 5), vec![1, 2, 1, 2, 1]);
    }

    #[test]
    fn trivial_weights_rejected() {
        let m = Euclidean::new(1);
        let x = pts(&[0.0, 1.0]);
        let a = WeightVector::new(vec![1.0, 1e-12]).unwrap();
        let b = WeightVector::uniform(2).unwrap();
        assert!(nonexpansive_check(&m, &x, &x, &a, &b, &OracleConfig::default()).is_err());
    }

    #[test]
    fn larger_first_set_rejected() {
        let m = Euclidean::new(1);
        let x = pts(&[0.0, 1.0, 2.0]);
        let y = pts(&[0.0, 1.0]);
        let a = WeightVector::uniform(3).unwrap();
        let b = WeightVector::uniform(2).unwrap();
        assert!(nonexpansive_check(&m, &x, &y, &a, &b, &OracleConfig::default()).is_err());
    }

    #[test]
    fn coincident_sets_report_zero() {
        let m = Euclidean::new(1);
        let x = pts(&[2.0, 2.0]);
        let w = WeightVector::uniform(2).unwrap();
        let r = nonexpansive_check(&m, &x, &x, &w, &w, &OracleConfig::default()).unwrap();
        assert_eq!(r.ratio, 0.0);
    }
}
