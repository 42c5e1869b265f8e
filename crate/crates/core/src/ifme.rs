//! Weighted Fréchet means.
//!
//! [`ifme_wfm`] is the inductive estimator used as the convolution of a wFM
//! layer: `M₁ = X₁`, `Mₙ = Γ(Mₙ₋₁ → Xₙ; wₙ / Σ_{j≤n} w_j)`. On curved spaces the
//! result depends on the order of the samples; that order is part of the
//! contract.
//!
//! [`wfm_oracle`] solves the argmin definition directly by Riemannian
//! gradient descent and serves as ground truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::manifold::{BallSpec, Manifold};

/// Strictly positive sample weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("weight vector"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::param("weights", format!("weight {w} is not positive and finite")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    /// `w̃ᵢ = wᵢ / Σ w`.
    pub fn normalized(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / total).collect()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.weights.iter().map(|w| w * c).collect())
    }
}

/// Ordered samples on one manifold, optionally confined to a geodesic ball.
#[derive(Debug, Clone)]
pub struct PointSequence<P> {
    points: Vec<P>,
    ball: Option<BallSpec<P>>,
}

impl<P: Clone> PointSequence<P> {
    pub fn new<M: Manifold<Point = P>>(
        manifold: &M,
        points: Vec<P>,
        ball: Option<BallSpec<P>>,
    ) -> Result<Self> {
        for p in &points {
            manifold.check_point(p)?;
        }
        if let Some(ball) = &ball {
            manifold.check_ball(ball)?;
            for p in &points {
                let d = manifold.distance(&ball.center, p)?;
                if d >= ball.radius {
                    return Err(Error::param(
                        "points",
                        format!("sample at distance {d} lies outside the ball of radius {}", ball.radius),
                    ));
                }
            }
        }
        Ok(Self { points, ball })
    }

    pub fn points(&self) -> &[P] {
        &self.points
    }

    pub fn ball(&self) -> Option<&BallSpec<P>> {
        self.ball.as_ref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn check_counts<P>(points: &[P], w: &WeightVector) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Empty("point sequence"));
    }
    if points.len() != w.len() {
        return Err(Error::LengthMismatch {
            what: "points vs weights",
            left: points.len(),
            right: w.len(),
        });
    }
    Ok(())
}

/// Inductive weighted Fréchet mean of `points` in their given order.
pub fn ifme_wfm<M: Manifold>(manifold: &M, points: &[M::Point], w: &WeightVector) -> Result<M::Point> {
    check_counts(points, w)?;
    let weights = w.as_slice();
    let mut mean = points[0].clone();
    let mut total = weights[0];
    for (x, &wn) in points.iter().zip(weights).skip(1) {
        total += wn;
        mean = manifold.geodesic(&mean, x, wn / total)?;
    }
    Ok(mean)
}

/// Settings of the gradient-descent wFM solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub step: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            step: 0.5,
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleSolution<P> {
    pub point: P,
    pub iterations: usize,
    /// Norm of `Σ w̃ᵢ Log_M(Xᵢ)` at the returned point.
    pub residual: f64,
}

/// Weighted Fréchet mean by gradient descent, started from the first sample.
pub fn wfm_oracle<M: Manifold>(
    manifold: &M,
    points: &[M::Point],
    w: &WeightVector,
    cfg: &OracleConfig,
) -> Result<M::Point> {
    check_counts(points, w)?;
    Ok(wfm_oracle_from(manifold, points, w, cfg, points[0].clone())?.point)
}

/// Gradient descent `M ← Exp_M(step · Σ w̃ᵢ Log_M(Xᵢ))` from `init`, stopping
/// once the gradient norm drops below `cfg.tol`.
pub fn wfm_oracle_from<M: Manifold>(
    manifold: &M,
    points: &[M::Point],
    w: &WeightVector,
    cfg: &OracleConfig,
    init: M::Point,
) -> Result<OracleSolution<M::Point>> {
    check_counts(points, w)?;
    if !(cfg.step > 0.0 && cfg.step <= 1.0) {
        return Err(Error::param("step", format!("{} is outside (0, 1]", cfg.step)));
    }
    let wn = w.normalized();
    let mut mean = init;
    let mut residual = f64::INFINITY;
    for iteration in 0..=cfg.max_iter {
        let grad = manifold.weighted_log_sum(&mean, points, &wn)?;
        residual = manifold.tangent_norm(&mean, &grad);
        if !residual.is_finite() {
            return Err(Error::NonFinite("oracle gradient"));
        }
        if residual < cfg.tol {
            return Ok(OracleSolution {
                point: mean,
                iterations: iteration,
                residual,
            });
        }
        if iteration == cfg.max_iter {
            break;
        }
        mean = manifold.exp_map(&mean, &(grad * cfg.step))?;
    }
    Err(Error::NotConverged {
        iterations: cfg.max_iter,
        residual,
    })
}

/// One point of a consistency curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub n: usize,
    /// Median over seeds of `d(ifme, oracle)`.
    pub median_error: f64,
    /// Per-seed errors in seed order.
    pub errors: Vec<f64>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Distance between the inductive estimate and the oracle as the sample size
/// grows.
///
/// For every seed one stream of `max(sizes)` samples (and weights) is drawn;
/// each size uses a prefix of that stream. Seeds run in parallel and the
/// results are reduced in seed order.
pub fn consistency_curve<M, S, W>(
    manifold: &M,
    sampler: S,
    weight_fn: W,
    sizes: &[usize],
    seeds: &[u64],
    cfg: &OracleConfig,
) -> Result<Vec<CurvePoint>>
where
    M: Manifold,
    S: Fn(&mut ChaCha8Rng) -> Result<M::Point> + Sync,
    W: Fn(usize, &mut ChaCha8Rng) -> f64 + Sync,
{
    if sizes.is_empty() || seeds.is_empty() {
        return Err(Error::Empty("sizes or seeds"));
    }
    if sizes[0] == 0 || sizes.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::param("sizes", "must be positive and strictly increasing"));
    }
    let max_n = *sizes.last().expect("non-empty");
    let per_seed: Vec<Result<Vec<f64>>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut points = Vec::with_capacity(max_n);
            let mut weights = Vec::with_capacity(max_n);
            for i in 0..max_n {
                points.push(sampler(&mut rng)?);
                weights.push(weight_fn(i, &mut rng));
            }
            sizes
                .iter()
                .map(|&n| {
                    let w = WeightVector::new(weights[..n].to_vec())?;
                    let est = ifme_wfm(manifold, &points[..n], &w)?;
                    let exact = wfm_oracle(manifold, &points[..n], &w, cfg)?;
                    manifold.distance(&est, &exact)
                })
                .collect()
        })
        .collect();
    let per_seed: Vec<Vec<f64>> = per_seed.into_iter().collect::<Result<_>>()?;
    Ok(sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let errors: Vec<f64> = per_seed.iter().map(|e| e[i]).collect();
            CurvePoint {
                n,
                median_error: median(&errors),
                errors,
            }
        })
        .collect())
}
