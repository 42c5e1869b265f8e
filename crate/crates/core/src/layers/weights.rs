use crate::error::{Error, Result};
use crate::ifme::WeightVector;

/// Logistic function, evaluated without overflow for large |x|.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`sigmoid`] on (0, 1).
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Maps raw parameters to wFM weights `σ(θᵢ) ∈ (0, 1)`.
///
/// Saturated entries are floored at the smallest positive double so the
/// result is always a valid weight vector.
pub fn weight_map(theta: &[f64]) -> WeightVector {
    let w = theta
        .iter()
        .map(|&t| sigmoid(t).max(f64::MIN_POSITIVE))
        .collect();
    WeightVector::new(w).expect("sigmoid weights are positive and finite")
}

/// `λ·(Σ σ(θᵢ) − 1)²` for one output channel.
pub fn weight_penalty(theta: &[f64], lambda: f64) -> f64 {
    let s: f64 = theta.iter().map(|&t| sigmoid(t)).sum();
    lambda * (s - 1.0).powi(2)
}

/// Learnable weights of one wFM layer: `out_channels` rows of `slots` raw
/// parameters each, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WfmLayerParams {
    out_channels: usize,
    slots: usize,
    theta: Vec<f64>,
    lambda: f64,
}

impl WfmLayerParams {
    pub fn new(out_channels: usize, slots: usize, theta: Vec<f64>, lambda: f64) -> Result<Self> {
        if out_channels == 0 || slots == 0 {
            return Err(Error::param("out_channels/slots", "must be at least 1"));
        }
        if theta.len() != out_channels * slots {
            return Err(Error::LengthMismatch {
                what: "theta vs out_channels*slots",
                left: theta.len(),
                right: out_channels * slots,
            });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("layer parameters"));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::param("lambda", format!("{lambda} must be finite and >= 0")));
        }
        Ok(Self {
            out_channels,
            slots,
            theta,
            lambda,
        })
    }

    /// Every channel starts at `σ(θ) = 1/slots`, so its weights sum to one.
    pub fn uniform(out_channels: usize, slots: usize, lambda: f64) -> Result<Self> {
        let t = if slots > 1 { logit(1.0 / slots as f64) } else { 0.0 };
        Self::new(out_channels, slots, vec![t; out_channels * slots], lambda)
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn channel(&self, o: usize) -> &[f64] {
        &self.theta[o * self.slots..(o + 1) * self.slots]
    }

    pub fn weights(&self, o: usize) -> WeightVector {
        weight_map(self.channel(o))
    }

    /// Penalty summed over output channels.
    pub fn penalty(&self) -> f64 {
        (0..self.out_channels)
            .map(|o| weight_penalty(self.channel(o), self.lambda))
            .sum()
    }

    /// Analytic gradient of [`Self::penalty`] with respect to θ.
    pub fn penalty_grad(&self) -> Vec<f64> {
        let mut g = Vec::with_capacity(self.theta.len());
        for o in 0..self.out_channels {
            let ch = self.channel(o);
            let excess: f64 = ch.iter().map(|&t| sigmoid(t)).sum::<f64>() - 1.0;
            for &t in ch {
                let s = sigmoid(t);
                g.push(2.0 * self.lambda * excess * s * (1.0 - s));
            }
        }
        g
    }

    /// `|Σw − 1|` per output channel.
    pub fn sum_deviation(&self) -> Vec<f64> {
        (0..self.out_channels)
            .map(|o| (self.channel(o).iter().map(|&t| sigmoid(t)).sum::<f64>() - 1.0).abs())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_maps_to_one_half() {
        assert_eq!(weight_map(&[0.0]).as_slice(), &[0.5]);
    }

    #[test]
    fn two_halves_have_no_penalty() {
        assert_eq!(weight_penalty(&[0.0, 0.0], 1.0), 0.0);
    }

    #[test]
    fn three_halves_penalized_by_quarter() {
        assert!((weight_penalty(&[0.0; 3], 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn saturated_theta_still_valid() {
        let w = weight_map(&[-1000.0, 1000.0]);
        assert!(w.as_slice()[0] > 0.0);
        assert_eq!(w.as_slice()[1], 1.0);
    }

    #[test]
    fn uniform_init_sums_to_one() {
        let p = WfmLayerParams::uniform(3, 5, 1.0).unwrap();
        assert!(p.penalty() < 1e-28);
        for d in p.sum_deviation() {
            assert!(d < 1e-14);
        }
    }

    #[test]
    fn penalty_gradient_matches_central_difference() {
        let p = WfmLayerParams::new(2, 3, vec![0.3, -1.0, 2.0, 0.1, 0.2, -0.4], 0.7).unwrap();
        let g = p.penalty_grad();
        let h = 1e-6;
        for i in 0..6 {
            let mut plus = p.clone();
            plus.theta_mut()[i] += h;
            let mut minus = p.clone();
            minus.theta_mut()[i] -= h;
            let fd = (plus.penalty() - minus.penalty()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(WfmLayerParams::new(2, 3, vec![0.0; 5], 1.0).is_err());
        assert!(WfmLayerParams::new(1, 1, vec![0.0], -1.0).is_err());
    }
}
