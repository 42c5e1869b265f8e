use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::weights::weight_penalty;
use crate::error::{Error, Result};

/// Probability floor inside the logarithm of the cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

/// Dense layer followed by softmax: `softmax(W·o + b)` with W of shape c×d.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    w: DMatrix<f64>,
    b: DVector<f64>,
}

impl ClassifierHead {
    pub fn new(w: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if w.nrows() != b.len() || w.nrows() == 0 || w.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                expected: "c×d weights with c biases, c, d ≥ 1".into(),
                got: format!("{}x{} weights, {} biases", w.nrows(), w.ncols(), b.len()),
            });
        }
        if w.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("head parameters"));
        }
        Ok(Self { w, b })
    }

    pub fn zeros(classes: usize, features: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(classes, features), DVector::zeros(classes))
    }

    /// Weights drawn from N(0, scale²), zero bias.
    pub fn random<R: Rng + ?Sized>(classes: usize, features: usize, scale: f64, rng: &mut R) -> Result<Self> {
        let normal = Normal::new(0.0, scale).map_err(|e| Error::param("scale", e.to_string()))?;
        let w = DMatrix::from_fn(classes, features, |_, _| normal.sample(rng));
        Self::new(w, DVector::zeros(classes))
    }

    pub fn class_count(&self) -> usize {
        self.w.nrows()
    }

    pub fn feature_count(&self) -> usize {
        self.w.ncols()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    /// Parameters as one vector: W row by row, then b.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for r in 0..self.w.nrows() {
            out.extend(self.w.row(r).iter());
        }
        out.extend(self.b.iter());
        out
    }

    /// Inverse of [`Self::flatten`].
    pub fn from_flat(classes: usize, features: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != classes * (features + 1) {
            return Err(Error::LengthMismatch {
                what: "flat head parameters",
                left: flat.len(),
                right: classes * (features + 1),
            });
        }
        let w = DMatrix::from_row_slice(classes, features, &flat[..classes * features]);
        let b = DVector::from_column_slice(&flat[classes * features..]);
        Self::new(w, b)
    }

    pub fn logits(&self, o: &DVector<f64>) -> Result<DVector<f64>> {
        if o.len() != self.feature_count() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} features", self.feature_count()),
                got: format!("{}", o.len()),
            });
        }
        Ok(&self.w * o + &self.b)
    }
}

/// Softmax with the maximum logit subtracted first.
pub fn softmax(logits: &DVector<f64>) -> DVector<f64> {
    let max = logits.max();
    let e = logits.map(|z| (z - max).exp());
    let s = e.sum();
    e / s
}

pub fn fc_softmax(head: &ClassifierHead, o: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(softmax(&head.logits(o)?))
}

fn check_label(probs: &DVector<f64>, label: usize) -> Result<()> {
    if label >= probs.len() {
        return Err(Error::param(
            "label",
            format!("{label} out of range for {} classes", probs.len()),
        ));
    }
    Ok(())
}

/// `−ln max(p[label], 1e-12)`.
pub fn cross_entropy(probs: &DVector<f64>, label: usize) -> Result<f64> {
    check_label(probs, label)?;
    Ok(-probs[label].max(PROB_FLOOR).ln())
}

/// Cross-entropy plus `λ·(Σw − 1)²` for every channel in `channels`.
pub fn loss_total(probs: &DVector<f64>, label: usize, channels: &[&[f64]], lambda: f64) -> Result<f64> {
    let ce = cross_entropy(probs, label)?;
    let pen: f64 = channels.iter().map(|t| weight_penalty(t, lambda)).sum();
    Ok(ce + pen)
}

/// Gradient of the cross-entropy with respect to the head and its input.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradient {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub input: DVector<f64>,
}

impl HeadGradient {
    /// Same layout as [`ClassifierHead::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.w.len() + self.b.len());
        for r in 0..self.w.nrows() {
            out.extend(self.w.row(r).iter());
        }
        out.extend(self.b.iter());
        out
    }
}

/// With `g = p − onehot(label)`: `∂W = g·oᵀ`, `∂b = g`, `∂o = Wᵀ·g`.
pub fn head_gradient(head: &ClassifierHead, o: &DVector<f64>, label: usize) -> Result<HeadGradient> {
    let mut g = fc_softmax(head, o)?;
    check_label(&g, label)?;
    g[label] -= 1.0;
    Ok(HeadGradient {
        w: &g * o.transpose(),
        input: head.w.transpose() * &g,
        b: g,
    })
}
