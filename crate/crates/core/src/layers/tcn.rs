//! SPD temporal convolutional network: a stack of temporal wFM layers over a
//! sequence of SPD frames, the invariant distance layer and a softmax head.

use std::time::Instant;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use rand_chacha::ChaCha8Rng;

use super::finite_diff::{finite_diff_partials, DEFAULT_FD_STEP};
use super::head::{cross_entropy, fc_softmax, head_gradient, ClassifierHead};
use super::invariant::{invariant_final_layer, invariant_final_layer_from, InvariantOutput};
use super::temporal::{temporal_channel_forward, temporal_wfm_forward, TemporalWfmSpec};
use super::weights::{logit, WfmLayerParams};
use crate::error::{Error, Result};
use crate::ifme::OracleConfig;
use crate::manifold::{Manifold, Spd, SpdMetric, SpdPoint};
use crate::metrics::MetricsRecord;

/// Architecture of an [`SpdTcn`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpdTcnSpec {
    /// Side length C of the C×C frames.
    pub dim: usize,
    /// Input sequence length F.
    pub frames: usize,
    pub classes: usize,
    pub layers: Vec<TemporalWfmSpec>,
    /// Coefficient of the `(Σw − 1)²` penalty.
    pub lambda: f64,
    pub metric: SpdMetric,
    /// Standard deviation of the initial head weights.
    pub head_init_scale: f64,
    /// Initial weight of one randomly chosen slot per output channel; the
    /// other slots share the remainder equally. `None` starts every slot at
    /// `1/slots`.
    pub dominant_weight: Option<f64>,
    /// Standard deviation of the Gaussian jitter added to the initial θ.
    pub theta_init_scale: f64,
}

impl SpdTcnSpec {
    /// Front window (kernel 5, stride 3) followed by kernel-2 layers fanning
    /// channels out 1 → 4 → 8 → 16.
    pub fn standard(dim: usize, frames: usize, classes: usize) -> Self {
        let layer = |k, s, i, o| TemporalWfmSpec {
            kernel: k,
            stride: s,
            in_channels: i,
            out_channels: o,
        };
        Self {
            dim,
            frames,
            classes,
            layers: vec![
                layer(5, 3, 1, 1),
                layer(2, 1, 1, 4),
                layer(2, 1, 4, 8),
                layer(2, 1, 8, 16),
            ],
            lambda: 1.0,
            metric: SpdMetric::AffineInvariant,
            head_init_scale: 0.1,
            dominant_weight: Some(0.8),
            theta_init_scale: 0.0,
        }
    }

    /// Sequence length before the first layer and after each layer.
    pub fn frame_lengths(&self) -> Result<Vec<usize>> {
        let mut lens = vec![self.frames];
        for l in &self.layers {
            let next = l.output_len(*lens.last().expect("non-empty"))?;
            lens.push(next);
        }
        Ok(lens)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        if self.classes < 2 {
            return Err(Error::param("classes", "need at least two classes"));
        }
        let Some(first) = self.layers.first() else {
            return Err(Error::param("layers", "need at least one temporal layer"));
        };
        if first.in_channels != 1 {
            return Err(Error::param("layers", "the first layer must take one input channel"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.validate()?;
            if i > 0 && l.in_channels != self.layers[i - 1].out_channels {
                return Err(Error::param(
                    "layers",
                    format!("layer {i} expects {} channels, previous emits {}", l.in_channels, self.layers[i - 1].out_channels),
                ));
            }
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::param("lambda", "must be finite and >= 0"));
        }
        if !(self.head_init_scale >= 0.0) || !self.head_init_scale.is_finite() {
            return Err(Error::param("head_init_scale", "must be finite and >= 0"));
        }
        if let Some(w) = self.dominant_weight {
            if !(w > 0.0 && w < 1.0) {
                return Err(Error::param("dominant_weight", "must lie in (0, 1)"));
            }
        }
        if !(self.theta_init_scale >= 0.0) || !self.theta_init_scale.is_finite() {
            return Err(Error::param("theta_init_scale", "must be finite and >= 0"));
        }
        self.frame_lengths()?;
        Ok(())
    }

    /// Points entering the invariant layer.
    pub fn feature_count(&self) -> Result<usize> {
        let len = *self.frame_lengths()?.last().expect("non-empty");
        Ok(len * self.layers.last().map_or(0, |l| l.out_channels))
    }

    pub fn wfm_param_count(&self) -> usize {
        self.layers.iter().map(TemporalWfmSpec::param_count).sum()
    }

    pub fn param_count(&self) -> Result<usize> {
        Ok(self.wfm_param_count() + self.classes * (self.feature_count()? + 1))
    }
}

/// One labelled sequence of SPD frames.
#[derive(Debug, Clone)]
pub struct LabeledSequence {
    pub frames: Vec<SpdPoint>,
    pub label: usize,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `activations[l][c][t]`: input of layer l (the last entry is the
    /// stack output).
    pub activations: Vec<Vec<Vec<SpdPoint>>>,
    pub invariant: InvariantOutput<SpdPoint>,
    /// Standardized distances fed to the head.
    pub features: DVector<f64>,
    pub probs: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct SpdTcn {
    spec: SpdTcnSpec,
    manifold: Spd,
    layers: Vec<WfmLayerParams>,
    head: ClassifierHead,
    oracle: OracleConfig,
    norm_shift: DVector<f64>,
    norm_scale: DVector<f64>,
}

/// Solver of the invariant layer's mean. Its inputs are tightly clustered, so
/// full Riemannian gradient steps converge in a few iterations.
pub const INVARIANT_ORACLE: OracleConfig = OracleConfig {
    step: 1.0,
    tol: 1e-10,
    max_iter: 1000,
};

fn flatten_channels(chs: &[Vec<SpdPoint>]) -> Vec<SpdPoint> {
    chs.iter().flatten().cloned().collect()
}

impl SpdTcn {
    /// Initial wFM weights and head drawn from `rng` as set in the spec.
    pub fn new(spec: SpdTcnSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        let jitter = Normal::new(0.0, spec.theta_init_scale).map_err(|e| Error::param("theta_init_scale", e.to_string()))?;
        let layers = spec
            .layers
            .iter()
            .map(|l| {
                let slots = l.slots();
                let mut p = WfmLayerParams::uniform(l.out_channels, slots, spec.lambda)?;
                if let (Some(wd), true) = (spec.dominant_weight, slots > 1) {
                    let rest = logit((1.0 - wd) / (slots - 1) as f64);
                    for ch in p.theta_mut().chunks_mut(slots) {
                        ch.fill(rest);
                        ch[rng.random_range(0..slots)] = logit(wd);
                    }
                }
                for t in p.theta_mut() {
                    *t += jitter.sample(rng);
                }
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()?;
        let head = ClassifierHead::random(spec.classes, spec.feature_count()?, spec.head_init_scale, rng)?;
        Self::from_parts(spec, layers, head)
    }

    pub fn from_parts(spec: SpdTcnSpec, layers: Vec<WfmLayerParams>, head: ClassifierHead) -> Result<Self> {
        spec.validate()?;
        if layers.len() != spec.layers.len() {
            return Err(Error::LengthMismatch {
                what: "layer parameters vs layer specs",
                left: layers.len(),
                right: spec.layers.len(),
            });
        }
        for (p, l) in layers.iter().zip(&spec.layers) {
            if p.out_channels() != l.out_channels || p.slots() != l.slots() {
                return Err(Error::DimensionMismatch {
                    expected: format!("{}x{}", l.out_channels, l.slots()),
                    got: format!("{}x{}", p.out_channels(), p.slots()),
                });
            }
        }
        if head.class_count() != spec.classes || head.feature_count() != spec.feature_count()? {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} head", spec.classes, spec.feature_count()?),
                got: format!("{}x{}", head.class_count(), head.feature_count()),
            });
        }
        let d = head.feature_count();
        Ok(Self {
            manifold: Spd::new(spec.dim, spec.metric),
            spec,
            layers,
            head,
            oracle: INVARIANT_ORACLE,
            norm_shift: DVector::zeros(d),
            norm_scale: DVector::from_element(d, 1.0),
        })
    }

    /// Solver settings of the invariant layer's Fréchet mean.
    pub fn with_oracle(mut self, oracle: OracleConfig) -> Self {
        self.oracle = oracle;
        self
    }

    /// Fixed affine map `(o − shift) ⊙ scale` applied to the invariant
    /// distances before the head.
    pub fn with_feature_norm(mut self, shift: DVector<f64>, scale: DVector<f64>) -> Result<Self> {
        let d = self.head.feature_count();
        if shift.len() != d || scale.len() != d {
            return Err(Error::DimensionMismatch {
                expected: format!("{d} shifts and scales"),
                got: format!("{} and {}", shift.len(), scale.len()),
            });
        }
        if shift.iter().chain(scale.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("feature normalization"));
        }
        self.norm_shift = shift;
        self.norm_scale = scale;
        Ok(self)
    }

    /// Sets the feature map to standardize the distances of `data` under the
    /// current weights (per-feature mean 0, standard deviation 1).
    pub fn fit_feature_norm(self, data: &[LabeledSequence]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("normalization data"));
        }
        let rows = data
            .iter()
            .map(|s| self.trace(&s.frames).map(|t| t.invariant.distances))
            .collect::<Result<Vec<_>>>()?;
        let n = rows.len() as f64;
        let mean = rows.iter().fold(DVector::zeros(self.head.feature_count()), |acc, r| acc + r) / n;
        let var = rows
            .iter()
            .fold(DVector::zeros(mean.len()), |acc, r| acc + (r - &mean).map(|x| x * x))
            / n;
        let scale = var.map(|v| if v.sqrt() > 1e-12 { 1.0 / v.sqrt() } else { 1.0 });
        self.with_feature_norm(mean, scale)
    }

    pub fn feature_norm(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.norm_shift, &self.norm_scale)
    }

    fn head_input(&self, distances: &DVector<f64>) -> DVector<f64> {
        (distances - &self.norm_shift).component_mul(&self.norm_scale)
    }

    pub fn spec(&self) -> &SpdTcnSpec {
        &self.spec
    }

    pub fn manifold(&self) -> &Spd {
        &self.manifold
    }

    pub fn layers(&self) -> &[WfmLayerParams] {
        &self.layers
    }

    pub fn head(&self) -> &ClassifierHead {
        &self.head
    }

    pub fn oracle(&self) -> &OracleConfig {
        &self.oracle
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.theta().len()).sum::<usize>() + self.head.param_count()
    }

    /// All wFM θ in layer order, then the head as in
    /// [`ClassifierHead::flatten`].
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.layers.iter().flat_map(|l| l.theta().iter().copied()).collect();
        out.extend(self.head.flatten());
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                what: "flat parameters",
                left: flat.len(),
                right: self.param_count(),
            });
        }
        if flat.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("parameters"));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let n = l.theta().len();
            l.theta_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        self.head = ClassifierHead::from_flat(self.head.class_count(), self.head.feature_count(), &flat[offset..])?;
        Ok(())
    }

    pub fn penalty(&self) -> f64 {
        self.layers.iter().map(WfmLayerParams::penalty).sum()
    }

    /// Largest `|Σw − 1|` over all channels of all layers.
    pub fn max_sum_deviation(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(WfmLayerParams::sum_deviation)
            .fold(0.0, f64::max)
    }

    fn check_sequence(&self, seq: &[SpdPoint]) -> Result<()> {
        if seq.len() != self.spec.frames {
            return Err(Error::LengthMismatch {
                what: "sequence frames",
                left: seq.len(),
                right: self.spec.frames,
            });
        }
        seq.iter().try_for_each(|p| self.manifold.check_point(p))
    }

    pub fn trace(&self, seq: &[SpdPoint]) -> Result<ForwardTrace> {
        self.check_sequence(seq)?;
        let mut activations = vec![vec![seq.to_vec()]];
        for (spec, params) in self.spec.layers.iter().zip(&self.layers) {
            let next = temporal_wfm_forward(&self.manifold, activations.last().expect("non-empty"), spec, params)?;
            activations.push(next);
        }
        let points = flatten_channels(activations.last().expect("non-empty"));
        let invariant = invariant_final_layer(&self.manifold, &points, &self.oracle)?;
        let features = self.head_input(&invariant.distances);
        let probs = fc_softmax(&self.head, &features)?;
        Ok(ForwardTrace {
            activations,
            invariant,
            features,
            probs,
        })
    }

    pub fn forward(&self, seq: &[SpdPoint]) -> Result<DVector<f64>> {
        Ok(self.trace(seq)?.probs)
    }

    pub fn predict(&self, seq: &[SpdPoint]) -> Result<usize> {
        Ok(self.forward(seq)?.argmax().0)
    }

    /// Cross-entropy plus the weight penalty.
    pub fn loss(&self, sample: &LabeledSequence) -> Result<f64> {
        Ok(cross_entropy(&self.forward(&sample.frames)?, sample.label)? + self.penalty())
    }

    /// Cross-entropy after replacing the weights of channel `o` in layer `l`
    /// with `theta`, reusing the cached activations below that layer.
    fn perturbed_cross_entropy(
        &self,
        trace: &ForwardTrace,
        l: usize,
        o: usize,
        theta: &[f64],
        label: usize,
    ) -> Result<f64> {
        let mut acts = trace.activations[l + 1].clone();
        acts[o] = temporal_channel_forward(&self.manifold, &trace.activations[l], &self.spec.layers[l], theta)?;
        for j in l + 1..self.layers.len() {
            acts = temporal_wfm_forward(&self.manifold, &acts, &self.spec.layers[j], &self.layers[j])?;
        }
        let points = flatten_channels(&acts);
        let inv = invariant_final_layer_from(&self.manifold, &points, &self.oracle, trace.invariant.mean.clone())?;
        cross_entropy(&fc_softmax(&self.head, &self.head_input(&inv.distances))?, label)
    }

    /// Number of wFM parameters, which lead [`Self::flat_params`].
    pub fn wfm_param_count(&self) -> usize {
        self.layers.iter().map(|l| l.theta().len()).sum()
    }

    /// Loss of one sample and its gradient in the layout of
    /// [`Self::flat_params`]. Head entries are analytic; wFM entries are
    /// central differences of the cross-entropy plus the analytic penalty
    /// gradient.
    pub fn loss_and_gradient(&self, sample: &LabeledSequence, h: f64) -> Result<(f64, Vec<f64>)> {
        let all: Vec<usize> = (0..self.wfm_param_count()).collect();
        self.loss_and_partial_gradient(sample, h, &all)
    }

    /// As [`Self::loss_and_gradient`], differencing only the wFM parameters
    /// listed in `coords`; the cross-entropy part of the others is left at 0.
    pub fn loss_and_partial_gradient(
        &self,
        sample: &LabeledSequence,
        h: f64,
        coords: &[usize],
    ) -> Result<(f64, Vec<f64>)> {
        let trace = self.trace(&sample.frames)?;
        let loss = cross_entropy(&trace.probs, sample.label)? + self.penalty();
        let index: Vec<(usize, usize, usize)> = self
            .layers
            .iter()
            .enumerate()
            .flat_map(|(l, p)| (0..p.out_channels()).flat_map(move |o| (0..p.slots()).map(move |s| (l, o, s))))
            .collect();
        if let Some(&bad) = coords.iter().find(|&&c| c >= index.len()) {
            return Err(Error::param("coords", format!("{bad} is not a wFM parameter index")));
        }
        let fd = finite_diff_partials(coords.len(), h, |i, delta| {
            let (l, o, s) = index[coords[i]];
            let mut theta = self.layers[l].channel(o).to_vec();
            theta[s] += delta;
            self.perturbed_cross_entropy(&trace, l, o, &theta, sample.label)
        })?;
        let mut grad: Vec<f64> = self.layers.iter().flat_map(WfmLayerParams::penalty_grad).collect();
        for (&c, g) in coords.iter().zip(fd) {
            grad[c] += g;
        }
        grad.extend(head_gradient(&self.head, &trace.features, sample.label)?.flatten());
        Ok((loss, grad))
    }
}

/// Settings of [`train_classifier`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub fd_step: f64,
    /// wFM parameters differenced per minibatch, drawn at random; `None`
    /// differences all of them.
    pub fd_coordinates: Option<usize>,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            momentum: 0.9,
            epochs: 10,
            batch_size: 8,
            fd_step: DEFAULT_FD_STEP,
            fd_coordinates: None,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::param("lr", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::param("momentum", "must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be at least 1"));
        }
        if !(self.fd_step > 0.0) || !self.fd_step.is_finite() {
            return Err(Error::param("fd_step", "must be positive"));
        }
        if self.fd_coordinates == Some(0) {
            return Err(Error::param("fd_coordinates", "must be at least 1 when set"));
        }
        Ok(())
    }
}

/// Heavy-ball SGD: `v ← μ·v − lr·g`, `θ ← θ + v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    lr: f64,
    momentum: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64, n: usize) -> Self {
        Self {
            lr,
            momentum,
            velocity: vec![0.0; n],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        for ((p, v), g) in params.iter_mut().zip(&mut self.velocity).zip(grad) {
            *v = self.momentum * *v - self.lr * g;
            *p += *v;
        }
    }
}

/// Mean loss and accuracy of `model` on `data`.
pub fn evaluate(model: &SpdTcn, data: &[LabeledSequence]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let penalty = model.penalty();
    let mut loss = 0.0;
    let mut correct = 0usize;
    for s in data {
        let p = model.forward(&s.frames)?;
        loss += cross_entropy(&p, s.label)? + penalty;
        correct += usize::from(p.argmax().0 == s.label);
    }
    Ok((loss / data.len() as f64, correct as f64 / data.len() as f64))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SpdTcn,
    /// One record per epoch, starting with the untrained model at step 0.
    pub records: Vec<MetricsRecord>,
}

fn epoch_record(
    experiment: &str,
    seed: u64,
    epoch: usize,
    model: &SpdTcn,
    train: &[LabeledSequence],
    test: &[LabeledSequence],
    start: Instant,
) -> Result<MetricsRecord> {
    let (loss, train_acc) = evaluate(model, train)?;
    if !loss.is_finite() {
        return Err(Error::Diverged { epoch, loss });
    }
    let (_, test_acc) = evaluate(model, test)?;
    let mut rec = MetricsRecord::new(experiment, seed, epoch, start.elapsed().as_secs_f64())
        .with("loss", loss)
        .with("train_accuracy", train_acc);
    if !test.is_empty() {
        rec = rec.with("test_accuracy", test_acc);
    }
    Ok(rec.with("max_weight_sum_deviation", model.max_sum_deviation()))
}

/// Minibatch SGD with momentum on every parameter of an [`SpdTcn`].
pub fn train_classifier(
    spec: &SpdTcnSpec,
    train: &[LabeledSequence],
    test: &[LabeledSequence],
    cfg: &SgdConfig,
    seed: u64,
    experiment: &str,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if let Some(s) = train.iter().chain(test).find(|s| s.label >= spec.classes) {
        return Err(Error::param("label", format!("{} out of range for {} classes", s.label, spec.classes)));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = SpdTcn::new(spec.clone(), &mut rng)?.fit_feature_norm(train)?;
    let n_wfm = model.wfm_param_count();
    let mut params = model.flat_params();
    let mut opt = Sgd::new(cfg.lr, cfg.momentum, params.len());
    let mut records = vec![epoch_record(experiment, seed, 0, &model, train, test, start)?];
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let coords: Vec<usize> = match cfg.fd_coordinates {
                Some(k) if k < n_wfm => {
                    let mut c = rand::seq::index::sample(&mut rng, n_wfm, k).into_vec();
                    c.sort_unstable();
                    c
                }
                _ => (0..n_wfm).collect(),
            };
            let mut grad = vec![0.0; params.len()];
            for &i in batch {
                let (loss, g) = model.loss_and_partial_gradient(&train[i], cfg.fd_step, &coords)?;
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch, loss });
                }
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b / batch.len() as f64;
                }
            }
            opt.step(&mut params, &grad);
            model.set_flat_params(&params).map_err(|e| match e {
                Error::NonFinite(_) => Error::Diverged { epoch, loss: f64::NAN },
                other => other,
            })?;
        }
        records.push(epoch_record(experiment, seed, epoch, &model, train, test, start)?);
    }
    Ok(TrainOutcome { model, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::linalg::plane_rotation;
    use nalgebra::DMatrix;

    fn rotating(dim: usize, frames: usize, step: f64) -> Vec<SpdPoint> {
        let d = DMatrix::from_diagonal(&DVector::from_fn(dim, |i, _| (dim - i) as f64));
        (0..frames)
            .map(|t| {
                let r = plane_rotation(dim, step * t as f64);
                SpdPoint::new(crate::manifold::linalg::symmetrize(&(&r * &d * r.transpose()))).unwrap()
            })
            .collect()
    }

    fn small_spec() -> SpdTcnSpec {
        SpdTcnSpec {
            dim: 3,
            frames: 6,
            classes: 2,
            layers: vec![
                TemporalWfmSpec::new(3, 2, 1, 2).unwrap(),
                TemporalWfmSpec::new(2, 1, 2, 2).unwrap(),
            ],
            lambda: 1.0,
            metric: SpdMetric::AffineInvariant,
            head_init_scale: 0.1,
            dominant_weight: None,
            theta_init_scale: 0.5,
        }
    }

    #[test]
    fn standard_spec_shapes() {
        let spec = SpdTcnSpec::standard(8, 20, 2);
        assert_eq!(spec.frame_lengths().unwrap(), vec![20, 6, 5, 4, 3]);
        assert_eq!(spec.feature_count().unwrap(), 48);
        assert_eq!(spec.wfm_param_count(), 5 + 8 + 64 + 256);
        assert_eq!(spec.param_count().unwrap(), 333 + 2 * 49);
    }

    #[test]
    fn channel_chain_validated() {
        let mut spec = small_spec();
        spec.layers[1].in_channels = 3;
        assert!(spec.validate().is_err());
        let mut spec = small_spec();
        spec.frames = 2;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn flat_params_round_trip() {
        let mut model = SpdTcn::new(small_spec(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut p = model.flat_params();
        assert_eq!(p.len(), model.param_count());
        p[0] = 0.7;
        *p.last_mut().unwrap() = -0.3;
        model.set_flat_params(&p).unwrap();
        assert_eq!(model.flat_params(), p);
    }

    #[test]
    fn gradient_matches_plain_central_differences() {
        let mut model = SpdTcn::new(small_spec(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let mut p = model.flat_params();
        for (i, x) in p.iter_mut().enumerate().take(small_spec().wfm_param_count()) {
            *x += 0.1 * (i as f64 - 3.0);
        }
        model.set_flat_params(&p).unwrap();
        let sample = LabeledSequence {
            frames: rotating(3, 6, 0.4),
            label: 1,
        };
        let (loss, grad) = model.loss_and_gradient(&sample, 1e-5).unwrap();
        assert!((loss - model.loss(&sample).unwrap()).abs() < 1e-9);
        // oracle: full forward passes on perturbed copies of the model
        let reference = crate::layers::finite_diff_grad(
            |q| {
                let mut m = model.clone();
                m.set_flat_params(q)?;
                m.loss(&sample)
            },
            &p,
            1e-5,
        )
        .unwrap();
        for (i, (a, b)) in grad.iter().zip(&reference).enumerate() {
            assert!((a - b).abs() < 1e-6 * (1.0 + b.abs()), "{i}: {a} vs {b}");
        }
    }

    #[test]
    fn zero_epochs_give_initial_row_only() {
        let train = vec![
            LabeledSequence { frames: rotating(3, 6, 0.1), label: 0 },
            LabeledSequence { frames: rotating(3, 6, 0.5), label: 1 },
        ];
        let cfg = SgdConfig { epochs: 0, ..SgdConfig::default() };
        let out = train_classifier(&small_spec(), &train, &[], &cfg, 3, "t").unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].step, 0);
    }

    #[test]
    fn sgd_momentum_update() {
        let mut opt = Sgd::new(0.1, 0.5, 1);
        let mut p = [1.0];
        opt.step(&mut p, &[2.0]);
        assert!((p[0] - 0.8).abs() < 1e-15);
        opt.step(&mut p, &[2.0]);
        // v = 0.5·(−0.2) − 0.2 = −0.3
        assert!((p[0] - 0.5).abs() < 1e-15);
    }
}
