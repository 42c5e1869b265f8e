use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::avg_layer::GrassmannAvgLayer;
use super::pca::{column_means, pca_oracle};
use crate::error::{Error, Result};
use crate::layers::{finite_diff_partials, logit, sigmoid};
use crate::metrics::MetricsRecord;

/// The latent projection between encoder and decoder.
#[derive(Debug, Clone, PartialEq)]
pub enum Bottleneck {
    /// Weighted subspace average of the hidden batch, followed by projection.
    Grassmann(GrassmannAvgLayer),
    /// Plain linear map, k×hidden.
    Dense(DMatrix<f64>),
}

/// One-hidden-layer autoencoder: `tanh` encoder, bottleneck to `latent_k`,
/// affine decoder with `sigmoid` output.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub latent_k: usize,
    /// hidden×input
    pub enc_w: DMatrix<f64>,
    pub enc_b: DVector<f64>,
    /// input×latent
    pub dec_w: DMatrix<f64>,
    pub dec_b: DVector<f64>,
    pub bottleneck: Bottleneck,
}

/// Training settings for [`autoencoder_train`]. Optimisation is Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub fd_step: f64,
    /// Number of randomly chosen θ coordinates differenced per batch; all of
    /// them when `None`.
    pub fd_coordinates: Option<usize>,
    /// Decoupled decay applied to the encoder and decoder weight matrices
    /// after every Adam step: `W ← W − lr·decay·W`.
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 100,
            lr: 0.01,
            fd_step: 1e-5,
            fd_coordinates: None,
            weight_decay: 0.0,
            seed: 0,
        }
    }
}

impl AutoencoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be positive"));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::param("lr", format!("{} must be positive", self.lr)));
        }
        if !(self.fd_step > 0.0) || !self.fd_step.is_finite() {
            return Err(Error::param("fd_step", format!("{} must be positive", self.fd_step)));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::param("weight_decay", format!("{} must be finite and >= 0", self.weight_decay)));
        }
        if self.fd_coordinates == Some(0) {
            return Err(Error::param("fd_coordinates", "must be positive"));
        }
        Ok(())
    }
}

fn normal_matrix(rows: usize, cols: usize, std: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = Normal::new(0.0, std).expect("positive std");
    DMatrix::from_fn(rows, cols, |_, _| n.sample(rng))
}

impl AutoencoderSpec {
    /// Random encoder and decoder with the given bottleneck. The decoder bias
    /// starts at zero; [`AutoencoderSpec::init_decoder_bias`] sets it from data.
    fn random(input_dim: usize, hidden_dim: usize, latent_k: usize, bottleneck: Bottleneck, rng: &mut ChaCha8Rng) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || latent_k == 0 {
            return Err(Error::param("dims", "input_dim, hidden_dim and latent_k must be positive"));
        }
        if latent_k > hidden_dim {
            return Err(Error::param("latent_k", format!("{latent_k} exceeds hidden_dim {hidden_dim}")));
        }
        let spec = Self {
            input_dim,
            hidden_dim,
            latent_k,
            enc_w: normal_matrix(hidden_dim, input_dim, 1.0 / (input_dim as f64).sqrt(), rng),
            enc_b: DVector::zeros(hidden_dim),
            dec_w: normal_matrix(input_dim, latent_k, 0.1, rng),
            dec_b: DVector::zeros(input_dim),
            bottleneck,
        };
        Ok(spec)
    }

    /// Autoencoder with a Grassmann averaging bottleneck of `blocks` raw
    /// weights and penalty strength `lambda`.
    pub fn grassmann(input_dim: usize, hidden_dim: usize, latent_k: usize, blocks: usize, lambda: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layer = GrassmannAvgLayer::new(latent_k, blocks, lambda)?;
        Self::random(input_dim, hidden_dim, latent_k, Bottleneck::Grassmann(layer), &mut rng)
    }

    /// Same encoder and decoder initialisation as [`AutoencoderSpec::grassmann`]
    /// for the same seed, with a dense k×hidden bottleneck instead.
    pub fn dense(input_dim: usize, hidden_dim: usize, latent_k: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spec = Self::random(input_dim, hidden_dim, latent_k, Bottleneck::Dense(DMatrix::zeros(latent_k, hidden_dim)), &mut rng)?;
        spec.bottleneck = Bottleneck::Dense(normal_matrix(latent_k, hidden_dim, 1.0 / (hidden_dim as f64).sqrt(), &mut rng));
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (d, h, k) = (self.input_dim, self.hidden_dim, self.latent_k);
        if k > h {
            return Err(Error::param("latent_k", format!("{k} exceeds hidden_dim {h}")));
        }
        let shapes_ok = self.enc_w.shape() == (h, d)
            && self.enc_b.len() == h
            && self.dec_w.shape() == (d, k)
            && self.dec_b.len() == d
            && match &self.bottleneck {
                Bottleneck::Grassmann(layer) => layer.k == k,
                Bottleneck::Dense(w) => w.shape() == (k, h),
            };
        if !shapes_ok {
            return Err(Error::param("spec", "parameter shapes disagree with the dimensions"));
        }
        let finite = self.enc_w.iter().chain(self.enc_b.iter()).chain(self.dec_w.iter()).chain(self.dec_b.iter()).all(|v| v.is_finite())
            && match &self.bottleneck {
                Bottleneck::Grassmann(layer) => layer.theta.iter().all(|v| v.is_finite()),
                Bottleneck::Dense(w) => w.iter().all(|v| v.is_finite()),
            };
        if !finite {
            return Err(Error::NonFinite("autoencoder parameters"));
        }
        Ok(())
    }

    pub fn bottleneck_param_count(&self) -> usize {
        match &self.bottleneck {
            Bottleneck::Grassmann(layer) => layer.param_count(),
            Bottleneck::Dense(w) => w.len(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.enc_w.len() + self.enc_b.len() + self.dec_w.len() + self.dec_b.len() + self.bottleneck_param_count()
    }

    /// Sets the decoder bias to the logit of the mean training pixel, so the
    /// untrained decoder outputs the mean image.
    pub fn init_decoder_bias(&mut self, data: &DMatrix<f64>) {
        let mean = column_means(data);
        self.dec_b = mean.map(|p| logit(p.clamp(1e-3, 1.0 - 1e-3)));
    }

    pub fn encode(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut pre = x * self.enc_w.transpose();
        for mut row in pre.row_iter_mut() {
            row += self.enc_b.transpose();
        }
        pre.map(f64::tanh)
    }

    pub fn decode(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        decode_with(&self.dec_w, &self.dec_b, z)
    }

    /// Latent codes in evaluation mode.
    pub fn latent(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let h = self.encode(x);
        match &self.bottleneck {
            Bottleneck::Grassmann(layer) => Ok(layer.clone().forward(&h, false)?.projected()),
            Bottleneck::Dense(w) => Ok(&h * w.transpose()),
        }
    }

    pub fn reconstruct(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.decode(&self.latent(x)?))
    }

    /// Mean squared per-pixel reconstruction error in evaluation mode.
    pub fn reconstruction_error(&self, x: &DMatrix<f64>) -> Result<f64> {
        if x.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: format!("{} columns", self.input_dim),
                got: format!("{} columns", x.ncols()),
            });
        }
        let r = self.reconstruct(x)?;
        Ok(mean_squared(&r, x))
    }

    /// Refits the Grassmann layer state on the encoded `data`.
    fn refresh(&mut self, data: &DMatrix<f64>) -> Result<()> {
        let h = self.encode(data);
        if let Bottleneck::Grassmann(layer) = &mut self.bottleneck {
            layer.forward(&h, true)?;
        }
        Ok(())
    }

    fn penalty(&self) -> f64 {
        match &self.bottleneck {
            Bottleneck::Grassmann(layer) => layer.penalty(),
            Bottleneck::Dense(_) => 0.0,
        }
    }
}

fn decode_with(dec_w: &DMatrix<f64>, dec_b: &DVector<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut pre = z * dec_w.transpose();
    for mut row in pre.row_iter_mut() {
        row += dec_b.transpose();
    }
    pre.map(sigmoid)
}

fn mean_squared(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm_squared() / a.len() as f64
}

/// Reconstruction error of pixel-space PCA to k components fitted on `train`
/// and applied to `eval`.
pub fn pca_reconstruction_error(train: &DMatrix<f64>, eval: &DMatrix<f64>, k: usize) -> Result<f64> {
    let u = pca_oracle(train, k)?.basis().clone();
    let mean = column_means(train).transpose();
    let mut xc = eval.clone();
    for mut row in xc.row_iter_mut() {
        row -= &mean;
    }
    let resid = &xc - &xc * &u * u.transpose();
    Ok(resid.norm_squared() / eval.len() as f64)
}

#[derive(Debug, Clone)]
struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(lr: f64, n: usize) -> Self {
        Self {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let mut idx = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            for (pi, gi) in p.iter_mut().zip(g.iter()) {
                self.m[idx] = Self::BETA1 * self.m[idx] + (1.0 - Self::BETA1) * gi;
                self.v[idx] = Self::BETA2 * self.v[idx] + (1.0 - Self::BETA2) * gi * gi;
                *pi -= self.lr * (self.m[idx] / c1) / ((self.v[idx] / c2).sqrt() + Self::EPS);
                idx += 1;
            }
        }
    }
}

struct Gradients {
    enc_w: DMatrix<f64>,
    enc_b: DVector<f64>,
    dec_w: DMatrix<f64>,
    dec_b: DVector<f64>,
    bottleneck: Vec<f64>,
}

/// Batch loss and gradient. Dense parameters are differentiated analytically.
/// For the Grassmann bottleneck the subspace basis is held fixed in the
/// backward pass to the encoder (the row-mean dependence is kept), and θ is
/// differenced centrally with the encoder output fixed, over `coords` only
/// (every coordinate when `None`).
fn batch_gradient(spec: &mut AutoencoderSpec, x: &DMatrix<f64>, fd_step: f64, coords: Option<&[usize]>) -> Result<(f64, Gradients)> {
    let h = spec.encode(x);
    let scale = 2.0 / x.len() as f64;
    let (z, basis, dense_w, theta_grad) = match &mut spec.bottleneck {
        Bottleneck::Grassmann(layer) => {
            let fit = layer.forward(&h, true)?;
            let frozen = layer.clone();
            let (dec_w, dec_b) = (&spec.dec_w, &spec.dec_b);
            let base_theta = frozen.theta.clone();
            let all: Vec<usize>;
            let coords = match coords {
                Some(c) => c,
                None => {
                    all = (0..base_theta.len()).collect();
                    &all
                }
            };
            let partials = finite_diff_partials(coords.len(), fd_step, |j, delta| {
                let mut theta = base_theta.clone();
                theta[coords[j]] += delta;
                let fit = frozen.fit_with(&h, &theta)?;
                let r = decode_with(dec_w, dec_b, &fit.projected());
                Ok(mean_squared(&r, x) + crate::layers::weight_penalty(&theta, frozen.lambda))
            })?;
            let mut grad = vec![0.0; base_theta.len()];
            for (&i, g) in coords.iter().zip(partials) {
                grad[i] = g;
            }
            (fit.projected(), Some(fit.basis), None, grad)
        }
        Bottleneck::Dense(w) => (&h * w.transpose(), None, Some(w.clone()), Vec::new()),
    };
    let r = spec.decode(&z);
    let loss = mean_squared(&r, x) + spec.penalty();
    let d_pre = (&r - x).component_mul(&r.map(|v| v * (1.0 - v))) * scale;
    let dec_w = d_pre.transpose() * &z;
    let dec_b = d_pre.row_sum().transpose();
    let dz = &d_pre * &spec.dec_w;
    let (dh, bottleneck) = match (basis, dense_w) {
        (Some(u), _) => {
            let dhc = dz * u.transpose();
            let col_mean = dhc.row_mean();
            let mut dh = dhc;
            for mut row in dh.row_iter_mut() {
                row -= &col_mean;
            }
            (dh, theta_grad)
        }
        (None, Some(w)) => {
            let dw = dz.transpose() * &h;
            (dz * w, dw.as_slice().to_vec())
        }
        (None, None) => unreachable!("bottleneck yields a basis or a weight matrix"),
    };
    let d_enc = dh.component_mul(&h.map(|v| 1.0 - v * v));
    let enc_w = d_enc.transpose() * x;
    let enc_b = d_enc.row_sum().transpose();
    Ok((
        loss,
        Gradients {
            enc_w,
            enc_b,
            dec_w,
            dec_b,
            bottleneck,
        },
    ))
}

/// Trained autoencoder and its per-epoch metrics.
#[derive(Debug, Clone)]
pub struct AutoencoderOutcome {
    pub spec: AutoencoderSpec,
    pub records: Vec<MetricsRecord>,
}

fn epoch_record(spec: &AutoencoderSpec, train: &DMatrix<f64>, val: Option<&DMatrix<f64>>, experiment: &str, seed: u64, epoch: usize, start: &Instant) -> Result<MetricsRecord> {
    let train_err = spec.reconstruction_error(train)?;
    if !train_err.is_finite() {
        return Err(Error::Diverged { epoch, loss: train_err });
    }
    let mut rec = MetricsRecord::new(experiment, seed, epoch, 0.0)
        .with("train_reconstruction", train_err)
        .with("param_count", spec.param_count() as f64);
    if let Some(v) = val {
        rec = rec.with("val_reconstruction", spec.reconstruction_error(v)?);
    }
    if let Bottleneck::Grassmann(layer) = &spec.bottleneck {
        rec = rec.with("max_weight_sum_deviation", layer.weight_sum_deviation());
    }
    rec.wall_s = start.elapsed().as_secs_f64();
    Ok(rec)
}

/// Trains on the rows of `train` (pixels in [0, 1]) with minibatch Adam.
/// Emits one record before training and one after each epoch; evaluation uses
/// the Grassmann layer state refitted on the whole encoded training set.
pub fn autoencoder_train(
    mut spec: AutoencoderSpec,
    train: &DMatrix<f64>,
    val: Option<&DMatrix<f64>>,
    cfg: &AutoencoderConfig,
    experiment: &str,
) -> Result<AutoencoderOutcome> {
    spec.validate()?;
    cfg.validate()?;
    if train.nrows() == 0 {
        return Err(Error::Empty("training data"));
    }
    if train.ncols() != spec.input_dim || val.is_some_and(|v| v.ncols() != spec.input_dim) {
        return Err(Error::DimensionMismatch {
            expected: format!("{} columns", spec.input_dim),
            got: format!("{} columns", train.ncols()),
        });
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    spec.refresh(train)?;
    let mut records = vec![epoch_record(&spec, train, val, experiment, cfg.seed, 0, &start)?];
    let n_params = spec.enc_w.len() + spec.enc_b.len() + spec.dec_w.len() + spec.dec_b.len() + spec.bottleneck_param_count();
    let mut adam = Adam::new(cfg.lr, n_params);
    let mut order: Vec<usize> = (0..train.nrows()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < spec.latent_k {
                continue;
            }
            let x = train.select_rows(chunk);
            let coords = match (&spec.bottleneck, cfg.fd_coordinates) {
                (Bottleneck::Grassmann(layer), Some(c)) if c < layer.blocks() => {
                    let mut idx = sample(&mut rng, layer.blocks(), c).into_vec();
                    idx.sort_unstable();
                    Some(idx)
                }
                _ => None,
            };
            let (loss, g) = batch_gradient(&mut spec, &x, cfg.fd_step, coords.as_deref())?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            let AutoencoderSpec {
                enc_w,
                enc_b,
                dec_w,
                dec_b,
                bottleneck,
                ..
            } = &mut spec;
            let bottleneck_params: &mut [f64] = match bottleneck {
                Bottleneck::Grassmann(layer) => &mut layer.theta,
                Bottleneck::Dense(w) => w.as_mut_slice(),
            };
            adam.step(
                &mut [enc_w.as_mut_slice(), enc_b.as_mut_slice(), dec_w.as_mut_slice(), dec_b.as_mut_slice(), bottleneck_params],
                &[g.enc_w.as_slice(), g.enc_b.as_slice(), g.dec_w.as_slice(), g.dec_b.as_slice(), &g.bottleneck],
            );
            if cfg.weight_decay > 0.0 {
                let keep = 1.0 - cfg.lr * cfg.weight_decay;
                enc_w.scale_mut(keep);
                dec_w.scale_mut(keep);
            }
        }
        spec.refresh(train)?;
        records.push(epoch_record(&spec, train, val, experiment, cfg.seed, epoch, &start)?);
    }
    Ok(AutoencoderOutcome { spec, records })
}
