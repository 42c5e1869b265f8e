//! JSON experiment configuration. Every section has defaults; only the
//! section of the selected experiment is validated.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    WfmDemo,
    EquivarianceCheck,
    SpdSeqClassify,
    GrassmannPca,
    AutoencodeMnist,
}

impl Experiment {
    pub fn id(self) -> &'static str {
        match self {
            Experiment::WfmDemo => "wfm-demo",
            Experiment::EquivarianceCheck => "equivariance-check",
            Experiment::SpdSeqClassify => "spd-seq-classify",
            Experiment::GrassmannPca => "grassmann-pca",
            Experiment::AutoencodeMnist => "autoencode-mnist",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldKind {
    #[default]
    Spd,
    SpdLogEuclidean,
    Grassmann,
    Sphere,
    Euclidean,
}

impl ManifoldKind {
    pub const ALL: [ManifoldKind; 5] = [
        ManifoldKind::Spd,
        ManifoldKind::SpdLogEuclidean,
        ManifoldKind::Grassmann,
        ManifoldKind::Sphere,
        ManifoldKind::Euclidean,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ManifoldKind::Spd => "spd",
            ManifoldKind::SpdLogEuclidean => "spd_log_euclidean",
            ManifoldKind::Grassmann => "grassmann",
            ManifoldKind::Sphere => "sphere",
            ManifoldKind::Euclidean => "euclidean",
        }
    }
}

/// A field that failed validation, with a dotted path into the config.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

impl FieldError {
    fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

type Check = Result<(), FieldError>;

fn positive(field: &str, v: usize) -> Check {
    if v == 0 {
        return Err(FieldError::new(field, "must be positive"));
    }
    Ok(())
}

fn positive_f(field: &str, v: f64) -> Check {
    if !(v > 0.0) || !v.is_finite() {
        return Err(FieldError::new(field, format!("{v} must be positive and finite")));
    }
    Ok(())
}

fn existing_file(field: &str, p: &Path) -> Check {
    if !p.is_file() {
        return Err(FieldError::new(field, format!("file {} does not exist", p.display())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WfmDemoConfig {
    pub manifold: ManifoldKind,
    /// Matrix side for SPD, ambient dimension otherwise.
    pub dim: usize,
    /// Subspace dimension on the Grassmannian.
    pub sub_dim: usize,
    pub radius: f64,
    /// Prefix sizes at which the inductive mean is compared with the exact one.
    pub sizes: Vec<usize>,
}

impl Default for WfmDemoConfig {
    fn default() -> Self {
        Self {
            manifold: ManifoldKind::Spd,
            dim: 3,
            sub_dim: 2,
            radius: 0.5,
            sizes: vec![5, 25, 100],
        }
    }
}

impl WfmDemoConfig {
    fn validate(&self) -> Check {
        positive("wfm_demo.dim", self.dim)?;
        positive("wfm_demo.sub_dim", self.sub_dim)?;
        if self.manifold == ManifoldKind::Grassmann && self.sub_dim > self.dim {
            return Err(FieldError::new("wfm_demo.sub_dim", "must not exceed dim"));
        }
        if self.manifold == ManifoldKind::Sphere && self.dim < 2 {
            return Err(FieldError::new("wfm_demo.dim", "sphere needs dim >= 2"));
        }
        positive_f("wfm_demo.radius", self.radius)?;
        let bound = match self.manifold {
            ManifoldKind::Grassmann | ManifoldKind::Sphere => std::f64::consts::FRAC_PI_4,
            _ => f64::INFINITY,
        };
        if self.radius >= bound {
            return Err(FieldError::new("wfm_demo.radius", format!("must be below {bound}")));
        }
        if self.sizes.is_empty() || self.sizes[0] == 0 || self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FieldError::new("wfm_demo.sizes", "must be positive and strictly increasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquivarianceConfig {
    pub trials: usize,
    pub points: usize,
    pub dim: usize,
    pub radius: f64,
    /// Trials of the whole-network invariance check (0 disables it).
    pub network_trials: usize,
}

impl Default for EquivarianceConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            points: 8,
            dim: 3,
            radius: 0.5,
            network_trials: 3,
        }
    }
}

impl EquivarianceConfig {
    fn validate(&self) -> Check {
        positive("equivariance.trials", self.trials)?;
        positive("equivariance.points", self.points)?;
        if self.dim < 3 {
            return Err(FieldError::new("equivariance.dim", "must be at least 3"));
        }
        positive_f("equivariance.radius", self.radius)?;
        if self.radius >= std::f64::consts::FRAC_PI_4 {
            return Err(FieldError::new("equivariance.radius", "must be below π/4"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpdMetricKind {
    #[default]
    AffineInvariant,
    LogEuclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpdSeqConfig {
    pub orientations_deg: Vec<f64>,
    pub per_class: usize,
    pub frames: usize,
    pub dim: usize,
    pub noise: f64,
    pub test_fraction: f64,
    pub layers: Vec<LayerConfig>,
    pub metric: SpdMetricKind,
    pub lambda: f64,
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub fd_step: f64,
    pub fd_coordinates: Option<usize>,
}

impl Default for SpdSeqConfig {
    fn default() -> Self {
        let l = |kernel, stride, in_channels, out_channels| LayerConfig {
            kernel,
            stride,
            in_channels,
            out_channels,
        };
        Self {
            orientations_deg: vec![30.0, 60.0],
            per_class: 20,
            frames: 20,
            dim: 8,
            noise: 0.01,
            test_fraction: 0.2,
            layers: vec![l(5, 3, 1, 1), l(2, 1, 1, 4), l(2, 1, 4, 8), l(2, 1, 8, 16)],
            metric: SpdMetricKind::AffineInvariant,
            lambda: 1.0,
            lr: 0.05,
            momentum: 0.9,
            epochs: 4,
            batch_size: 8,
            fd_step: 1e-5,
            fd_coordinates: Some(16),
        }
    }
}

impl SpdSeqConfig {
    fn validate(&self) -> Check {
        if self.orientations_deg.len() < 2 {
            return Err(FieldError::new("spd_seq.orientations_deg", "need at least two classes"));
        }
        for (i, a) in self.orientations_deg.iter().enumerate() {
            if !a.is_finite() || self.orientations_deg[..i].contains(a) {
                return Err(FieldError::new(
                    format!("spd_seq.orientations_deg[{i}]"),
                    "must be finite and distinct",
                ));
            }
        }
        positive("spd_seq.per_class", self.per_class)?;
        if self.frames < 2 {
            return Err(FieldError::new("spd_seq.frames", "must be at least 2"));
        }
        if self.dim < 2 {
            return Err(FieldError::new("spd_seq.dim", "must be at least 2"));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(FieldError::new("spd_seq.noise", "must be finite and >= 0"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(FieldError::new("spd_seq.test_fraction", "must lie in (0, 1)"));
        }
        if self.layers.is_empty() {
            return Err(FieldError::new("spd_seq.layers", "need at least one layer"));
        }
        let mut len = self.frames;
        let mut channels = 1;
        for (i, l) in self.layers.iter().enumerate() {
            let f = |name: &str| format!("spd_seq.layers[{i}].{name}");
            positive(&f("kernel"), l.kernel)?;
            positive(&f("stride"), l.stride)?;
            positive(&f("out_channels"), l.out_channels)?;
            if l.kernel > len {
                return Err(FieldError::new(f("kernel"), format!("kernel {} exceeds input length {len}", l.kernel)));
            }
            if l.in_channels != channels {
                return Err(FieldError::new(f("in_channels"), format!("expected {channels} from the previous layer")));
            }
            len = (len - l.kernel) / l.stride + 1;
            channels = l.out_channels;
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(FieldError::new("spd_seq.lambda", "must be finite and >= 0"));
        }
        positive_f("spd_seq.lr", self.lr)?;
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(FieldError::new("spd_seq.momentum", "must lie in [0, 1)"));
        }
        positive("spd_seq.batch_size", self.batch_size)?;
        positive_f("spd_seq.fd_step", self.fd_step)?;
        if let Some(c) = self.fd_coordinates {
            positive("spd_seq.fd_coordinates", c)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrassmannPcaConfig {
    pub ambient_dim: usize,
    pub k: usize,
    /// Leading covariance eigenvalues; the remaining ones are 1.
    pub spectrum: Vec<f64>,
    pub samples: usize,
    /// Sample counts at which the estimate is compared with the oracle.
    pub checkpoints: Vec<usize>,
    /// Optional CSV of vectors (one per row, no header) used instead of the
    /// synthetic Gaussian stream.
    pub data_csv: Option<PathBuf>,
}

impl Default for GrassmannPcaConfig {
    fn default() -> Self {
        Self {
            ambient_dim: 10,
            k: 3,
            spectrum: vec![5.0, 4.0, 3.0],
            samples: 30000,
            checkpoints: vec![1000, 3000, 10000, 30000],
            data_csv: None,
        }
    }
}

impl GrassmannPcaConfig {
    fn validate(&self) -> Check {
        positive("grassmann_pca.k", self.k)?;
        if let Some(p) = &self.data_csv {
            existing_file("grassmann_pca.data_csv", p)?;
        } else {
            if self.ambient_dim < self.k {
                return Err(FieldError::new("grassmann_pca.ambient_dim", "must be at least k"));
            }
            if self.spectrum.len() > self.ambient_dim {
                return Err(FieldError::new("grassmann_pca.spectrum", "longer than ambient_dim"));
            }
            if let Some(i) = self.spectrum.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(FieldError::new(format!("grassmann_pca.spectrum[{i}]"), "must be positive"));
            }
            positive("grassmann_pca.samples", self.samples)?;
        }
        if self.checkpoints.is_empty() || self.checkpoints[0] == 0 || self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FieldError::new("grassmann_pca.checkpoints", "must be positive and strictly increasing"));
        }
        if self.data_csv.is_none() && *self.checkpoints.last().expect("non-empty") > self.samples {
            return Err(FieldError::new("grassmann_pca.checkpoints", "exceed samples"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutoencoderCliConfig {
    pub train_images: Option<PathBuf>,
    pub val_images: Option<PathBuf>,
    /// Use only the first `train_limit` training images.
    pub train_limit: Option<usize>,
    pub hidden_dim: usize,
    pub latent_k: usize,
    /// Raw weights of the Grassmann layer; `batch_size / latent_k` when unset.
    pub blocks: Option<usize>,
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub fd_step: f64,
    pub fd_coordinates: Option<usize>,
    pub weight_decay: f64,
    /// Also train the dense-bottleneck model and report pixel PCA.
    pub baselines: bool,
}

impl Default for AutoencoderCliConfig {
    fn default() -> Self {
        Self {
            train_images: None,
            val_images: None,
            train_limit: Some(1000),
            hidden_dim: 32,
            latent_k: 2,
            blocks: None,
            lambda: 1.0,
            epochs: 200,
            batch_size: 250,
            lr: 0.005,
            fd_step: 1e-5,
            fd_coordinates: Some(10),
            weight_decay: 0.5,
            baselines: true,
        }
    }
}

impl AutoencoderCliConfig {
    pub fn resolved_blocks(&self) -> usize {
        self.blocks.unwrap_or((self.batch_size / self.latent_k.max(1)).max(1))
    }

    fn validate(&self) -> Check {
        match &self.train_images {
            Some(p) => existing_file("autoencoder.train_images", p)?,
            None => return Err(FieldError::new("autoencoder.train_images", "required")),
        }
        match &self.val_images {
            Some(p) => existing_file("autoencoder.val_images", p)?,
            None => return Err(FieldError::new("autoencoder.val_images", "required")),
        }
        if let Some(n) = self.train_limit {
            positive("autoencoder.train_limit", n)?;
        }
        positive("autoencoder.hidden_dim", self.hidden_dim)?;
        positive("autoencoder.latent_k", self.latent_k)?;
        if self.latent_k > self.hidden_dim {
            return Err(FieldError::new("autoencoder.latent_k", "must not exceed hidden_dim"));
        }
        if let Some(b) = self.blocks {
            positive("autoencoder.blocks", b)?;
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(FieldError::new("autoencoder.lambda", "must be finite and >= 0"));
        }
        positive("autoencoder.batch_size", self.batch_size)?;
        if self.batch_size < self.latent_k {
            return Err(FieldError::new("autoencoder.batch_size", "must be at least latent_k"));
        }
        positive_f("autoencoder.lr", self.lr)?;
        positive_f("autoencoder.fd_step", self.fd_step)?;
        if let Some(c) = self.fd_coordinates {
            positive("autoencoder.fd_coordinates", c)?;
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(FieldError::new("autoencoder.weight_decay", "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    /// Metrics CSV path; `--out` takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub wfm_demo: WfmDemoConfig,
    #[serde(default)]
    pub equivariance: EquivarianceConfig,
    #[serde(default)]
    pub spd_seq: SpdSeqConfig,
    #[serde(default)]
    pub grassmann_pca: GrassmannPcaConfig,
    #[serde(default)]
    pub autoencoder: AutoencoderCliConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, FieldError> {
        serde_json::from_str(text).map_err(|e| FieldError::new("config", e.to_string()))
    }

    /// Reads a config file. Relative data paths are resolved against the
    /// directory containing the file.
    pub fn load(path: &Path) -> Result<Self, FieldError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FieldError::new("config", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        resolve(&mut cfg.grassmann_pca.data_csv);
        resolve(&mut cfg.autoencoder.train_images);
        resolve(&mut cfg.autoencoder.val_images);
        resolve(&mut cfg.output);
        Ok(cfg)
    }

    pub fn validate(&self) -> Check {
        match self.experiment {
            Experiment::WfmDemo => self.wfm_demo.validate(),
            Experiment::EquivarianceCheck => self.equivariance.validate(),
            Experiment::SpdSeqClassify => self.spd_seq.validate(),
            Experiment::GrassmannPca => self.grassmann_pca.validate(),
            Experiment::AutoencodeMnist => self.autoencoder.validate(),
        }
    }
}
