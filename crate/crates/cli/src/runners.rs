//! One function per experiment. Each returns metric rows; the caller writes
//! the CSV.

use std::time::Instant;

use manifoldnet::data::{load_csv_vectors, load_idx_images, stratified_split, synth_spd_sequences, SynthSpdConfig};
use manifoldnet::grassmann_reduce::{
    autoencoder_train, pca_oracle, pca_reconstruction_error, AutoencoderConfig, AutoencoderSpec, StreamingSubspace,
};
use manifoldnet::ifme::{ifme_wfm, wfm_oracle, OracleConfig, WeightVector};
use manifoldnet::layers::{train_classifier, SgdConfig, SpdTcn, SpdTcnSpec, TemporalWfmSpec};
use manifoldnet::manifold::linalg::gaussian_matrix;
use manifoldnet::manifold::{
    BallSpec, Euclidean, EuclideanPoint, Grassmann, GrassmannPoint, Manifold, Spd, SpdMetric, SpdPoint, Sphere,
    SpherePoint,
};
use manifoldnet::metrics::MetricsRecord;
use manifoldnet::{Error, Result};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{
    AutoencoderCliConfig, EquivarianceConfig, Experiment, ExperimentConfig, GrassmannPcaConfig, ManifoldKind,
    SpdMetricKind, SpdSeqConfig, WfmDemoConfig,
};

pub fn run(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<MetricsRecord>> {
    let start = Instant::now();
    let id = cfg.experiment.id();
    let mut records = match cfg.experiment {
        Experiment::WfmDemo => wfm_demo(&cfg.wfm_demo, seed, id)?,
        Experiment::EquivarianceCheck => equivariance_check(&cfg.equivariance, seed, id)?,
        Experiment::SpdSeqClassify => spd_seq_classify(&cfg.spd_seq, seed, id)?,
        Experiment::GrassmannPca => grassmann_pca(&cfg.grassmann_pca, seed, id)?,
        Experiment::AutoencodeMnist => autoencode_mnist(&cfg.autoencoder, seed, id)?,
    };
    for r in &mut records {
        if r.wall_s == 0.0 {
            r.wall_s = start.elapsed().as_secs_f64();
        }
    }
    Ok(records)
}

fn ball_samples<M: Manifold>(m: &M, center: M::Point, radius: f64, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<M::Point>> {
    let ball = BallSpec::new(center, radius);
    (0..n).map(|_| m.random_point_in_ball(&ball, rng)).collect()
}

fn random_weights(n: usize, rng: &mut ChaCha8Rng) -> Result<WeightVector> {
    WeightVector::new((0..n).map(|_| rng.random_range(0.1..1.0)).collect())
}

fn demo_on<M: Manifold>(m: &M, center: M::Point, cfg: &WfmDemoConfig, seed: u64, id: &str) -> Result<Vec<MetricsRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_max = *cfg.sizes.last().expect("validated non-empty");
    let points = ball_samples(m, center, cfg.radius, n_max, &mut rng)?;
    let weights = random_weights(n_max, &mut rng)?;
    let mut out = Vec::new();
    for &n in &cfg.sizes {
        let w = WeightVector::new(weights.as_slice()[..n].to_vec())?;
        let est = ifme_wfm(m, &points[..n], &w)?;
        let exact = wfm_oracle(m, &points[..n], &w, &OracleConfig::default())?;
        out.push(MetricsRecord::new(id, seed, n, 0.0).with("ifme_oracle_distance", m.distance(&est, &exact)?));
    }
    Ok(out)
}

fn wfm_demo(cfg: &WfmDemoConfig, seed: u64, id: &str) -> Result<Vec<MetricsRecord>> {
    let d = cfg.dim;
    match cfg.manifold {
        ManifoldKind::Spd => demo_on(&Spd::affine_invariant(d), SpdPoint::identity(d), cfg, seed, id),
        ManifoldKind::SpdLogEuclidean => demo_on(&Spd::log_euclidean(d), SpdPoint::identity(d), cfg, seed, id),
        ManifoldKind::Grassmann => demo_on(
            &Grassmann::new(d, cfg.sub_dim)?,
            GrassmannPoint::coordinate(d, cfg.sub_dim),
            cfg,
            seed,
            id,
        ),
        ManifoldKind::Sphere => demo_on(&Sphere::new(d), north_pole(d)?, cfg, seed, id),
        ManifoldKind::Euclidean => demo_on(&Euclidean::new(d), EuclideanPoint::new(vec![0.0; d])?, cfg, seed, id),
    }
}

fn north_pole(n: usize) -> Result<SpherePoint> {
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    SpherePoint::new(v)
}

/// Largest `d(ifme({g·Xᵢ}), g·ifme({Xᵢ}))` over random samples, weights and
/// isometries.
pub fn max_equivariance_error<M: Manifold>(
    m: &M,
    center: M::Point,
    radius: f64,
    points: usize,
    trials: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let xs = ball_samples(m, center.clone(), radius, points, rng)?;
        let w = random_weights(points, rng)?;
        let g = m.random_isometry(rng);
        let moved = xs.iter().map(|x| m.act(&g, x)).collect::<Result<Vec<_>>>()?;
        let lhs = ifme_wfm(m, &moved, &w)?;
        let rhs = m.act(&g, &ifme_wfm(m, &xs, &w)?)?;
        worst = worst.max(m.distance(&lhs, &rhs)?);
    }
    Ok(worst)
}

fn equivariance_check(cfg: &EquivarianceConfig, seed: u64, id: &str) -> Result<Vec<MetricsRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = cfg.dim;
    let (r, p, t) = (cfg.radius, cfg.points, cfg.trials);
    let mut rec = MetricsRecord::new(id, seed, 0, 0.0);
    for kind in ManifoldKind::ALL {
        let err = match kind {
            ManifoldKind::Spd => max_equivariance_error(&Spd::affine_invariant(d), SpdPoint::identity(d), r, p, t, &mut rng)?,
            ManifoldKind::SpdLogEuclidean => {
                max_equivariance_error(&Spd::log_euclidean(d), SpdPoint::identity(d), r, p, t, &mut rng)?
            }
            ManifoldKind::Grassmann => {
                let k = (d / 2).max(1);
                max_equivariance_error(&Grassmann::new(d, k)?, GrassmannPoint::coordinate(d, k), r, p, t, &mut rng)?
            }
            ManifoldKind::Sphere => max_equivariance_error(&Sphere::new(d), north_pole(d)?, r, p, t, &mut rng)?,
            ManifoldKind::Euclidean => {
                max_equivariance_error(&Euclidean::new(d), EuclideanPoint::new(vec![0.0; d])?, r, p, t, &mut rng)?
            }
        };
        rec = rec.with(format!("max_equiv_error_{}", kind.id()), err);
    }
    if cfg.network_trials > 0 {
        rec = rec.with("max_invariance_error_network", network_invariance(cfg.network_trials, seed)?);
    }
    Ok(vec![rec])
}

/// Largest change of the class probabilities of a random SPD network when
/// one congruence is applied to every input frame.
fn network_invariance(trials: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let spec = SpdTcnSpec::standard(4, 20, 2);
    let model = SpdTcn::new(spec, &mut rng)?;
    let data = synth_spd_sequences(&SynthSpdConfig {
        orientations_deg: vec![20.0],
        per_class: trials,
        frames: 20,
        dim: 4,
        noise: 0.05,
        seed,
    })?;
    let m = model.manifold().clone();
    let mut worst = 0.0f64;
    for s in &data {
        let g = m.random_isometry(&mut rng);
        let moved = s.frames.iter().map(|x| m.act(&g, x)).collect::<Result<Vec<_>>>()?;
        let diff = (model.forward(&moved)? - model.forward(&s.frames)?).amax();
        worst = worst.max(diff);
    }
    Ok(worst)
}

fn spd_seq_classify(cfg: &SpdSeqConfig, seed: u64, id: &str) -> Result<Vec<MetricsRecord>> {
    let data = synth_spd_sequences(&SynthSpdConfig {
        orientations_deg: cfg.orientations_deg.clone(),
        per_class: cfg.per_class,
        frames: cfg.frames,
        dim: cfg.dim,
        noise: cfg.noise,
        seed,
    })?;
    let (train, test) = stratified_split(&data, cfg.test_fraction, seed)?;
    let mut spec = SpdTcnSpec::standard(cfg.dim, cfg.frames, cfg.orientations_deg.len());
    spec.layers = cfg
        .layers
        .iter()
        .map(|l| TemporalWfmSpec {
            kernel: l.kernel,
            stride: l.stride,
            in_channels: l.in_channels,
            out_channels: l.out_channels,
        })
        .collect();
    spec.lambda = cfg.lambda;
    spec.metric = match cfg.metric {
        SpdMetricKind::AffineInvariant => SpdMetric::AffineInvariant,
        SpdMetricKind::LogEuclidean => SpdMetric::LogEuclidean,
    };
    let sgd = SgdConfig {
        lr: cfg.lr,
        momentum: cfg.momentum,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        fd_step: cfg.fd_step,
        fd_coordinates: cfg.fd_coordinates,
    };
    let outcome = train_classifier(&spec, &train, &test, &sgd, seed, id)?;
    let mut records = outcome.records;
    if let Some(first) = records.first_mut() {
        first.values.push(("param_count".into(), outcome.model.param_count() as f64));
    }
    Ok(records)
}

fn grassmann_pca(cfg: &GrassmannPcaConfig, seed: u64, id: &str) -> Result<Vec<MetricsRecord>> {
    let data = match &cfg.data_csv {
        Some(path) => {
            let raw = load_csv_vectors(path)?;
            let mean = raw.row_mean();
            let mut centered = raw;
            for mut row in centered.row_iter_mut() {
                row -= &mean;
            }
            centered
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = gaussian_matrix(cfg.samples, cfg.ambient_dim, &mut rng);
            for (j, v) in cfg.spectrum.iter().enumerate() {
                x.column_mut(j).scale_mut(v.sqrt());
            }
            x
        }
    };
    if cfg.k > data.ncols() {
        return Err(Error::InvalidParameter {
            name: "grassmann_pca.k",
            reason: format!("exceeds the data dimension {}", data.ncols()),
        });
    }
    let mut stream = StreamingSubspace::new(data.ncols(), cfg.k)?;
    let mut out = Vec::new();
    let mut consumed = 0;
    for &c in cfg.checkpoints.iter().filter(|&&c| c <= data.nrows()) {
        while consumed < c {
            stream.push(data.row(consumed).transpose())?;
            consumed += 1;
        }
        let est = stream.estimate()?;
        let prefix: DMatrix<f64> = data.rows(0, c).into_owned();
        let oracle = pca_oracle(&prefix, cfg.k)?;
        out.push(
            MetricsRecord::new(id, seed, c, 0.0)
                .with("subspace_distance", est.point.subspace_distance(&oracle))
                .with("blocks_used", est.blocks_used as f64)
                .with("skipped_rank_deficient", est.skipped_rank_deficient as f64)
                .with("skipped_cut_locus", est.skipped_cut_locus as f64),
        );
    }
    Ok(out)
}

fn prefixed(records: Vec<MetricsRecord>, prefix: &str) -> Vec<MetricsRecord> {
    records
        .into_iter()
        .map(|mut r| {
            for (name, _) in &mut r.values {
                *name = format!("{prefix}_{name}");
            }
            r
        })
        .collect()
}

fn autoencode_mnist(cfg: &AutoencoderCliConfig, seed: u64, id: &str) -> Result<Vec<MetricsRecord>> {
    let train_path = cfg.train_images.as_ref().expect("validated");
    let val_path = cfg.val_images.as_ref().expect("validated");
    let mut train = load_idx_images(train_path)?;
    if let Some(n) = cfg.train_limit {
        train = train.take(n);
    }
    let train = train.pixels;
    let val = load_idx_images(val_path)?.pixels;
    let input = train.ncols();
    if val.ncols() != input {
        return Err(Error::DimensionMismatch {
            expected: format!("{input} pixels"),
            got: format!("{} pixels", val.ncols()),
        });
    }
    let blocks = cfg.resolved_blocks();
    let ae_cfg = AutoencoderConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        lr: cfg.lr,
        fd_step: cfg.fd_step,
        fd_coordinates: cfg.fd_coordinates,
        weight_decay: cfg.weight_decay,
        seed,
    };
    let mut g_spec = AutoencoderSpec::grassmann(input, cfg.hidden_dim, cfg.latent_k, blocks, cfg.lambda, seed)?;
    g_spec.init_decoder_bias(&train);
    let g_params = g_spec.param_count();
    let mut records = prefixed(autoencoder_train(g_spec, &train, Some(&val), &ae_cfg, id)?.records, "grassmann");
    if cfg.baselines {
        let mut d_spec = AutoencoderSpec::dense(input, cfg.hidden_dim, cfg.latent_k, seed)?;
        d_spec.init_decoder_bias(&train);
        let d_params = d_spec.param_count();
        records.extend(prefixed(autoencoder_train(d_spec, &train, Some(&val), &ae_cfg, id)?.records, "dense"));
        records.push(
            MetricsRecord::new(id, seed, cfg.epochs, 0.0)
                .with("pca_val_reconstruction", pca_reconstruction_error(&train, &val, cfg.latent_k)?)
                .with("param_count_difference", d_params as f64 - g_params as f64),
        );
    }
    Ok(records)
}
