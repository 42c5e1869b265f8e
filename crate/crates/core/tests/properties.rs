use manifoldnet::grassmann_reduce::{center_rows, grassmann_avg_layer, StreamingSubspace};
use manifoldnet::ifme::{ifme_wfm, OracleConfig, WeightVector};
use manifoldnet::layers::{
    cross_entropy, fc_softmax, finite_diff_grad, head_gradient, nonexpansive_check, temporal_wfm_forward,
    ClassifierHead, SpdTcn, SpdTcnSpec, TemporalWfmSpec, WfmLayerParams,
};
use manifoldnet::manifold::linalg::{gaussian_matrix, random_orthogonal};
use manifoldnet::manifold::{
    BallSpec, Euclidean, EuclideanPoint, Grassmann, GrassmannPoint, Manifold, Spd, SpdPoint, Sphere, SpherePoint,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

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

/// Geodesic, exp/log, isometry and triangle residuals for one random draw.
fn geometry_residuals<M: Manifold>(m: &M, center: &M::Point, radius: f64, seed: u64) -> [f64; 5] {
    let mut r = rng(seed);
    let pts = sample(m, center, radius, 3, &mut r);
    let (p, q, s) = (&pts[0], &pts[1], &pts[2]);
    let t = r.random_range(0.0..1.0);
    let d = m.distance(p, q).unwrap();
    let gamma = m.geodesic(p, q, t).unwrap();
    let endpoint = m.distance(&m.geodesic(p, q, 0.0).unwrap(), p).unwrap()
        + m.distance(&m.geodesic(p, q, 1.0).unwrap(), q).unwrap();
    let proportional = (m.distance(p, &gamma).unwrap() - t * d).abs();
    let inversion = m.distance(&m.exp_map(p, &m.log_map(p, q).unwrap()).unwrap(), q).unwrap();
    let g = m.random_isometry(&mut r);
    let iso = (m.distance(&m.act(&g, p).unwrap(), &m.act(&g, q).unwrap()).unwrap() - d).abs();
    let triangle = (m.distance(p, s).unwrap() - d - m.distance(q, s).unwrap()).max(0.0);
    [endpoint, proportional, inversion, iso, triangle]
}

fn assert_geometry(res: [f64; 5]) -> Result<(), TestCaseError> {
    prop_assert!(res[0] < 1e-8, "endpoint {}", res[0]);
    prop_assert!(res[1] < 1e-8, "proportionality {}", res[1]);
    prop_assert!(res[2] < 1e-8, "exp∘log {}", res[2]);
    prop_assert!(res[3] < 1e-9, "isometry {}", res[3]);
    prop_assert!(res[4] < 1e-9, "triangle {}", res[4]);
    Ok(())
}

fn equivariance_error<M: Manifold>(m: &M, center: &M::Point, radius: f64, n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let xs = sample(m, center, radius, n, &mut r);
    let w = weights(n, &mut r);
    let g = m.random_isometry(&mut r);
    let moved: Vec<_> = xs.iter().map(|x| m.act(&g, x).unwrap()).collect();
    let lhs = ifme_wfm(m, &moved, &w).unwrap();
    let rhs = m.act(&g, &ifme_wfm(m, &xs, &w).unwrap()).unwrap();
    m.distance(&lhs, &rhs).unwrap()
}

fn nonexpansive_ratio<M: Manifold>(m: &M, center: &M::Point, radius: f64, seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = r.random_range(2..5);
    let k = r.random_range(n..7);
    let xs = sample(m, center, radius, n, &mut r);
    let ys = sample(m, center, radius, k, &mut r);
    let (a, b) = (weights(n, &mut r), weights(k, &mut r));
    nonexpansive_check(m, &xs, &ys, &a, &b, &OracleConfig::default()).unwrap().ratio
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn spd_geometry(seed in any::<u64>(), dim in 2usize..5) {
        assert_geometry(geometry_residuals(&Spd::affine_invariant(dim), &SpdPoint::identity(dim), 1.0, seed))?;
        assert_geometry(geometry_residuals(&Spd::log_euclidean(dim), &SpdPoint::identity(dim), 1.0, seed))?;
    }

    #[test]
    fn grassmann_geometry(seed in any::<u64>(), n in 3usize..7, k in 1usize..3) {
        let m = Grassmann::new(n, k).unwrap();
        assert_geometry(geometry_residuals(&m, &GrassmannPoint::coordinate(n, k), 0.6, seed))?;
    }

    #[test]
    fn sphere_and_euclidean_geometry(seed in any::<u64>(), n in 2usize..6) {
        assert_geometry(geometry_residuals(&Sphere::new(n), &north(n), 0.7, seed))?;
        assert_geometry(geometry_residuals(&Euclidean::new(n), &EuclideanPoint::new(vec![0.0; n]).unwrap(), 3.0, seed))?;
    }

    #[test]
    fn grassmann_gauge(seed in any::<u64>()) {
        let m = Grassmann::new(5, 2).unwrap();
        let mut r = rng(seed);
        let pts = sample(&m, &GrassmannPoint::coordinate(5, 2), 0.6, 2, &mut r);
        let rot = |p: &GrassmannPoint, r: &mut ChaCha8Rng| GrassmannPoint::new(p.basis() * random_orthogonal(2, r)).unwrap();
        let (p2, q2) = (rot(&pts[0], &mut r), rot(&pts[1], &mut r));
        prop_assert!((m.distance(&pts[0], &pts[1]).unwrap() - m.distance(&p2, &q2).unwrap()).abs() < 1e-8);
        let t = r.random_range(0.0..1.0);
        let a = m.geodesic(&pts[0], &pts[1], t).unwrap();
        let b = m.geodesic(&p2, &q2, t).unwrap();
        prop_assert!(a.subspace_distance(&b) < 1e-8);
    }

    #[test]
    fn euclidean_ifme_is_weighted_average(seed in any::<u64>(), n in 1usize..20, dim in 1usize..5) {
        let mut r = rng(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| r.random_range(-10.0..10.0)).collect()).collect();
        let w = weights(n, &mut r);
        let pts: Vec<_> = rows.iter().map(|v| EuclideanPoint::new(v.clone()).unwrap()).collect();
        let got = ifme_wfm(&Euclidean::new(dim), &pts, &w).unwrap();
        let total: f64 = w.as_slice().iter().sum();
        for j in 0..dim {
            let expect: f64 = rows.iter().zip(w.as_slice()).map(|(v, wi)| v[j] * wi).sum::<f64>() / total;
            prop_assert!((got.as_slice()[j] - expect).abs() < 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn power_of_two_weight_scaling_is_bit_identical(seed in any::<u64>(), e in -20i32..20) {
        let m = Spd::affine_invariant(3);
        let mut r = rng(seed);
        let xs = sample(&m, &SpdPoint::identity(3), 0.8, 6, &mut r);
        let w = weights(6, &mut r);
        let a = ifme_wfm(&m, &xs, &w).unwrap();
        let b = ifme_wfm(&m, &xs, &w.scaled(2f64.powi(e)).unwrap()).unwrap();
        prop_assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn ifme_equivariance(seed in any::<u64>(), n in 1usize..10) {
        prop_assert!(equivariance_error(&Spd::affine_invariant(3), &SpdPoint::identity(3), 0.5, n, seed) < 1e-8);
        prop_assert!(equivariance_error(&Spd::log_euclidean(3), &SpdPoint::identity(3), 0.5, n, seed) < 1e-8);
        prop_assert!(equivariance_error(&Grassmann::new(4, 2).unwrap(), &GrassmannPoint::coordinate(4, 2), 0.5, n, seed) < 1e-8);
        prop_assert!(equivariance_error(&Sphere::new(3), &north(3), 0.5, n, seed) < 1e-8);
        prop_assert!(equivariance_error(&Euclidean::new(3), &EuclideanPoint::new(vec![0.0; 3]).unwrap(), 2.0, n, seed) < 1e-8);
    }

    #[test]
    fn identical_points_are_absorbed(seed in any::<u64>(), n in 1usize..12) {
        let m = Spd::affine_invariant(3);
        let mut r = rng(seed);
        let x = sample(&m, &SpdPoint::identity(3), 1.0, 1, &mut r).remove(0);
        let w = weights(n, &mut r);
        let got = ifme_wfm(&m, &vec![x.clone(); n], &w).unwrap();
        prop_assert!(m.distance(&got, &x).unwrap() < 1e-12);
    }

    #[test]
    fn layer_equivariance_framewise(seed in any::<u64>()) {
        let m = Spd::affine_invariant(3);
        let mut r = rng(seed);
        let spec = TemporalWfmSpec::new(3, 2, 2, 3).unwrap();
        let inputs: Vec<Vec<SpdPoint>> = (0..2).map(|_| sample(&m, &SpdPoint::identity(3), 0.7, 9, &mut r)).collect();
        let theta = (0..spec.param_count()).map(|_| r.random_range(-2.0..2.0)).collect();
        let params = WfmLayerParams::new(3, spec.slots(), theta, 1.0).unwrap();
        let g = m.random_isometry(&mut r);
        let moved: Vec<Vec<SpdPoint>> = inputs.iter().map(|c| c.iter().map(|x| m.act(&g, x).unwrap()).collect()).collect();
        let a = temporal_wfm_forward(&m, &moved, &spec, &params).unwrap();
        let b = temporal_wfm_forward(&m, &inputs, &spec, &params).unwrap();
        for (ca, cb) in a.iter().zip(&b) {
            for (x, y) in ca.iter().zip(cb) {
                prop_assert!(m.distance(x, &m.act(&g, y).unwrap()).unwrap() < 1e-8);
            }
        }
    }

    #[test]
    fn head_gradient_matches_differences(seed in any::<u64>(), classes in 2usize..5, features in 1usize..8) {
        let mut r = rng(seed);
        let head = ClassifierHead::random(classes, features, 1.0, &mut r).unwrap();
        let o = DVector::from_fn(features, |_, _| r.random_range(-2.0..2.0));
        let label = r.random_range(0..classes);
        let analytic = head_gradient(&head, &o, label).unwrap().flatten();
        let loss = |flat: &[f64]| {
            let h = ClassifierHead::from_flat(classes, features, flat)?;
            cross_entropy(&fc_softmax(&h, &o)?, label)
        };
        let numeric = finite_diff_grad(loss, &head.flatten(), 1e-5).unwrap();
        for (a, n) in analytic.iter().zip(&numeric) {
            prop_assert!((a - n).abs() <= 1e-6 * (1.0 + a.abs().max(n.abs())), "{a} vs {n}");
        }
    }

    #[test]
    fn nonexpansive_on_every_manifold(seed in any::<u64>()) {
        let slack = 1.0 + 1e-8;
        prop_assert!(nonexpansive_ratio(&Spd::affine_invariant(3), &SpdPoint::identity(3), 0.5, seed) <= slack);
        prop_assert!(nonexpansive_ratio(&Grassmann::new(4, 2).unwrap(), &GrassmannPoint::coordinate(4, 2), 0.4, seed) <= slack);
        prop_assert!(nonexpansive_ratio(&Sphere::new(3), &north(3), 0.4, seed) <= slack);
        prop_assert!(nonexpansive_ratio(&Euclidean::new(3), &EuclideanPoint::new(vec![0.0; 3]).unwrap(), 2.0, seed) <= 1.0 + 1e-12);
    }

    #[test]
    fn stream_ignores_block_basis(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (n, k) = (6, 2);
        let mut a = StreamingSubspace::new(n, k).unwrap();
        let mut b = StreamingSubspace::new(n, k).unwrap();
        for _ in 0..15 {
            let block = gaussian_matrix(n, k, &mut r);
            let rotated = &block * random_orthogonal(k, &mut r);
            a.push_block(&block).unwrap();
            b.push_block(&rotated).unwrap();
            let (ea, eb) = (a.estimate().unwrap(), b.estimate().unwrap());
            prop_assert!(ea.point.subspace_distance(&eb.point) < 1e-8);
        }
    }

    #[test]
    fn stream_equivariance(seed in any::<u64>()) {
        let mut r = rng(seed);
        let data = gaussian_matrix(60, 5, &mut r);
        let q = random_orthogonal(5, &mut r);
        let est = manifoldnet::grassmann_reduce::stream_rows(&data, 2).unwrap().point;
        let moved = manifoldnet::grassmann_reduce::stream_rows(&(&data * q.transpose()), 2).unwrap().point;
        let expect = GrassmannPoint::new(&q * est.basis()).unwrap();
        prop_assert!(moved.subspace_distance(&expect) < 1e-8);
    }

    #[test]
    fn projection_is_idempotent(seed in any::<u64>(), k in 1usize..4) {
        let mut r = rng(seed);
        let f = gaussian_matrix(24, 6, &mut r);
        let theta: Vec<f64> = (0..5).map(|_| r.random_range(-2.0..2.0)).collect();
        let out = grassmann_avg_layer(&f, k, &theta).unwrap();
        prop_assert_eq!(out.projected.shape(), (24, k));
        let u = out.subspace.basis();
        let (fc, _) = center_rows(&f);
        let once = &fc * u * u.transpose();
        let twice = &once * u * u.transpose();
        prop_assert!((twice - once).amax() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn network_is_invariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let spec = SpdTcnSpec::standard(3, 14, 3);
        let model = SpdTcn::new(spec, &mut r).unwrap();
        let m = model.manifold().clone();
        let seq = sample(&m, &SpdPoint::identity(3), 1.0, 14, &mut r);
        let g = m.random_isometry(&mut r);
        let moved: Vec<_> = seq.iter().map(|x| m.act(&g, x).unwrap()).collect();
        let diff = (model.forward(&moved).unwrap() - model.forward(&seq).unwrap()).amax();
        prop_assert!(diff < 1e-6, "{diff}");
    }
}

#[test]
fn shape_law_exhaustive() {
    for frames in 1..=32 {
        for kernel in 1..=8 {
            for stride in 1..=4 {
                let spec = TemporalWfmSpec::new(kernel, stride, 1, 1).unwrap();
                let got = spec.output_len(frames);
                if frames < kernel {
                    assert!(got.is_err());
                    continue;
                }
                let expect = (frames - kernel) / stride + 1;
                assert_eq!(got.unwrap(), expect);
                let seq: Vec<EuclideanPoint> = (0..frames).map(|t| EuclideanPoint::new(vec![t as f64]).unwrap()).collect();
                let params = WfmLayerParams::uniform(1, kernel, 1.0).unwrap();
                let out = temporal_wfm_forward(&Euclidean::new(1), &[seq], &spec, &params).unwrap();
                assert_eq!(out[0].len(), expect);
            }
        }
    }
}

#[test]
fn penalty_descent_pulls_weight_sums_to_one() {
    // every slot starts near 0.9, so each channel sums to about 3.6
    let mut params = WfmLayerParams::new(2, 4, vec![2.2; 8], 1.0).unwrap();
    for _ in 0..2000 {
        let g = params.penalty_grad();
        for (t, gi) in params.theta_mut().iter_mut().zip(g) {
            *t -= 0.5 * gi;
        }
    }
    assert!(params.sum_deviation().iter().all(|&d| d < 0.1), "{:?}", params.sum_deviation());
}

#[test]
fn avg_layer_preserves_in_span_geometry() {
    let mut r = rng(11);
    let basis = random_orthogonal(8, &mut r).columns(0, 3).into_owned();
    let f: DMatrix<f64> = gaussian_matrix(40, 3, &mut r) * basis.transpose();
    let out = grassmann_avg_layer(&f, 3, &[0.0, 1.0]).unwrap();
    let (fc, _) = center_rows(&f);
    for i in 0..40 {
        for j in 0..i {
            let a = (fc.row(i) - fc.row(j)).norm();
            let b = (out.projected.row(i) - out.projected.row(j)).norm();
            assert!((a - b).abs() < 1e-8);
        }
    }
}

