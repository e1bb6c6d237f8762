use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenery_lab::geometry::*;
use scenery_lab::gibbs::{build_gibbs, Potential};
use scenery_lab::ifs::{lip_bounds, preset, sample_measure, similarity_dimension, IfsMap, SimilarityMap};
use scenery_lab::symbolic::Word;
use scenery_lab::PointCloud;

fn preset_cloud(name: &str, n: usize, depth: usize, seed: u64) -> PointCloud {
    let p = preset(name).unwrap();
    sample_measure(&p.system, &p.gibbs, n, depth, seed).unwrap()
}

fn diameter(c: &PointCloud) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            let d: f64 = c.point(i).iter().zip(c.point(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            best = best.max(d);
        }
    }
    best
}

proptest! {
    #[test]
    fn projection_is_one_lipschitz(
        pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..30),
        theta in 0.0f64..PI,
    ) {
        let cloud = PointCloud::uniform(2, pts.iter().flat_map(|&(x, y)| [x, y]).collect()).unwrap();
        let p = project(&cloud, &ProjectionSpec::angle(theta)).unwrap();
        prop_assert!(diameter(&p) <= diameter(&cloud) + 1e-12);
        prop_assert_eq!(p.weights(), cloud.weights());
    }

    #[test]
    fn rotation_shifts_projection_angle(
        pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..20),
        theta in 0.0f64..PI,
        rho in -3.0f64..3.0,
    ) {
        let cloud = PointCloud::uniform(2, pts.iter().flat_map(|&(x, y)| [x, y]).collect()).unwrap();
        let rotated = cloud.map(2, |p| vec![rho.cos() * p[0] - rho.sin() * p[1], rho.sin() * p[0] + rho.cos() * p[1]]);
        let a = project(&rotated, &ProjectionSpec::angle(theta)).unwrap();
        let b = project(&cloud, &ProjectionSpec::angle(theta - rho)).unwrap();
        // reducing θ−ρ modulo π may flip the line orientation
        for (x, y) in a.coords().iter().zip(b.coords()) {
            prop_assert!((x.abs() - y.abs()).abs() < 1e-12);
        }
    }
}

#[test]
fn fourcorner_projection_lies_on_quarter_cantor_set() {
    let cloud = preset_cloud("fourcorner4", 5000, 12, 3);
    let p = project(&cloud, &ProjectionSpec::angle(0.0)).unwrap();
    for &x in p.coords() {
        // the set {x/4, x/4 + 3/4}([0,1]) to eight levels
        let mut y = x;
        for level in 0..8 {
            let tol = 1e-12 * 4f64.powi(level);
            assert!(y <= 0.25 + tol || y >= 0.75 - tol, "{x} leaves the set at level {level}");
            y = if y <= 0.25 + tol { 4.0 * y } else { 4.0 * y - 3.0 };
        }
    }
}

#[test]
fn box_dimension_of_self_similar_sets() {
    let cantor = box_dimension_auto(&preset_cloud("cantor3", 100_000, 30, 1), None).unwrap();
    assert!((cantor.value - 2f64.ln() / 3f64.ln()).abs() < 0.05, "{}", cantor.value);
    assert_eq!(cantor.method, Method::BoxCount);
    assert!(cantor.scales.len() >= 5);
    let rot5 = box_dimension_auto(&preset_cloud("rot5", 100_000, 20, 1), None).unwrap();
    assert!((rot5.value - 5f64.ln() / 3f64.ln()).abs() < 0.07, "{}", rot5.value);
}

#[test]
fn box_dimension_subset_monotone() {
    let cloud = preset_cloud("rot5", 40_000, 20, 5);
    let half = PointCloud::uniform(2, cloud.coords()[..cloud.coords().len() / 2].to_vec()).unwrap();
    let full = box_dimension(&cloud, 0.01, 0.3, 8).unwrap();
    let sub = box_dimension(&half, 0.01, 0.3, 8).unwrap();
    assert!(sub.value <= full.value + 2.0 * full.slope_stderr.max(sub.slope_stderr));
}

#[test]
fn box_dimension_input_checks() {
    let cloud = preset_cloud("cantor3", 2000, 20, 1);
    assert!(box_dimension(&cloud, 0.1, 0.01, 8).is_err());
    assert!(box_dimension(&cloud, 0.01, 0.1, 3).is_err());
}

#[test]
fn exact_measure_dimension_oracles() {
    let p = preset("cantor3").unwrap();
    let s = p.system.symbolic().clone();
    let half = exact_measure_dimension(&p.system, &p.gibbs).unwrap();
    assert!((half.value - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
    assert_eq!(half.method, Method::ExactFormula);
    for q in [0.1, 0.3, 0.45] {
        let g = build_gibbs(&s, &Potential::bernoulli(&s, &[q, 1.0 - q]).unwrap()).unwrap();
        let h = -(q * q.ln() + (1.0 - q) * (1.0 - q).ln());
        let v = exact_measure_dimension(&p.system, &g).unwrap().value;
        assert!((v - h / 3f64.ln()).abs() < 1e-12);
        assert!(v < half.value);
    }
    let gm = preset("goldenmean2").unwrap();
    let parry = exact_measure_dimension(&gm.system, &gm.gibbs).unwrap().value;
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((parry - phi.ln() / 2f64.ln()).abs() < 1e-9);
    assert!((parry - similarity_dimension(&gm.system).unwrap()).abs() < 1e-9);
    let schottky = preset("schottky3").unwrap();
    assert!(exact_measure_dimension(&schottky.system, &schottky.gibbs).is_err());
}

#[test]
fn exact_dimension_never_exceeds_similarity_dimension() {
    let gm = preset("goldenmean2").unwrap();
    let s = gm.system.symbolic().clone();
    let moran = similarity_dimension(&gm.system).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let vals: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let g = build_gibbs(&s, &Potential::depth2(&s, |a, b| vals[a] * (1.0 + b as f64)).unwrap()).unwrap();
        assert!(exact_measure_dimension(&gm.system, &g).unwrap().value <= moran + 1e-12);
    }
}

#[test]
fn local_dimension_references() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let lebesgue = PointCloud::uniform(1, (0..100_000).map(|_| rng.gen::<f64>()).collect()).unwrap();
    let l = local_dimension(&lebesgue, 200, None, 3).unwrap();
    assert!((l.value - 1.0).abs() < 0.05, "{}", l.value);
    assert_eq!(l.method, Method::LocalDim);
    let cantor = local_dimension(&preset_cloud("cantor3", 100_000, 30, 4), 200, None, 3).unwrap();
    assert!((cantor.value - 2f64.ln() / 3f64.ln()).abs() < 0.05, "{}", cantor.value);
    let point = PointCloud::uniform(2, vec![0.25; 200]).unwrap();
    assert_eq!(local_dimension(&point, 10, None, 0).unwrap().value, 0.0);
    assert!(local_dimension(&lebesgue, 10, Some(&[0.1, 0.2]), 0).is_err());
}

#[test]
fn distance_set_of_rot5_is_large() {
    let cloud = preset_cloud("rot5", 2000, 20, 6);
    let d = distance_set(&cloud, DEFAULT_PAIR_CAP, 0).unwrap();
    assert_eq!(d.len(), 2000 * 1999 / 2);
    let est = box_dimension_auto(&values_cloud(d).unwrap(), None).unwrap();
    assert!(est.value >= 0.9, "{}", est.value);
}

#[test]
fn distances_scale_exactly_under_dyadic_similarity() {
    let cloud = preset_cloud("rot5", 500, 20, 7);
    // ratio 1/8, quarter turn, no translation: every operation is exact
    let exact = SimilarityMap::new(0.125, vec![0.0, -1.0, 1.0, 0.0], vec![0.0, 0.0]).unwrap();
    let image = cloud.map(2, |p| exact.apply(p));
    let d0 = distance_set(&cloud, DEFAULT_PAIR_CAP, 0).unwrap();
    let d1 = distance_set(&image, DEFAULT_PAIR_CAP, 0).unwrap();
    for (a, b) in d0.iter().zip(&d1) {
        assert_eq!((b / 0.125).to_bits(), a.to_bits());
    }
    // a general similarity scales distances up to rounding
    let general = SimilarityMap::planar(0.37, 1.234, true, [0.2, -0.1]).unwrap();
    let d2 = distance_set(&cloud.map(2, |p| general.apply(p)), DEFAULT_PAIR_CAP, 0).unwrap();
    for (a, b) in d0.iter().zip(&d2) {
        assert!((b - 0.37 * a).abs() <= 1e-12 * a.max(1e-3));
    }
}

#[test]
fn conformal_images_respect_lipschitz_bounds() {
    let p = preset("schottky3").unwrap();
    let IfsMap::Conformal(map) = &p.system.maps()[0] else { panic!("conformal preset") };
    let lip = lip_bounds(&p.system, &Word::single(0)).unwrap();
    // points of the attractor, so both ends of every pair lie in the domain
    let cloud = sample_measure(&p.system, &p.gibbs, 300, 12, 1).unwrap();
    let image = cloud.map(2, |x| {
        let w = map.eval(Complex64::new(x[0], x[1]));
        vec![w.re, w.im]
    });
    let d0 = distance_set(&cloud, 2000, 11).unwrap();
    let d1 = distance_set(&image, 2000, 11).unwrap();
    for (a, b) in d0.iter().zip(&d1) {
        assert!(*b <= lip.lip_plus * a * (1.0 + 1e-9));
        assert!(*b >= lip.lip_minus * a * (1.0 - 1e-9));
    }
}

#[test]
fn direction_sets() {
    let cloud = preset_cloud("fourcorner4", 4096, 6, 1);
    let dirs = direction_set(&cloud, DEFAULT_PAIR_CAP, 0).unwrap();
    assert!(dirs.iter().all(|&a| (0.0..PI).contains(&a)));
    assert!(largest_angular_gap(&dirs, PI) <= 2.0 * 0.05);
    let circle = PointCloud::uniform(
        2,
        (0..200).flat_map(|i| {
            let t = 2.0 * PI * i as f64 / 200.0;
            [t.cos(), t.sin()]
        })
        .collect(),
    )
    .unwrap();
    let all = direction_set(&circle, DEFAULT_PAIR_CAP, 0).unwrap();
    assert!(largest_angular_gap(&all, PI) < 0.05);
    let unfolded = direction_set_circle(&circle, DEFAULT_PAIR_CAP, 0).unwrap();
    assert!(unfolded.iter().all(|&a| (0.0..2.0 * PI).contains(&a)));
    assert!(unfolded.iter().any(|&a| a > PI));
}

#[test]
fn full_circle_restriction_is_no_restriction() {
    let cloud = preset_cloud("rot5", 300, 12, 2);
    let all = distance_set(&cloud, DEFAULT_PAIR_CAP, 0).unwrap();
    let restricted = restricted_distance_set(&cloud, &[Arc::full()], DEFAULT_PAIR_CAP, 0).unwrap();
    assert_eq!(restricted.distances, all);
    assert!(restricted.warning.is_none());
}

#[test]
fn minimality_examples() {
    let rot5 = preset("rot5").unwrap();
    let r = minimality_density(&rot5.system, 12, 0.1).unwrap();
    assert!(r.pass, "gap {}", r.largest_gap);
    let four = preset("fourcorner4").unwrap();
    let f = minimality_density(&four.system, 12, 0.1).unwrap();
    assert_eq!(f.angles.len(), 1);
    assert!(!f.pass);
    let ce = preset("counterexample3").unwrap();
    assert!(ce.system.symbolic().is_mixing());
    let c = minimality_density(&ce.system, 12, 0.1).unwrap();
    assert!(!c.pass);
    // every composed rotation is in {−1, 0, 1} rad
    assert_eq!(c.angles.len(), 3);
    let schottky = preset("schottky3").unwrap();
    assert!(minimality_density(&schottky.system, 4, 0.1).is_err());
}

#[test]
fn projection_sweeps() {
    let four = preset("fourcorner4").unwrap();
    let sweep = projection_sweep(&four.system, &four.gibbs, 4, 20, 100_000, 3).unwrap();
    let at_zero = &sweep.rows[0];
    assert_eq!(at_zero.theta, 0.0);
    assert!((at_zero.estimate.value - 0.5).abs() < 0.1, "{}", at_zero.estimate.value);
    assert!((sweep.predicted.unwrap() - 1.0).abs() < 1e-9);
    let cap = sweep.full.value.min(1.0) + 0.1;
    assert!(sweep.rows.iter().all(|r| r.estimate.value <= cap));
    let csv = sweep.to_csv();
    assert!(csv.starts_with("theta,value,stderr\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn estimate_csv_layout() {
    let est = box_dimension_auto(&preset_cloud("cantor3", 5000, 20, 1), None).unwrap();
    let csv = est.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,value,stderr,n_scales");
    assert!(lines[1].starts_with("box_count,"));
    assert_eq!(lines[2], "log_inv_r,log_count");
    assert_eq!(lines.len(), 3 + est.scales.len());
}
