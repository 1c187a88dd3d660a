mod common;

use std::f64::consts::{PI, SQRT_2};

use jmlab_core::io::{parse_path_csv, path_csv};
use jmlab_core::jm_metric::{
    conformal_gauss_curvature_fd, from_cone_coordinates, kepler_gauss_curvature,
    normal_form_length, to_cone_coordinates,
};
use jmlab_core::{FactorTwo, HomogeneousPotential, JmMetric, MassSystem, ParamKind, SampledPath};
use proptest::prelude::*;

fn arc(n: usize) -> SampledPath {
    // a smooth curve well inside the Kepler Hill region
    let pts = (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            let r = 1.0 + 0.3 * (3.0 * t).sin();
            let th = 2.0 * t;
            vec![r * th.cos(), r * th.sin()]
        })
        .collect();
    SampledPath::uniform(pts, ParamKind::Abstract).unwrap()
}

#[test]
fn polyline_lengths_converge_at_second_order() {
    let pot = HomogeneousPotential::kepler(2).unwrap();
    let m = JmMetric::new(-0.2, &pot);
    let reference = m.jm_length(&arc(40_001)).unwrap();
    let errs: Vec<f64> = [50, 100, 200, 400]
        .iter()
        .map(|&n| (m.jm_length(&arc(n + 1)).unwrap() - reference).abs())
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.8, "observed order {order} from {errs:?}");
    }
}

#[test]
fn cartesian_and_normal_form_lengths_agree() {
    let kepler = HomogeneousPotential::kepler(2).unwrap();
    let binary = HomogeneousPotential::power_law(MassSystem::unit(2, 2).unwrap(), 1.0).unwrap();
    let mut rng = common::rng(21);
    for _ in 0..10 {
        let path = common::annulus_path(&mut rng, 4, 0.5, 2.0, 3334);
        let m = JmMetric::new(0.0, &kepler);
        let a = m.jm_length(&path).unwrap();
        let b = normal_form_length(&m, &path).unwrap();
        assert!((a - b).abs() <= 1e-6 * a, "{a} vs {b}");
        // the same planar curve as the relative coordinate of a binary, centre of mass fixed
        let lifted = SampledPath::uniform(
            path.points()
                .iter()
                .map(|q| vec![-q[0] / 2.0, -q[1] / 2.0, q[0] / 2.0, q[1] / 2.0])
                .collect(),
            ParamKind::Abstract,
        )
        .unwrap();
        let mb = JmMetric::new(0.0, &binary);
        let a = mb.jm_length(&lifted).unwrap();
        let b = normal_form_length(&mb, &lifted).unwrap();
        assert!((a - b).abs() <= 1e-6 * a, "{a} vs {b}");
    }
}

#[test]
fn factor_two_scales_lengths_by_sqrt_two() {
    let pot = HomogeneousPotential::kepler(2).unwrap();
    let p = arc(101);
    let with = JmMetric::new(0.0, &pot).jm_length(&p).unwrap();
    let without = JmMetric::new(0.0, &pot)
        .with_factor(FactorTwo::Dropped)
        .jm_length(&p)
        .unwrap();
    assert!((with - SQRT_2 * without).abs() < 1e-13 * with);
}

#[test]
fn curvature_estimator_matches_closed_form() {
    let pot = HomogeneousPotential::kepler(2).unwrap();
    for h0 in [-0.5, -0.2, 0.3, 1.0] {
        let m = JmMetric::new(h0, &pot);
        for (r, th) in [(0.5, 0.1), (1.0, 1.0), (1.5, 2.5)] {
            if h0 + 1.0 / r <= 0.1 {
                continue;
            }
            let est = conformal_gauss_curvature_fd(&m, [r * f64::cos(th), r * f64::sin(th)], 1e-3)
                .unwrap();
            let exact = kepler_gauss_curvature(r, h0).unwrap();
            assert!((est - exact).abs() <= 1e-3 * exact.abs(), "h0 {h0} r {r}: {est} vs {exact}");
        }
    }
}

#[test]
fn path_csv_round_trip_is_exact() {
    let p = arc(57);
    let back = parse_path_csv(&path_csv(&p).unwrap(), ParamKind::Abstract).unwrap();
    assert_eq!(back, p);
}

#[test]
fn kepler_cone_is_not_flat_off_zero_energy() {
    assert!(kepler_gauss_curvature(1.0, -0.5).unwrap() > 0.0);
    assert!(kepler_gauss_curvature(1.0, 0.5).unwrap() < 0.0);
    let _ = PI;
}

proptest! {
    #[test]
    fn cone_coordinates_round_trip(r in 0.0f64..10.0, k in 0usize..3) {
        let alpha = [0.5, 1.0, 1.5][k];
        let rho = to_cone_coordinates(r, alpha).unwrap();
        let back = from_cone_coordinates(rho, alpha).unwrap();
        prop_assert!((back - r).abs() <= 1e-12 * r.max(1.0));
    }

    #[test]
    fn reversal_preserves_length(seed in 0u64..1000) {
        let pot = HomogeneousPotential::kepler(2).unwrap();
        let mut rng = common::rng(seed);
        let p = common::annulus_path(&mut rng, 4, 0.3, 3.0, 5);
        let m = JmMetric::new(0.0, &pot);
        let a = m.jm_length(&p).unwrap();
        let b = m.jm_length(&p.reversed()).unwrap();
        prop_assert!((a - b).abs() <= 1e-13 * a);
    }
}
