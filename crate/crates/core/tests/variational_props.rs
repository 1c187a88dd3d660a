mod common;

use std::borrow::Cow;

use jmlab_core::variational::{
    action_length_bridge, blowup_rescale, brake_retrace_check, discrete_action,
    integrate_newton, minimize_fixed_time, newton_residual, time_rescale_action,
    time_rescale_path, zero_energy_reparameterize, MinimizeOptions,
};
use jmlab_core::{
    Error, HomogeneousPotential, JmMetric, MassSystem, ParamKind, Potential, PotentialValue,
    SampledPath, TimedPath,
};
use proptest::prelude::*;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `U = u0` everywhere.
struct Flat {
    u0: f64,
    dim: usize,
}

impl Potential for Flat {
    fn alpha(&self) -> f64 {
        1.0
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _q: &[f64]) -> PotentialValue {
        PotentialValue::Finite(self.u0)
    }
    fn gradient(&self, _q: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0; self.dim])
    }
    fn pole_distance(&self, _q: &[f64]) -> f64 {
        f64::INFINITY
    }
}

/// `U = 1/|q|^2` in one dimension.
struct InverseSquare;

impl Potential for InverseSquare {
    fn alpha(&self) -> f64 {
        2.0
    }
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, q: &[f64]) -> PotentialValue {
        if q[0] == 0.0 {
            PotentialValue::Pole
        } else {
            PotentialValue::Finite(q[0].powi(-2))
        }
    }
    fn gradient(&self, q: &[f64]) -> Option<Vec<f64>> {
        (q[0] != 0.0).then(|| vec![-2.0 * q[0].powi(-3)])
    }
    fn coordinate_masses(&self) -> Cow<'_, [f64]> {
        Cow::Owned(vec![1.0])
    }
    fn pole_distance(&self, q: &[f64]) -> f64 {
        q[0].abs()
    }
}

fn kepler_orbit(v: f64, duration: f64, steps: usize) -> TimedPath {
    let pot = HomogeneousPotential::kepler(2).unwrap();
    integrate_newton(&pot, &[1.0, 0.0], &[0.0, v], duration, steps).unwrap()
}

#[test]
fn minimizer_recovers_a_kepler_arc() {
    let pot = HomogeneousPotential::kepler(2).unwrap();
    let arc = kepler_orbit(1.1, 1.0, 200);
    let q1 = arc.points().last().unwrap().to_vec();
    let opts = MinimizeOptions { n_samples: 201, ..Default::default() };
    let sol = minimize_fixed_time(&[1.0, 0.0], &q1, 1.0, &pot, &opts).unwrap();
    assert!(sol.converged);
    let worst = sol
        .path
        .points()
        .iter()
        .zip(arc.points())
        .map(|(a, b)| dist(a, b))
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "max deviation {worst}");
    let std = sol.report.energy_std();
    assert!(std < 1e-3, "energy std {std}");
    assert!(!sol.touches_collision());
}

#[test]
fn minimizer_energy_spread_shrinks_with_refinement() {
    let pot = HomogeneousPotential::kepler(2).unwrap();
    let arc = kepler_orbit(1.1, 1.0, 100);
    let q1 = arc.points().last().unwrap().to_vec();
    let stds: Vec<f64> = [51, 101, 201]
        .iter()
        .map(|&n| {
            let opts = MinimizeOptions { n_samples: n, starts: 1, ..Default::default() };
            minimize_fixed_time(&[1.0, 0.0], &q1, 1.0, &pot, &opts)
                .unwrap()
                .report
                .energy_std()
        })
        .collect();
    assert!(stds[1] < stds[0] && stds[2] < stds[1], "{stds:?}");
}

#[test]
fn flat_potential_loop_collapses() {
    let pot = Flat { u0: 0.7, dim: 3 };
    let q = [0.3, -1.0, 2.0];
    let opts = MinimizeOptions { n_samples: 41, ..Default::default() };
    let sol = minimize_fixed_time(&q, &q, 2.0, &pot, &opts).unwrap();
    for p in sol.path.points() {
        assert!(dist(p, &q) < 1e-8);
    }
    assert!((sol.report.action - 1.4).abs() < 1e-12);
    assert!(sol.report.kinetic_integral < 1e-15);
}

#[test]
fn deeper_band_pulls_minimizer_toward_collision() {
    let approach: Vec<f64> = [1.5, 3.0, 6.0]
        .iter()
        .map(|&m_big| {
            let pot = HomogeneousPotential::analytic_shape(3, 1.0, "smooth band", move |s| {
                1.0 + (m_big - 1.0) * (-(s[2] / 0.3).powi(2)).exp()
            })
            .unwrap();
            let opts = MinimizeOptions { n_samples: 101, starts: 1, ..Default::default() };
            let sol =
                minimize_fixed_time(&[0.4, 0.0, 1.0], &[0.4, 0.0, -1.0], 2.0, &pot, &opts).unwrap();
            sol.closest_approach(&pot)
        })
        .collect();
    assert!(approach[1] < approach[0] && approach[2] < approach[1], "{approach:?}");
}

#[test]
fn zero_energy_arc_is_free_time_optimal() {
    let pot = HomogeneousPotential::kepler(2).unwrap();
    let t = 0.5;
    let arc = kepler_orbit(2f64.sqrt(), t, 400);
    let q1 = arc.points().last().unwrap().to_vec();
    let action_at = |tt: f64| {
        let opts = MinimizeOptions { n_samples: 401, starts: 1, ..Default::default() };
        minimize_fixed_time(&[1.0, 0.0], &q1, tt, &pot, &opts).unwrap()
    };
    let best = action_at(t);
    let length = JmMetric::new(0.0, &pot).jm_length(best.path.path()).unwrap();
    assert!((best.report.action - length).abs() <= 1e-4 * length, "{} vs {length}", best.report.action);
    assert!(best.report.action < action_at(0.9 * t).report.action);
    assert!(best.report.action < action_at(1.1 * t).report.action);
}

#[test]
fn unit_speed_separation_has_closed_form_action() {
    let pot =
        HomogeneousPotential::power_law(MassSystem::new(1, vec![1.0, 1.0], 1.0).unwrap(), 1.0)
            .unwrap();
    for (r0, t) in [(0.5, 1.0), (1.0, 3.0), (0.1, 0.2)] {
        let n = 50;
        let times: Vec<f64> = (0..=n).map(|i| t * i as f64 / n as f64).collect();
        let pts = times.iter().map(|s| vec![0.0, r0 + s]).collect();
        let path = TimedPath::from_samples(times, pts).unwrap();
        let a = discrete_action(&path, &pot).unwrap();
        let exact = t / 2.0 + ((r0 + t) / r0).ln();
        assert!((a.action - exact).abs() < 1e-9 * exact, "{} vs {exact}", a.action);
        assert!((a.kinetic_integral - t / 2.0).abs() < 1e-12);
    }
}

#[test]
fn collision_with_alpha_two_has_infinite_action() {
    let path = TimedPath::from_samples(vec![0.0, 0.5, 1.0], vec![vec![1.0], vec![0.5], vec![0.0]])
        .unwrap();
    assert!(matches!(discrete_action(&path, &InverseSquare), Err(Error::InfiniteAction(_))));
    let kepler = HomogeneousPotential::kepler(1).unwrap();
    assert!(discrete_action(&path, &kepler).unwrap().action.is_finite());
}

#[test]
fn reparameterization_requires_arclength() {
    let pot = HomogeneousPotential::kepler(2).unwrap();
    let p = SampledPath::uniform(vec![vec![1.0, 0.0], vec![1.0, 1.0]], ParamKind::Abstract).unwrap();
    assert!(zero_energy_reparameterize(&p, &pot).is_err());
    let mislabelled = SampledPath::new(
        p.points().to_vec(),
        vec![0.0, 5.0],
        ParamKind::Arclength,
    )
    .unwrap();
    assert!(zero_energy_reparameterize(&mislabelled, &pot).is_err());
}

#[test]
fn double_speed_opens_slack() {
    let pot = HomogeneousPotential::kepler(2).unwrap();
    let mut rng = common::rng(3);
    let path = common::annulus_path(&mut rng, 4, 0.5, 2.0, 200);
    let geo = JmMetric::new(0.0, &pot).arclength_parameterize(&path).unwrap();
    let zero = zero_energy_reparameterize(&geo, &pot).unwrap();
    let fast = time_rescale_path(&zero, 2.0).unwrap();
    let slack = action_length_bridge(&fast, &pot).unwrap().slack;
    assert!(slack > 0.1 * action_length_bridge(&fast, &pot).unwrap().length);
}

#[test]
fn rescaled_orbit_still_solves_newton() {
    let pot = HomogeneousPotential::kepler(2).unwrap();
    let orbit = kepler_orbit(1.2, 2.0, 400);
    let base = newton_residual(&orbit, &pot).unwrap();
    for lambda in [0.25, 0.5, 2.0, 4.0] {
        let scaled = blowup_rescale(&orbit, lambda, 1.0).unwrap();
        // accelerations scale by lambda^(1 - 2 nu)
        let unit = lambda.powf(1.0 - 2.0 * 1.5);
        let r = newton_residual(&scaled, &pot).unwrap() / unit;
        assert!(r <= 10.0 * base, "lambda {lambda}: {r} vs {base}");
    }
}

#[test]
fn brake_error_tracks_step_size() {
    let pot = HomogeneousPotential::kepler(1).unwrap();
    let devs: Vec<f64> = [20, 40, 80]
        .iter()
        .map(|&n| brake_retrace_check(&pot, -1.0, &[1.0], &[0.0], 0.4, n).unwrap().max_deviation)
        .collect();
    for w in devs.windows(2) {
        // fourth order or better
        assert!(w[0] / w[1] > 12.0, "{devs:?}");
    }
    assert!(brake_retrace_check(&pot, -1.0, &[1.0], &[0.1], 0.4, 10).is_err());
    assert!(brake_retrace_check(&pot, -0.5, &[1.0], &[0.0], 0.4, 10).is_err());
}

#[test]
fn time_rescale_slope_matches_first_order() {
    let pot = HomogeneousPotential::kepler(2).unwrap();
    let mut rng = common::rng(8);
    let path = common::annulus_path(&mut rng, 3, 0.5, 2.0, 50);
    let rep = discrete_action(&common::random_timing(&mut rng, &path), &pot).unwrap();
    let c = 0.5;
    let expected = rep.kinetic_integral - rep.potential_integral;
    let mut prev = f64::INFINITY;
    for big_t in [10.0, 100.0, 1000.0, 10000.0] {
        let eps = c / (2.0 * big_t);
        let diff = time_rescale_action(&rep, 1.0 + eps).unwrap().action - rep.action;
        let err = (diff / eps - expected).abs();
        assert!(err < prev);
        prev = err;
    }
    assert!(prev < 1e-3 * rep.action);
}

proptest! {
    #[test]
    fn blowup_is_a_group_action(
        l1 in 0.1f64..10.0,
        l2 in 0.1f64..10.0,
        alpha in 0.1f64..1.9,
    ) {
        let orbit = kepler_orbit(1.1, 1.0, 20);
        let two = blowup_rescale(&blowup_rescale(&orbit, l1, alpha).unwrap(), l2, alpha).unwrap();
        let one = blowup_rescale(&orbit, l1 * l2, alpha).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * a.abs().max(b.abs()) + 1e-300;
        for (a, b) in two.times().iter().zip(one.times()) {
            prop_assert!(close(*a, *b), "{a} vs {b}");
        }
        for (a, b) in two.points().iter().zip(one.points()) {
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!(close(*x, *y), "{x} vs {y}");
            }
        }
        for (a, b) in two.velocities().iter().zip(one.velocities()) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!(close(*x, *y), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn bridge_slack_ignores_orientation(seed in 0u64..500) {
        let pot = HomogeneousPotential::kepler(2).unwrap();
        let mut rng = common::rng(seed);
        let path = common::annulus_path(&mut rng, 4, 0.5, 2.0, 10);
        let timed = common::random_timing(&mut rng, &path);
        let a = action_length_bridge(&timed, &pot).unwrap();
        let b = action_length_bridge(&timed.reversed(), &pot).unwrap();
        prop_assert!((a.slack - b.slack).abs() <= 1e-12 * a.action);
        prop_assert!(a.slack >= -1e-9);
    }
}
