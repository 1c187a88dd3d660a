use jmlab_core::potentials::{homogeneity_check, power_law_eval};
use jmlab_core::{HomogeneousPotential, MassSystem, Potential, PotentialValue, StepShapeParams};
use proptest::prelude::*;

fn finite(v: PotentialValue) -> f64 {
    v.finite().expect("finite potential")
}

proptest! {
    #[test]
    fn equal_masses_are_interchangeable(
        q in proptest::collection::vec(-3.0f64..3.0, 6),
        alpha in 0.1f64..1.9,
    ) {
        let sys = MassSystem::new(2, vec![1.5, 1.5, 0.7], 1.3).unwrap();
        let swapped = [q[2], q[3], q[0], q[1], q[4], q[5]];
        let a = power_law_eval(&q, &sys, alpha).unwrap();
        let b = power_law_eval(&swapped, &sys, alpha).unwrap();
        prop_assume!(!a.is_pole());
        prop_assert!((finite(a) - finite(b)).abs() <= 1e-13 * finite(a));
    }

    #[test]
    fn power_law_scales_homogeneously(
        q in proptest::collection::vec(-3.0f64..3.0, 9),
        lambda in 0.01f64..100.0,
        alpha in 0.1f64..1.9,
    ) {
        let sys = MassSystem::new(3, vec![1.0, 2.0, 3.0], 1.0).unwrap();
        let u = power_law_eval(&q, &sys, alpha).unwrap();
        prop_assume!(!u.is_pole());
        let scaled: Vec<f64> = q.iter().map(|x| lambda * x).collect();
        let ul = finite(power_law_eval(&scaled, &sys, alpha).unwrap());
        let expected = lambda.powf(-alpha) * finite(u);
        prop_assert!((ul - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn step_shape_depends_only_on_height(
        s in proptest::collection::vec(-1.0f64..1.0, 3),
        angle in 0.0f64..std::f64::consts::TAU,
    ) {
        let n = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
        prop_assume!(n > 1e-3);
        let s: Vec<f64> = s.iter().map(|x| x / n).collect();
        let (c, sn) = (angle.cos(), angle.sin());
        let rotated = [c * s[0] - sn * s[1], sn * s[0] + c * s[1], s[2]];
        let pot = HomogeneousPotential::step(3, StepShapeParams::new(1.0, 4.0, 0.5).unwrap(), 1.0)
            .unwrap();
        // rotation about z can move |z| across delta only by rounding
        prop_assume!((s[2].abs() - 0.5).abs() > 1e-12);
        prop_assert_eq!(pot.shape_eval(&s).unwrap(), pot.shape_eval(&rotated).unwrap());
    }

    #[test]
    fn potential_grows_toward_a_binary_collision(
        start in proptest::collection::vec(-2.0f64..2.0, 4),
        alpha in 0.1f64..1.9,
    ) {
        // bodies 0 and 1 in the plane; drive body 1 straight onto body 0
        let sys = MassSystem::unit(2, 2).unwrap();
        let target = [start[0], start[1]];
        prop_assume!(((start[2] - start[0]).powi(2) + (start[3] - start[1]).powi(2)).sqrt() > 1e-3);
        let mut prev = 0.0;
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            let b = [
                target[0] + (1.0 - t) * (start[2] - target[0]),
                target[1] + (1.0 - t) * (start[3] - target[1]),
            ];
            let u = power_law_eval(&[target[0], target[1], b[0], b[1]], &sys, alpha).unwrap();
            if k == 100 {
                prop_assert!(u.is_pole());
            } else {
                let u = finite(u);
                prop_assert!(u > prev);
                prev = u;
            }
        }
    }
}

#[test]
fn homogeneity_examples() {
    let two_body = HomogeneousPotential::power_law(MassSystem::unit(2, 2).unwrap(), 1.0).unwrap();
    assert!(homogeneity_check(&two_body, 100, 1) < 1e-12);
    let step =
        HomogeneousPotential::step(3, StepShapeParams::new(1.0, 4.0, 0.5).unwrap(), 1.0).unwrap();
    assert!(homogeneity_check(&step, 100, 2) < 1e-12);
    assert_eq!(homogeneity_check(&step, 100, 2), homogeneity_check(&step, 100, 2));
}

#[test]
fn potentials_are_positive_away_from_collisions() {
    let pots = [
        HomogeneousPotential::power_law(MassSystem::new(1, vec![1.0, 2.0, 5.0], 0.3).unwrap(), 0.7)
            .unwrap(),
        HomogeneousPotential::step(3, StepShapeParams::new(0.2, 3.0, 0.3).unwrap(), 1.5).unwrap(),
    ];
    let mut rng = 12345u64;
    for pot in &pots {
        for _ in 0..1000 {
            let q: Vec<f64> = (0..pot.dim())
                .map(|_| {
                    rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (rng >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
                })
                .collect();
            if let PotentialValue::Finite(u) = pot.value(&q) {
                assert!(u > 0.0);
            }
        }
    }
}
