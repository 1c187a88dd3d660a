#![allow(dead_code)]

use std::f64::consts::TAU;

use jmlab_core::jm_metric::ParamKind;
use jmlab_core::variational::TimedPath;
use jmlab_core::SampledPath;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random planar polyline through `controls` points in the annulus `r_min..r_max`,
/// refined to `samples_per_leg` samples per leg.
pub fn annulus_path(
    rng: &mut ChaCha8Rng,
    controls: usize,
    r_min: f64,
    r_max: f64,
    samples_per_leg: usize,
) -> SampledPath {
    // keep consecutive controls within a quarter turn so legs stay away from the origin
    let mut theta = rng.random_range(0.0..TAU);
    let pts: Vec<Vec<f64>> = (0..controls)
        .map(|_| {
            let r = rng.random_range(r_min..r_max);
            let p = vec![r * theta.cos(), r * theta.sin()];
            theta += rng.random_range(-0.8..0.8);
            p
        })
        .collect();
    SampledPath::uniform(pts, ParamKind::Abstract)
        .unwrap()
        .refine(samples_per_leg)
}

/// Give a path random strictly increasing sample times.
pub fn random_timing(rng: &mut ChaCha8Rng, path: &SampledPath) -> TimedPath {
    let mut t = 0.0;
    let times: Vec<f64> = (0..path.len())
        .map(|i| {
            if i > 0 {
                t += rng.random_range(0.2..2.0) / path.len() as f64;
            }
            t
        })
        .collect();
    TimedPath::from_samples(times, path.points().iter().map(|q| q.to_vec()).collect()).unwrap()
}
