//! Time-parameterized paths, the discrete action `int (K + U) dt`, and the checks that
//! connect action minimization with JM geodesics.
//!
//! Action quadrature matches [`JmMetric::jm_length`](crate::JmMetric::jm_length) node for
//! node: a regular segment is traversed at constant velocity, and a segment ending at a
//! pole is traversed homothetically, `q = b + tau^beta (a - b)` with `beta = 2/(2 + alpha)`,
//! which is how Newtonian motion approaches a homogeneous collision. Under the time
//! substitution `tau = u^gamma`, `gamma = (2 + alpha)/(2 - alpha)`, both the kinetic and the
//! potential integrands are smooth and share the quadrature nodes of the length integral,
//! so `length <= action` holds sample by sample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jm_metric::{JmMetric, ParamKind, SampledPath, LENGTH_RTOL};
use crate::potentials::{weighted_dot, weighted_norm, Configuration, Potential, PotentialValue};
use crate::quadrature::{nodes, split_at_poles, PoleEnd};

/// Samples closer than this to a pole are flagged as collision touches.
pub const COLLISION_TOUCH_RADIUS: f64 = 1e-6;

/// A path sampled in time, with a velocity at every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedPath {
    path: SampledPath,
    velocities: Vec<Vec<f64>>,
}

impl TimedPath {
    /// Velocities from second-order finite differences (one-sided at the endpoints).
    pub fn new(path: SampledPath) -> Result<Self> {
        if path.kind() != ParamKind::Time {
            return Err(Error::InvalidPath("a timed path needs time parameters".into()));
        }
        let velocities = first_derivatives(path.params(), path.points());
        Ok(Self { path, velocities })
    }

    pub fn from_samples(times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        let pts = points.into_iter().map(Configuration::from).collect();
        Self::new(SampledPath::new(pts, times, ParamKind::Time)?)
    }

    /// A timed path with given velocities; non-finite entries are allowed only at poles.
    pub fn with_velocities(path: SampledPath, velocities: Vec<Vec<f64>>) -> Result<Self> {
        if path.kind() != ParamKind::Time {
            return Err(Error::InvalidPath("a timed path needs time parameters".into()));
        }
        if velocities.len() != path.len() {
            return Err(Error::InvalidPath(format!(
                "{} velocities for {} samples",
                velocities.len(),
                path.len()
            )));
        }
        if let Some(v) = velocities.iter().find(|v| v.len() != path.dim()) {
            return Err(Error::DimensionMismatch {
                expected: path.dim(),
                got: v.len(),
            });
        }
        Ok(Self { path, velocities })
    }

    pub fn path(&self) -> &SampledPath {
        &self.path
    }

    pub fn times(&self) -> &[f64] {
        self.path.params()
    }

    pub fn points(&self) -> &[Configuration] {
        self.path.points()
    }

    pub fn velocities(&self) -> &[Vec<f64>] {
        &self.velocities
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.times().last().unwrap() - self.times()[0]
    }

    /// The same motion run backwards in time.
    pub fn reversed(&self) -> Self {
        Self {
            path: self.path.reversed(),
            velocities: self
                .velocities
                .iter()
                .rev()
                .map(|v| v.iter().map(|x| -x).collect())
                .collect(),
        }
    }
}

fn first_derivatives(t: &[f64], q: &[Configuration]) -> Vec<Vec<f64>> {
    let n = t.len();
    let d = q[0].len();
    let comb = |c: [f64; 3], i: [usize; 3]| -> Vec<f64> {
        (0..d)
            .map(|k| c[0] * q[i[0]][k] + c[1] * q[i[1]][k] + c[2] * q[i[2]][k])
            .collect()
    };
    if n == 2 {
        let h = t[1] - t[0];
        let v: Vec<f64> = (0..d).map(|k| (q[1][k] - q[0][k]) / h).collect();
        return vec![v.clone(), v];
    }
    let mut out = Vec::with_capacity(n);
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    out.push(comb(
        [
            -(2.0 * h1 + h2) / (h1 * (h1 + h2)),
            (h1 + h2) / (h1 * h2),
            -h1 / (h2 * (h1 + h2)),
        ],
        [0, 1, 2],
    ));
    for i in 1..n - 1 {
        let (hm, hp) = (t[i] - t[i - 1], t[i + 1] - t[i]);
        out.push(comb(
            [
                -hp / (hm * (hm + hp)),
                (hp - hm) / (hm * hp),
                hm / (hp * (hm + hp)),
            ],
            [i - 1, i, i + 1],
        ));
    }
    let (h1, h2) = (t[n - 2] - t[n - 3], t[n - 1] - t[n - 2]);
    out.push(comb(
        [
            h2 / (h1 * (h1 + h2)),
            -(h1 + h2) / (h1 * h2),
            (2.0 * h2 + h1) / (h2 * (h1 + h2)),
        ],
        [n - 3, n - 2, n - 1],
    ));
    out
}

fn second_derivative(t: &[f64], q: &[Configuration], i: usize) -> Vec<f64> {
    let (hm, hp) = (t[i] - t[i - 1], t[i + 1] - t[i]);
    let (a, b, c) = (
        2.0 / (hm * (hm + hp)),
        -2.0 / (hm * hp),
        2.0 / (hp * (hm + hp)),
    );
    (0..q[i].len())
        .map(|k| a * q[i - 1][k] + b * q[i][k] + c * q[i + 1][k])
        .collect()
}

/// Kinetic and potential integrals of a timed path.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionReport {
    pub kinetic_integral: f64,
    pub potential_integral: f64,
    pub action: f64,
    /// `H = K - U` at every sample; `None` at poles.
    pub energy_profile: Vec<Option<f64>>,
}

impl ActionReport {
    fn new(kinetic: f64, potential: f64, energy_profile: Vec<Option<f64>>) -> Self {
        Self {
            kinetic_integral: kinetic,
            potential_integral: potential,
            action: kinetic + potential,
            energy_profile,
        }
    }

    /// Largest `|H - h0|` over the samples where `H` is defined.
    pub fn max_energy_deviation(&self, h0: f64) -> f64 {
        self.energy_profile
            .iter()
            .flatten()
            .map(|h| (h - h0).abs())
            .fold(0.0, f64::max)
    }

    /// Sample standard deviation of the defined energy values.
    pub fn energy_std(&self) -> f64 {
        let vals: Vec<f64> = self.energy_profile.iter().flatten().copied().collect();
        if vals.len() < 2 {
            return 0.0;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        (vals.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
    }
}

fn energy_profile<P: Potential + ?Sized>(path: &TimedPath, pot: &P) -> Vec<Option<f64>> {
    let masses = pot.coordinate_masses();
    path.points()
        .iter()
        .zip(path.velocities())
        .map(|(q, v)| match pot.value(q) {
            PotentialValue::Pole => None,
            PotentialValue::Finite(u) => Some(0.5 * weighted_dot(&masses, v, v) - u),
        })
        .collect()
}

/// `int K dt` and `int U dt` along the path.
///
/// Regular segments carry constant velocity; segments ending at a pole are traversed
/// homothetically (see the module docs). Paths through a collision have infinite action
/// for `alpha >= 2`.
pub fn discrete_action<P: Potential + ?Sized>(path: &TimedPath, pot: &P) -> Result<ActionReport> {
    let dim = path.path().dim();
    if dim != pot.dim() {
        return Err(Error::DimensionMismatch {
            expected: pot.dim(),
            got: dim,
        });
    }
    let masses = pot.coordinate_masses();
    let alpha = pot.alpha();
    let t = path.times();
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for (i, w) in path.points().windows(2).enumerate() {
        let dt = t[i + 1] - t[i];
        let (a, b) = (&w[0][..], &w[1][..]);
        if a == b {
            match pot.value(a) {
                PotentialValue::Finite(u) => potential += dt * u,
                PotentialValue::Pole => return Err(Error::InfiniteAction(alpha)),
            }
            continue;
        }
        let Some(pieces) = split_at_poles(pot, a, b) else {
            return Err(Error::InfiniteAction(alpha));
        };
        for piece in pieces {
            let tau = dt * (piece.f1 - piece.f0);
            let delta: Vec<f64> = piece.b.iter().zip(&piece.a).map(|(x, y)| x - y).collect();
            let len2 = weighted_dot(&masses, &delta, &delta);
            let regular = piece.pole == PoleEnd::None;
            if !regular && alpha >= 2.0 {
                return Err(Error::InfiniteAction(alpha));
            }
            let beta = 2.0 / (2.0 + alpha);
            let gamma = (2.0 + alpha) / (2.0 - alpha);
            kinetic += if regular {
                0.5 * len2 / tau
            } else {
                0.5 * beta * beta * len2 / (tau * (2.0 * beta - 1.0))
            };
            let mut acc = 0.0;
            for node in nodes(&piece, alpha) {
                let u = match pot.value(&node.point) {
                    PotentialValue::Finite(u) => u,
                    PotentialValue::Pole => return Err(Error::InfiniteAction(alpha)),
                };
                let wt = if regular {
                    node.weight
                } else {
                    node.gauss_weight * gamma * node.u.powf(gamma - 1.0)
                };
                acc += wt * u;
            }
            potential += tau * acc;
        }
    }
    Ok(ActionReport::new(kinetic, potential, energy_profile(path, pot)))
}

/// Result of comparing the zero-energy JM length with the action of a timed path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bridge {
    pub length: f64,
    pub action: f64,
    pub slack: f64,
}

/// `(l, A, A - l)` for the zero-energy JM metric, where `l <= A` by `ab <= (a^2 + b^2)/2`.
pub fn action_length_bridge<P: Potential>(path: &TimedPath, pot: &P) -> Result<Bridge> {
    let length = JmMetric::new(0.0, pot).jm_length(path.path())?;
    let action = discrete_action(path, pot)?.action;
    Ok(Bridge {
        length,
        action,
        slack: action - length,
    })
}

/// Retime a zero-energy JM arclength parameterization by `d tau = ds / (2U)`.
///
/// Velocities point along the finite-difference tangent with magnitude `sqrt(2U)`.
pub fn zero_energy_reparameterize<P: Potential>(geodesic: &SampledPath, pot: &P) -> Result<TimedPath> {
    if geodesic.kind() != ParamKind::Arclength {
        return Err(Error::InvalidPath("expected an arclength-parameterized path".into()));
    }
    let metric = JmMetric::new(0.0, pot);
    let lengths = metric.segment_lengths(geodesic)?;
    let s = geodesic.params();
    for (i, l) in lengths.iter().enumerate() {
        let ds = s[i + 1] - s[i];
        if !l.is_finite() || (ds - l).abs() > LENGTH_RTOL * l + 1e-12 {
            return Err(Error::InvalidPath(format!(
                "segment {i}: parameter step {ds} differs from JM length {l}"
            )));
        }
    }
    let masses = pot.coordinate_masses();
    let alpha = pot.alpha();
    let mut times = vec![0.0];
    for w in geodesic.points().windows(2) {
        let (a, b) = (&w[0][..], &w[1][..]);
        let pieces = split_at_poles(pot, a, b)
            .ok_or_else(|| Error::InvalidPath("segment runs along the collision set".into()))?;
        let mut dt = 0.0;
        for piece in pieces {
            let delta: Vec<f64> = piece.b.iter().zip(&piece.a).map(|(x, y)| x - y).collect();
            let len = weighted_norm(&masses, &delta);
            let mut acc = 0.0;
            for node in nodes(&piece, alpha) {
                if let PotentialValue::Finite(u) = pot.value(&node.point) {
                    acc += node.weight / (2.0 * u).sqrt();
                }
            }
            dt += len * acc;
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidPath("zero-duration segment".into()));
        }
        times.push(times.last().unwrap() + dt);
    }
    let tangents = first_derivatives(s, geodesic.points());
    let velocities = geodesic
        .points()
        .iter()
        .zip(tangents)
        .map(|(q, d)| {
            let n = weighted_norm(&masses, &d);
            match pot.value(q) {
                PotentialValue::Finite(u) if n > 0.0 => {
                    let speed = (2.0 * u).sqrt();
                    d.iter().map(|x| speed * x / n).collect()
                }
                PotentialValue::Finite(_) => d,
                PotentialValue::Pole => d
                    .iter()
                    .map(|&x| if x == 0.0 { 0.0 } else { x.signum() * f64::INFINITY })
                    .collect(),
            }
        })
        .collect();
    TimedPath::with_velocities(geodesic.with_params(times, ParamKind::Time)?, velocities)
}

/// `nu = 1 + alpha/2`.
pub fn blowup_exponent(alpha: f64) -> f64 {
    1.0 + alpha / 2.0
}

/// `q_lambda(t) = lambda q(lambda^(-nu) t)`: times scale by `lambda^nu`, positions by
/// `lambda`, velocities by `lambda^(1 - nu)`.
pub fn blowup_rescale(path: &TimedPath, lambda: f64, alpha: f64) -> Result<TimedPath> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", format!("{lambda} must be positive")));
    }
    let nu = blowup_exponent(alpha);
    let tscale = lambda.powf(nu);
    let vscale = lambda.powf(1.0 - nu);
    let times = path.times().iter().map(|t| t * tscale).collect();
    let points = path
        .points()
        .iter()
        .map(|q| Configuration::from(q.iter().map(|x| lambda * x).collect::<Vec<_>>()))
        .collect();
    let velocities = path
        .velocities()
        .iter()
        .map(|v| v.iter().map(|x| vscale * x).collect())
        .collect();
    TimedPath::with_velocities(SampledPath::new(points, times, ParamKind::Time)?, velocities)
}

/// Max relative deviation between `l_H(lambda q)` and `lambda^((2-alpha)/2) l_{lambda^alpha H}(q)`.
pub fn metric_dilation_check<P: Potential>(
    pot: &P,
    h: f64,
    lambda: f64,
    paths: &[SampledPath],
) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", format!("{lambda} must be positive")));
    }
    let alpha = pot.alpha();
    let outer = JmMetric::new(h, pot);
    let inner = JmMetric::new(lambda.powf(alpha) * h, pot);
    let scale = lambda.powf((2.0 - alpha) / 2.0);
    let mut worst = 0.0f64;
    for path in paths {
        let scaled = SampledPath::new(
            path.points()
                .iter()
                .map(|q| Configuration::from(q.iter().map(|x| lambda * x).collect::<Vec<_>>()))
                .collect(),
            path.params().to_vec(),
            path.kind(),
        )?;
        let lhs = outer.jm_length(&scaled)?;
        let rhs = scale * inner.jm_length(path)?;
        let dev = if rhs == 0.0 { lhs.abs() } else { ((lhs - rhs) / rhs).abs() };
        worst = worst.max(dev);
    }
    Ok(worst)
}

/// Action of the time-rescaled motion `x(t) = y(lambda t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeRescale {
    pub action: f64,
    /// `max(lambda, 1/lambda)` times the original action.
    pub bound: f64,
    pub within_bound: bool,
}

/// `lambda int K + (1/lambda) int U`, checked against `max(lambda, 1/lambda) A`.
pub fn time_rescale_action(report: &ActionReport, lambda: f64) -> Result<TimeRescale> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", format!("{lambda} must be positive")));
    }
    let action = lambda * report.kinetic_integral + report.potential_integral / lambda;
    let bound = lambda.max(1.0 / lambda) * report.action;
    Ok(TimeRescale {
        action,
        bound,
        within_bound: action <= bound * (1.0 + 1e-15),
    })
}

/// `x(t) = y(lambda t)` on `[t0 / lambda, t1 / lambda]`.
pub fn time_rescale_path(path: &TimedPath, lambda: f64) -> Result<TimedPath> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", format!("{lambda} must be positive")));
    }
    let times = path.times().iter().map(|t| t / lambda).collect();
    let velocities = path
        .velocities()
        .iter()
        .map(|v| v.iter().map(|x| lambda * x).collect())
        .collect();
    TimedPath::with_velocities(path.path().with_params(times, ParamKind::Time)?, velocities)
}

fn acceleration<P: Potential + ?Sized>(pot: &P, masses: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    let g = pot
        .gradient(q)
        .ok_or_else(|| Error::Numerical("trajectory reached a collision".into()))?;
    Ok(g.iter().zip(masses).map(|(g, m)| g / m).collect())
}

/// Classical RK4 for `m q'' = grad U` with `steps` fixed steps over `duration`.
pub fn integrate_newton<P: Potential + ?Sized>(
    pot: &P,
    q0: &[f64],
    v0: &[f64],
    duration: f64,
    steps: usize,
) -> Result<TimedPath> {
    if q0.len() != pot.dim() || v0.len() != pot.dim() {
        return Err(Error::DimensionMismatch {
            expected: pot.dim(),
            got: q0.len().max(v0.len()),
        });
    }
    if !(duration > 0.0) || steps == 0 {
        return Err(Error::param("duration", "need a positive duration and step count"));
    }
    let masses = pot.coordinate_masses();
    let h = duration / steps as f64;
    let axpy = |x: &[f64], a: f64, y: &[f64]| -> Vec<f64> {
        x.iter().zip(y).map(|(x, y)| x + a * y).collect()
    };
    let mut q = q0.to_vec();
    let mut v = v0.to_vec();
    let mut points = vec![Configuration::from(q.clone())];
    let mut velocities = vec![v.clone()];
    let mut times = vec![0.0];
    for k in 0..steps {
        let a1 = acceleration(pot, &masses, &q)?;
        let (q2, v2) = (axpy(&q, 0.5 * h, &v), axpy(&v, 0.5 * h, &a1));
        let a2 = acceleration(pot, &masses, &q2)?;
        let (q3, v3) = (axpy(&q, 0.5 * h, &v2), axpy(&v, 0.5 * h, &a2));
        let a3 = acceleration(pot, &masses, &q3)?;
        let (q4, v4) = (axpy(&q, h, &v3), axpy(&v, h, &a3));
        let a4 = acceleration(pot, &masses, &q4)?;
        for i in 0..q.len() {
            q[i] += h / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
            v[i] += h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
        }
        points.push(Configuration::from(q.clone()));
        velocities.push(v.clone());
        times.push((k + 1) as f64 * h);
    }
    TimedPath::with_velocities(SampledPath::new(points, times, ParamKind::Time)?, velocities)
}

/// Max over interior collision-free samples of `|q'' - M^(-1) grad U|`, with `q''` from
/// second differences of the samples.
pub fn newton_residual<P: Potential + ?Sized>(path: &TimedPath, pot: &P) -> Result<f64> {
    let masses = pot.coordinate_masses();
    let t = path.times();
    let q = path.points();
    let mut worst = 0.0f64;
    for i in 1..q.len().saturating_sub(1) {
        let Some(g) = pot.gradient(&q[i]) else { continue };
        let acc = second_derivative(t, q, i);
        for k in 0..acc.len() {
            worst = worst.max((acc[k] - g[k] / masses[k]).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrakeReport {
    /// `max_t |q(t0 + t) - q(t0 - t)|` over the integration grid.
    pub max_deviation: f64,
    /// `max |H - h0|` along the outgoing branch.
    pub energy_drift: f64,
}

/// Check that the motion leaving the Hill boundary from rest retraces itself.
///
/// The outgoing branch `q(t0 + t)` is integrated from rest for `duration`; the motion is
/// then reversed at its endpoint and integrated for `2 duration`, so that its second half
/// is an independent computation of `q(t0 - t)`. Both use `steps` steps per `duration`.
pub fn brake_retrace_check<P: Potential + ?Sized>(
    pot: &P,
    h0: f64,
    q_start: &[f64],
    v_start: &[f64],
    duration: f64,
    steps: usize,
) -> Result<BrakeReport> {
    let masses = pot.coordinate_masses();
    if v_start.len() != pot.dim() {
        return Err(Error::DimensionMismatch {
            expected: pot.dim(),
            got: v_start.len(),
        });
    }
    let k0 = 0.5 * weighted_dot(&masses, v_start, v_start);
    if k0 > 1e-12 {
        return Err(Error::param("v_start", format!("start is not at rest (K = {k0:e})")));
    }
    let u0 = match pot.value(q_start) {
        PotentialValue::Finite(u) => u,
        PotentialValue::Pole => return Err(Error::param("q_start", "start is a collision")),
    };
    if (h0 + u0).abs() > 1e-9 * (1.0 + h0.abs()) {
        return Err(Error::param(
            "q_start",
            format!("start is off the Hill boundary (h0 + U = {:e})", h0 + u0),
        ));
    }
    let out = integrate_newton(pot, q_start, v_start, duration, steps)?;
    let end = out.points().last().unwrap();
    let vend: Vec<f64> = out.velocities().last().unwrap().iter().map(|v| -v).collect();
    let back = integrate_newton(pot, end, &vend, 2.0 * duration, 2 * steps)?;
    let mut max_deviation = 0.0f64;
    for i in 0..=steps {
        let a = &out.points()[i];
        let b = &back.points()[steps + i];
        let d: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        max_deviation = max_deviation.max(d);
    }
    let energy_drift = out
        .points()
        .iter()
        .zip(out.velocities())
        .filter_map(|(q, v)| {
            pot.value(q)
                .finite()
                .map(|u| (0.5 * weighted_dot(&masses, v, v) - u - h0).abs())
        })
        .fold(0.0, f64::max);
    Ok(BrakeReport {
        max_deviation,
        energy_drift,
    })
}

/// Settings for [`minimize_fixed_time`].
#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOptions {
    pub n_samples: usize,
    pub max_iter: usize,
    /// Stop when the discrete Euler-Lagrange residual (force units) drops below this.
    pub tol: f64,
    /// Number of starts; the first is the initial guess, the rest are perturbed copies.
    pub starts: usize,
    /// Perturbation amplitude relative to the endpoint separation.
    pub perturbation: f64,
    pub seed: u64,
    /// Initial interior samples; the straight chord when `None`.
    pub init: Option<Vec<Vec<f64>>>,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            n_samples: 101,
            max_iter: 5000,
            tol: 1e-8,
            starts: 5,
            perturbation: 0.1,
            seed: 0,
            init: None,
        }
    }
}

/// Output of one fixed-endpoint, fixed-time minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedTimeSolution {
    pub path: TimedPath,
    pub report: ActionReport,
    pub iterations: usize,
    pub grad_norm: f64,
    pub el_residual: f64,
    pub collision_touch: Vec<bool>,
    /// Which start produced this solution.
    pub start: usize,
    pub converged: bool,
}

impl FixedTimeSolution {
    pub fn touches_collision(&self) -> bool {
        self.collision_touch.iter().any(|&t| t)
    }

    /// Smallest distance from a sample to a pole.
    pub fn closest_approach<P: Potential + ?Sized>(&self, pot: &P) -> f64 {
        self.path
            .points()
            .iter()
            .map(|q| pot.pole_distance(q))
            .fold(f64::INFINITY, f64::min)
    }
}

struct ActionProblem<'a, P: ?Sized> {
    pot: &'a P,
    masses: Vec<f64>,
    q0: Vec<f64>,
    q1: Vec<f64>,
    h: f64,
    n: usize,
    dim: usize,
}

impl<P: Potential + ?Sized> ActionProblem<'_, P> {
    fn sample<'b>(&'b self, x: &'b [f64], i: usize) -> &'b [f64] {
        if i == 0 {
            &self.q0
        } else if i == self.n - 1 {
            &self.q1
        } else {
            &x[(i - 1) * self.dim..i * self.dim]
        }
    }

    /// Trapezoid action and its gradient; `None` when a sample sits on a pole.
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        let (n, d, h) = (self.n, self.dim, self.h);
        let mut f = 0.0;
        for i in 0..n - 1 {
            let (a, b) = (self.sample(x, i), self.sample(x, i + 1));
            for k in 0..d {
                f += 0.5 * self.masses[k] * (b[k] - a[k]).powi(2) / h;
            }
        }
        for i in 0..n {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            f += w * h * self.pot.value(self.sample(x, i)).finite()?;
        }
        for i in 1..n - 1 {
            let (a, q, b) = (self.sample(x, i - 1), self.sample(x, i), self.sample(x, i + 1));
            let g = self.pot.gradient(q)?;
            for k in 0..d {
                grad[(i - 1) * d + k] =
                    self.masses[k] * (2.0 * q[k] - a[k] - b[k]) / h + h * g[k];
            }
        }
        Some(f)
    }

    fn residual(&self, grad: &[f64]) -> f64 {
        grad.iter()
            .enumerate()
            .map(|(j, g)| (g / (self.h * self.masses[j % self.dim])).abs())
            .fold(0.0, f64::max)
    }

    /// Solve `(m_k / h) tridiag(-1, 2, -1) z = r` for each coordinate.
    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let (m, d) = (self.n - 2, self.dim);
        let mut z = vec![0.0; r.len()];
        let mut cp = vec![0.0; m];
        let mut dp = vec![0.0; m];
        for k in 0..d {
            let s = self.masses[k] / self.h;
            let (a, b, c) = (-s, 2.0 * s, -s);
            cp[0] = c / b;
            dp[0] = r[k] / b;
            for i in 1..m {
                let den = b - a * cp[i - 1];
                cp[i] = c / den;
                dp[i] = (r[i * d + k] - a * dp[i - 1]) / den;
            }
            z[(m - 1) * d + k] = dp[m - 1];
            for i in (0..m - 1).rev() {
                z[i * d + k] = dp[i] - cp[i] * z[(i + 1) * d + k];
            }
        }
        z
    }
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Descent {
    x: Vec<f64>,
    iterations: usize,
    residual: f64,
    converged: bool,
}

/// Preconditioned L-BFGS with Armijo backtracking.
fn lbfgs<P: Potential + ?Sized>(prob: &ActionProblem<'_, P>, mut x: Vec<f64>, opts: &MinimizeOptions) -> Descent {
    const MEMORY: usize = 10;
    let len = x.len();
    let mut g = vec![0.0; len];
    let Some(mut f) = prob.eval(&x, &mut g) else {
        return Descent { x, iterations: 0, residual: f64::INFINITY, converged: false };
    };
    let mut hist: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut gn = vec![0.0; len];
    for it in 0..opts.max_iter {
        let residual = prob.residual(&g);
        if residual <= opts.tol {
            return Descent { x, iterations: it, residual, converged: true };
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dotv(s, &q);
            for j in 0..len {
                q[j] -= a * y[j];
            }
            alphas.push(a);
        }
        let mut r = prob.precondition(&q);
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dotv(y, &r);
            for j in 0..len {
                r[j] += (a - b) * s[j];
            }
        }
        let mut dir: Vec<f64> = r.iter().map(|v| -v).collect();
        if dotv(&dir, &g) >= 0.0 {
            hist.clear();
            dir = prob.precondition(&g).iter().map(|v| -v).collect();
        }
        let slope = dotv(&dir, &g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            if let Some(fnew) = prob.eval(&xn, &mut gn) {
                // near the optimum the decrease drops below rounding in `f`; fall back to
                // the approximate Wolfe test on the directional derivative
                let armijo = fnew <= f + 1e-4 * step * slope;
                let approx_wolfe = fnew <= f + 1e-12 * f.abs() && {
                    let d = dotv(&dir, &gn);
                    0.9 * slope <= d && d <= -0.8 * slope
                };
                if fnew.is_finite() && (armijo || approx_wolfe) {
                    accepted = Some((xn, fnew));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            return Descent { x, iterations: it, residual, converged: false };
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dotv(&s, &y);
        if sy > 1e-14 * dotv(&s, &s).sqrt() * dotv(&y, &y).sqrt() {
            if hist.len() == MEMORY {
                hist.remove(0);
            }
            hist.push((s, y, 1.0 / sy));
        }
        x = xn;
        f = fnew;
        g.copy_from_slice(&gn);
    }
    let residual = prob.residual(&g);
    Descent { x, iterations: opts.max_iter, residual, converged: residual <= opts.tol }
}

/// Minimize the action over paths from `q0` to `q1` in time `t_total`.
///
/// The action is discretized on a uniform time grid with `n_samples` samples (kinetic
/// term exact for the piecewise-linear interpolant, potential by the trapezoid rule) and
/// minimized over the interior samples. Starts run in parallel; the lowest-action
/// converged start wins. Samples within [`COLLISION_TOUCH_RADIUS`] of a pole are flagged,
/// not forbidden.
pub fn minimize_fixed_time<P: Potential>(
    q0: &[f64],
    q1: &[f64],
    t_total: f64,
    pot: &P,
    opts: &MinimizeOptions,
) -> Result<FixedTimeSolution> {
    let dim = pot.dim();
    for q in [q0, q1] {
        if q.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: q.len() });
        }
    }
    if opts.n_samples < 3 {
        return Err(Error::param("n_samples", "need at least 3 samples"));
    }
    if !(t_total > 0.0 && t_total.is_finite()) {
        return Err(Error::param("t_total", "total time must be positive"));
    }
    if opts.starts == 0 {
        return Err(Error::param("starts", "need at least one start"));
    }
    let n = opts.n_samples;
    let prob = ActionProblem {
        pot,
        masses: pot.coordinate_masses().into_owned(),
        q0: q0.to_vec(),
        q1: q1.to_vec(),
        h: t_total / (n - 1) as f64,
        n,
        dim,
    };
    let base: Vec<f64> = match &opts.init {
        Some(init) => {
            if init.len() != n - 2 || init.iter().any(|p| p.len() != dim) {
                return Err(Error::param("init", format!("expected {} interior samples of dimension {dim}", n - 2)));
            }
            init.iter().flatten().copied().collect()
        }
        None => (1..n - 1)
            .flat_map(|i| {
                let s = i as f64 / (n - 1) as f64;
                (0..dim).map(move |k| q0[k] + s * (q1[k] - q0[k]))
            })
            .collect(),
    };
    let sep = q0.iter().zip(q1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let amp = opts.perturbation * if sep > 0.0 { sep } else { 1.0 };
    let starts: Vec<Vec<f64>> = (0..opts.starts)
        .map(|k| {
            if k == 0 {
                return base.clone();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
            let coef: Vec<f64> = (0..3 * dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let mut x = base.clone();
            for i in 1..n - 1 {
                let s = i as f64 / (n - 1) as f64;
                for k in 0..dim {
                    let bump: f64 = (1..=3)
                        .map(|j| coef[(j - 1) * dim + k] * (std::f64::consts::PI * j as f64 * s).sin() / j as f64)
                        .sum();
                    x[(i - 1) * dim + k] += amp * bump;
                }
            }
            x
        })
        .collect();
    let runs: Vec<(usize, Descent)> = starts
        .into_par_iter()
        .enumerate()
        .map(|(k, x)| (k, lbfgs(&prob, x, opts)))
        .collect();
    let mut solutions = Vec::with_capacity(runs.len());
    for (k, run) in runs {
        let points: Vec<Vec<f64>> = (0..n).map(|i| prob.sample(&run.x, i).to_vec()).collect();
        let times: Vec<f64> = (0..n).map(|i| i as f64 * prob.h).collect();
        let path = TimedPath::from_samples(times, points)?;
        let report = match discrete_action(&path, pot) {
            Ok(r) => r,
            Err(Error::InfiniteAction(_)) => continue,
            Err(e) => return Err(e),
        };
        let collision_touch = path
            .points()
            .iter()
            .map(|q| pot.pole_distance(q) < COLLISION_TOUCH_RADIUS)
            .collect();
        let el_residual = newton_residual(&path, pot)?;
        solutions.push(FixedTimeSolution {
            path,
            report,
            iterations: run.iterations,
            grad_norm: run.residual,
            el_residual,
            collision_touch,
            start: k,
            converged: run.converged,
        });
    }
    let best_of = |conv: bool| {
        solutions
            .iter()
            .filter(|s| s.converged == conv)
            .min_by(|a, b| a.report.action.total_cmp(&b.report.action))
            .cloned()
    };
    if let Some(best) = best_of(true) {
        return Ok(best);
    }
    match best_of(false) {
        Some(best) => Err(Error::NotConverged {
            iterations: best.iterations,
            grad_norm: best.grad_norm,
            best: Box::new(best),
        }),
        None => Err(Error::Numerical("every start ended on a collision".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::HomogeneousPotential;

    fn kepler() -> HomogeneousPotential {
        HomogeneousPotential::kepler(2).unwrap()
    }

    #[test]
    fn derivatives_are_exact_for_quadratics() {
        let t = vec![0.0, 0.1, 0.35, 0.4, 1.0];
        let q: Vec<Configuration> = t.iter().map(|&s: &f64| Configuration::from(vec![s * s - s, 3.0 * s])).collect();
        let v = first_derivatives(&t, &q);
        for (s, v) in t.iter().zip(&v) {
            assert!((v[0] - (2.0 * s - 1.0)).abs() < 1e-12);
            assert!((v[1] - 3.0).abs() < 1e-12);
        }
        for i in 1..4 {
            assert!((second_derivative(&t, &q, i)[0] - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn timed_path_requires_time() {
        let p = SampledPath::uniform(vec![vec![1.0, 0.0], vec![2.0, 0.0]], ParamKind::Abstract).unwrap();
        assert!(TimedPath::new(p).is_err());
    }

    #[test]
    fn time_rescale_example() {
        let r = ActionReport::new(3.0, 2.0, vec![]);
        let t = time_rescale_action(&r, 2.0).unwrap();
        assert_eq!(t.action, 7.0);
        assert_eq!(t.bound, 10.0);
        assert!(t.within_bound);
        assert_eq!(time_rescale_action(&r, 1.0).unwrap().action, 5.0);
        assert!(time_rescale_action(&r, 0.0).is_err());
    }

    #[test]
    fn blowup_identity_and_energy() {
        let path = integrate_newton(&kepler(), &[1.0, 0.0], &[0.0, 1.0], 1.0, 100).unwrap();
        assert_eq!(blowup_rescale(&path, 1.0, 1.0).unwrap(), path);
        let r = blowup_rescale(&path, 4.0, 1.0).unwrap();
        let e = discrete_action(&r, &kepler()).unwrap();
        for h in e.energy_profile.iter().flatten() {
            assert!((h + 0.125).abs() < 1e-9);
        }
    }

    #[test]
    fn brake_preconditions() {
        let pot = HomogeneousPotential::kepler(1).unwrap();
        assert!(brake_retrace_check(&pot, -1.0, &[1.0], &[0.1], 0.4, 100).is_err());
        assert!(brake_retrace_check(&pot, -2.0, &[1.0], &[0.0], 0.4, 100).is_err());
        let r = brake_retrace_check(&pot, -1.0, &[1.0], &[0.0], 0.4, 1000).unwrap();
        assert!(r.max_deviation < 1e-8);
        assert!(r.energy_drift < 1e-8);
    }
}
