//! The Jacobi-Maupertuis metric `ds^2 = 2 (h0 + U(q)) |dq|^2` and its conical normal form.
//!
//! `|dq|` is always the mass norm of the attached potential. Lengths include the factor 2
//! by default; [`FactorTwo::Dropped`] removes it, which is the normalization in which the
//! zero-energy Kepler metric is exactly the cone `d rho^2 + (1/2)^2 rho^2 d theta^2`.
//! Comparisons across the two normalizations differ by exactly `sqrt(2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{
    unit_direction, weighted_dot, weighted_norm, Configuration, HomogeneousPotential, Potential,
    PotentialValue,
};
use crate::quadrature::{nodes, split_at_poles, PoleEnd};

/// Default relative tolerance for length comparisons.
pub const LENGTH_RTOL: f64 = 1e-6;
/// Default absolute tolerance for coordinate round trips.
pub const COORD_ATOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Time,
    Arclength,
    Abstract,
}

/// Ordered samples of a curve, interpolated piecewise linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    points: Vec<Configuration>,
    params: Vec<f64>,
    kind: ParamKind,
}

impl SampledPath {
    pub fn new(points: Vec<Configuration>, params: Vec<f64>, kind: ParamKind) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidPath("a path needs at least 2 samples".into()));
        }
        if points.len() != params.len() {
            return Err(Error::InvalidPath(format!(
                "{} points but {} parameter values",
                points.len(),
                params.len()
            )));
        }
        let dim = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        if params.iter().any(|t| !t.is_finite()) || params.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPath("parameters must be strictly increasing".into()));
        }
        Ok(Self {
            points,
            params,
            kind,
        })
    }

    /// Samples with parameters `0, 1/(n-1), ..., 1`.
    pub fn uniform(points: Vec<Vec<f64>>, kind: ParamKind) -> Result<Self> {
        let n = points.len();
        let params = (0..n).map(|i| i as f64 / (n.max(2) - 1) as f64).collect();
        Self::new(points.into_iter().map(Configuration::from).collect(), params, kind)
    }

    pub fn points(&self) -> &[Configuration] {
        &self.points
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn kind(&self) -> ParamKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// The same curve traversed backwards, parameters mirrored about the final value.
    pub fn reversed(&self) -> Self {
        let last = *self.params.last().unwrap();
        let first = self.params[0];
        Self {
            points: self.points.iter().rev().cloned().collect(),
            params: self.params.iter().rev().map(|t| first + last - t).collect(),
            kind: self.kind,
        }
    }

    /// Insert `k - 1` evenly spaced samples inside every segment.
    pub fn refine(&self, k: usize) -> Self {
        let k = k.max(1);
        let mut points = Vec::with_capacity((self.len() - 1) * k + 1);
        let mut params = Vec::with_capacity(points.capacity());
        for i in 0..self.len() - 1 {
            let (a, b) = (&self.points[i], &self.points[i + 1]);
            let (ta, tb) = (self.params[i], self.params[i + 1]);
            for j in 0..k {
                let s = j as f64 / k as f64;
                points.push(Configuration::from(
                    a.iter().zip(b.iter()).map(|(x, y)| x + s * (y - x)).collect::<Vec<_>>(),
                ));
                params.push(ta + s * (tb - ta));
            }
        }
        points.push(self.points.last().unwrap().clone());
        params.push(*self.params.last().unwrap());
        Self {
            points,
            params,
            kind: self.kind,
        }
    }

    pub(crate) fn with_params(&self, params: Vec<f64>, kind: ParamKind) -> Result<Self> {
        Self::new(self.points.clone(), params, kind)
    }
}

/// Whether the overall factor 2 of the JM conformal factor is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorTwo {
    #[default]
    Included,
    Dropped,
}

impl FactorTwo {
    pub fn value(self) -> f64 {
        match self {
            FactorTwo::Included => 2.0,
            FactorTwo::Dropped => 1.0,
        }
    }
}

/// The JM metric of a potential at energy `h0`.
#[derive(Debug, Clone)]
pub struct JmMetric<P> {
    pub h0: f64,
    pub pot: P,
    pub factor: FactorTwo,
}

impl<P: Potential> JmMetric<P> {
    pub fn new(h0: f64, pot: P) -> Self {
        Self {
            h0,
            pot,
            factor: FactorTwo::Included,
        }
    }

    pub fn with_factor(mut self, factor: FactorTwo) -> Self {
        self.factor = factor;
        self
    }

    fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.pot.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.pot.dim(),
                got: q.len(),
            });
        }
        Ok(())
    }

    fn hill_tolerance(&self) -> f64 {
        1e-12 * (1.0 + self.h0.abs())
    }

    /// `h0 + U(q)` clamped at the Hill boundary, or an error outside the Hill region.
    fn kinetic_budget(&self, q: &[f64]) -> Result<PotentialValue> {
        match self.pot.value(q) {
            PotentialValue::Pole => Ok(PotentialValue::Pole),
            PotentialValue::Finite(u) => {
                let e = self.h0 + u;
                if e < -self.hill_tolerance() {
                    Err(Error::OutsideHillRegion(e))
                } else {
                    Ok(PotentialValue::Finite(e.max(0.0)))
                }
            }
        }
    }

    /// `2 (h0 + U(q))`, or a pole at collisions.
    pub fn conformal_factor(&self, q: &[f64]) -> Result<PotentialValue> {
        self.check_dim(q)?;
        Ok(match self.kinetic_budget(q)? {
            PotentialValue::Finite(e) => PotentialValue::Finite(self.factor.value() * e),
            PotentialValue::Pole => PotentialValue::Pole,
        })
    }

    /// `h0 + U(q) >= 0`; collision points count as contained.
    pub fn hill_region_contains(&self, q: &[f64]) -> bool {
        match self.pot.value(q) {
            PotentialValue::Pole => true,
            PotentialValue::Finite(u) => self.h0 + u >= 0.0,
        }
    }

    /// JM length of each segment of the piecewise-linear interpolant.
    pub fn segment_lengths(&self, path: &SampledPath) -> Result<Vec<f64>> {
        self.check_dim(&path.points()[0])?;
        let masses = self.pot.coordinate_masses();
        let alpha = self.pot.alpha();
        let f = self.factor.value();
        path.points()
            .windows(2)
            .map(|w| {
                let (a, b) = (&w[0][..], &w[1][..]);
                if a == b {
                    return Ok(0.0);
                }
                let Some(pieces) = split_at_poles(&self.pot, a, b) else {
                    return Ok(f64::INFINITY);
                };
                let mut total = 0.0;
                for piece in pieces {
                    if piece.pole != PoleEnd::None && alpha >= 2.0 {
                        return Ok(f64::INFINITY);
                    }
                    let delta: Vec<f64> = piece.b.iter().zip(&piece.a).map(|(x, y)| x - y).collect();
                    let len = weighted_norm(&masses, &delta);
                    let mut acc = 0.0;
                    for node in nodes(&piece, alpha) {
                        let e = match self.kinetic_budget(&node.point)? {
                            PotentialValue::Finite(e) => e,
                            PotentialValue::Pole => return Ok(f64::INFINITY),
                        };
                        acc += node.weight * (f * e).sqrt();
                    }
                    total += len * acc;
                }
                Ok(total)
            })
            .collect()
    }

    /// `int sqrt(2 (h0 + U)) |dq|` along the piecewise-linear interpolant.
    ///
    /// Segments ending at a pole are integrated after the substitution that removes the
    /// `r^(-alpha/2)` endpoint singularity, so collision paths have finite length for
    /// `alpha < 2`.
    pub fn jm_length(&self, path: &SampledPath) -> Result<f64> {
        Ok(self.segment_lengths(path)?.iter().sum())
    }

    /// The same samples, reparameterized by cumulative JM arclength.
    pub fn arclength_parameterize(&self, path: &SampledPath) -> Result<SampledPath> {
        let lengths = self.segment_lengths(path)?;
        let mut params = Vec::with_capacity(path.len());
        let mut acc = 0.0;
        params.push(0.0);
        for l in lengths {
            if !l.is_finite() {
                return Err(Error::InvalidPath("segment of infinite JM length".into()));
            }
            acc += l;
            params.push(acc);
        }
        path.with_params(params, ParamKind::Arclength)
    }
}

/// `c(alpha) = (2 - alpha) / 2`.
pub fn cone_radius(alpha: f64) -> Result<f64> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok((2.0 - alpha) / 2.0)
    } else {
        Err(Error::AlphaOutOfRange(alpha))
    }
}

/// `rho = r^(1 - alpha/2) / c(alpha)`.
pub fn to_cone_coordinates(r: f64, alpha: f64) -> Result<f64> {
    let c = cone_radius(alpha)?;
    if !(r >= 0.0) {
        return Err(Error::param("r", format!("radius {r} must be nonnegative")));
    }
    Ok(r.powf(c) / c)
}

/// Inverse of [`to_cone_coordinates`]: `r = (c rho)^(1/c)`.
pub fn from_cone_coordinates(rho: f64, alpha: f64) -> Result<f64> {
    let c = cone_radius(alpha)?;
    if !(rho >= 0.0) {
        return Err(Error::param("rho", format!("rho = {rho} must be nonnegative")));
    }
    Ok((c * rho).powf(1.0 / c))
}

/// Normal-form coordinates `(rho, s)` of a configuration, with the cone radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeChart {
    pub rho: f64,
    /// Unit vector in the mass metric; arbitrary (the zero vector) at the cone point.
    pub angular: Vec<f64>,
    pub c: f64,
}

impl ConeChart {
    pub fn from_configuration(q: &[f64], masses: &[f64], alpha: f64) -> Result<Self> {
        let c = cone_radius(alpha)?;
        let r = weighted_norm(masses, q);
        let angular = if r == 0.0 {
            vec![0.0; q.len()]
        } else {
            q.iter().map(|x| x / r).collect()
        };
        Ok(Self {
            rho: to_cone_coordinates(r, alpha)?,
            angular,
            c,
        })
    }

    pub fn to_configuration(&self, alpha: f64) -> Result<Vec<f64>> {
        let r = from_cone_coordinates(self.rho, alpha)?;
        Ok(self.angular.iter().map(|x| r * x).collect())
    }

    pub fn is_cone_point(&self) -> bool {
        self.rho == 0.0
    }
}

/// Conformal factor `U_hat(s)` multiplying the cone metric `d rho^2 + c^2 rho^2 ds^2`.
pub fn normal_form_factor(pot: &HomogeneousPotential, s: &[f64]) -> Result<PotentialValue> {
    pot.shape_eval(s)
}

fn sphere_angle(masses: &[f64], s1: &[f64], s2: &[f64]) -> f64 {
    let diff: Vec<f64> = s1.iter().zip(s2).map(|(a, b)| a - b).collect();
    let sum: Vec<f64> = s1.iter().zip(s2).map(|(a, b)| a + b).collect();
    2.0 * weighted_norm(masses, &diff).atan2(weighted_norm(masses, &sum))
}

/// Zero-energy JM length computed in normal-form coordinates.
///
/// Each segment contributes `sqrt(k U_hat(s_mid)) sqrt(d rho^2 + c^2 rho_mid^2 d angle^2)`
/// where `k` is the factor-2 flag; this is an independent second-order discretization of
/// the same length, used to cross-check [`JmMetric::jm_length`].
pub fn normal_form_length(
    metric: &JmMetric<&HomogeneousPotential>,
    path: &SampledPath,
) -> Result<f64> {
    if metric.h0 != 0.0 {
        return Err(Error::param("h0", "the conical normal form requires zero energy"));
    }
    let pot = metric.pot;
    let alpha = pot.alpha();
    let masses = pot.coordinate_masses();
    let charts = path
        .points()
        .iter()
        .map(|q| ConeChart::from_configuration(q, &masses, alpha))
        .collect::<Result<Vec<_>>>()?;
    let k = metric.factor.value();
    let mut total = 0.0;
    for w in charts.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        let (s1, s2) = match (p.is_cone_point(), q.is_cone_point()) {
            (true, true) => continue,
            (true, false) => (&q.angular, &q.angular),
            (false, true) => (&p.angular, &p.angular),
            (false, false) => (&p.angular, &q.angular),
        };
        let mid: Vec<f64> = s1.iter().zip(s2).map(|(a, b)| a + b).collect();
        let norm = weighted_norm(&masses, &mid);
        let mid: Vec<f64> = mid.iter().map(|x| x / norm).collect();
        let shape = match pot.shape_eval(&mid)? {
            PotentialValue::Finite(v) => v,
            PotentialValue::Pole => return Ok(f64::INFINITY),
        };
        let dang = sphere_angle(&masses, s1, s2);
        let rho_mid = 0.5 * (p.rho + q.rho);
        let drho = q.rho - p.rho;
        total += (k * shape).sqrt() * (drho * drho + (p.c * rho_mid * dang).powi(2)).sqrt();
    }
    Ok(total)
}

/// Gaussian curvature `-(h0/4) [r (h0 + 1/r)]^-3` of the planar Kepler JM metric.
pub fn kepler_gauss_curvature(r: f64, h0: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) || !(h0 + 1.0 / r > 0.0) {
        return Err(Error::param(
            "r",
            format!("(r, h0) = ({r}, {h0}) lies outside 0 < h0 + 1/r < inf"),
        ));
    }
    Ok(-(h0 / 4.0) * (r * (h0 + 1.0 / r)).powi(-3))
}

/// Five-point finite-difference Gaussian curvature `-(1/(2 lambda)) Laplacian(ln lambda)`
/// of a planar conformal metric `lambda |dq|^2`.
pub fn conformal_gauss_curvature_fd<P: Potential>(
    metric: &JmMetric<P>,
    point: [f64; 2],
    step: f64,
) -> Result<f64> {
    if metric.pot.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: metric.pot.dim(),
        });
    }
    let ln_factor = |x: f64, y: f64| -> Result<f64> {
        match metric.conformal_factor(&[x, y])? {
            PotentialValue::Finite(l) if l > 0.0 => Ok(l.ln()),
            _ => Err(Error::param("point", "stencil touches a pole or the Hill boundary")),
        }
    };
    let [x, y] = point;
    let center = ln_factor(x, y)?;
    let lap = (ln_factor(x + step, y)? + ln_factor(x - step, y)? + ln_factor(x, y + step)?
        + ln_factor(x, y - step)?
        - 4.0 * center)
        / (step * step);
    Ok(-lap / (2.0 * center.exp()))
}

/// Mass-metric dot product helper re-exported for path utilities.
pub fn mass_dot<P: Potential>(pot: &P, u: &[f64], v: &[f64]) -> f64 {
    weighted_dot(&pot.coordinate_masses(), u, v)
}

/// Renormalize a direction in the potential's mass metric.
pub fn normalize<P: Potential>(pot: &P, s: &[f64]) -> Result<Vec<f64>> {
    unit_direction(&pot.coordinate_masses(), s)
}
