//! Homogeneous potentials, the mass inner product and collision poles.
//!
//! Throughout, `U = -V` is the *negative* of the physical potential, so `U > 0`
//! away from collisions and `U = +inf` exactly at a collision (a "pole").
//! Poles are reported as [`PotentialValue::Pole`], never as an overflowed float.

use std::borrow::Cow;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance within which a direction is silently renormalized onto the unit sphere.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Value of `U` at a configuration: finite and positive, or a collision pole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialValue {
    Finite(f64),
    Pole,
}

impl PotentialValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            PotentialValue::Finite(v) => Some(v),
            PotentialValue::Pole => None,
        }
    }

    pub fn is_pole(self) -> bool {
        matches!(self, PotentialValue::Pole)
    }

    /// The value as a float, with the pole mapped to `+inf`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// Masses, ambient dimension and gravitational constant of an N-body system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassSystem {
    dim_ambient: usize,
    masses: Vec<f64>,
    kappa: f64,
}

impl MassSystem {
    pub fn new(dim_ambient: usize, masses: Vec<f64>, kappa: f64) -> Result<Self> {
        if dim_ambient == 0 {
            return Err(Error::param("dim", "ambient dimension must be at least 1"));
        }
        if masses.len() < 2 {
            return Err(Error::param("masses", "at least two bodies are required"));
        }
        if let Some(bad) = masses.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::param("masses", format!("mass {bad} is not strictly positive")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::param("kappa", format!("kappa = {kappa} must be positive")));
        }
        Ok(Self {
            dim_ambient,
            masses,
            kappa,
        })
    }

    /// Equal unit masses with `kappa = 1`.
    pub fn unit(dim_ambient: usize, bodies: usize) -> Result<Self> {
        Self::new(dim_ambient, vec![1.0; bodies], 1.0)
    }

    pub fn dim_ambient(&self) -> usize {
        self.dim_ambient
    }

    pub fn bodies(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `M = d N`, the dimension of configuration space.
    pub fn config_dim(&self) -> usize {
        self.dim_ambient * self.masses.len()
    }

    /// Mass of the body owning each configuration coordinate.
    pub fn coordinate_masses(&self) -> Vec<f64> {
        self.masses
            .iter()
            .flat_map(|&m| std::iter::repeat_n(m, self.dim_ambient))
            .collect()
    }

    fn check(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.config_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.config_dim(),
                got: q.len(),
            });
        }
        Ok(())
    }
}

/// A point of configuration space `R^M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration(Vec<f64>);

impl Configuration {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Body `a` as a block of `d` coordinates.
    pub fn body(&self, sys: &MassSystem, a: usize) -> &[f64] {
        let d = sys.dim_ambient();
        &self.0[a * d..(a + 1) * d]
    }
}

impl Deref for Configuration {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Configuration {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// `U(q) = kappa * sum_{a<b} m_a m_b / r_ab^alpha`, with a pole exactly when some `r_ab = 0`.
pub fn power_law_eval(q: &[f64], sys: &MassSystem, alpha: f64) -> Result<PotentialValue> {
    sys.check(q)?;
    Ok(power_law_value(q, sys, alpha))
}

fn power_law_value(q: &[f64], sys: &MassSystem, alpha: f64) -> PotentialValue {
    let d = sys.dim_ambient;
    let m = &sys.masses;
    let mut total = 0.0;
    for a in 0..m.len() {
        for b in (a + 1)..m.len() {
            let r2: f64 = (0..d)
                .map(|k| {
                    let diff = q[a * d + k] - q[b * d + k];
                    diff * diff
                })
                .sum();
            if r2 == 0.0 {
                return PotentialValue::Pole;
            }
            total += m[a] * m[b] * r2.powf(-0.5 * alpha);
        }
    }
    PotentialValue::Finite(sys.kappa * total)
}

fn power_law_gradient(q: &[f64], sys: &MassSystem, alpha: f64) -> Option<Vec<f64>> {
    let d = sys.dim_ambient;
    let m = &sys.masses;
    let mut grad = vec![0.0; q.len()];
    for a in 0..m.len() {
        for b in (a + 1)..m.len() {
            let r2: f64 = (0..d)
                .map(|k| (q[a * d + k] - q[b * d + k]).powi(2))
                .sum();
            if r2 == 0.0 {
                return None;
            }
            let coef = -alpha * sys.kappa * m[a] * m[b] * r2.powf(-0.5 * alpha - 1.0);
            for k in 0..d {
                let diff = q[a * d + k] - q[b * d + k];
                grad[a * d + k] += coef * diff;
                grad[b * d + k] -= coef * diff;
            }
        }
    }
    Some(grad)
}

/// `<q, p> = sum_a m_a (q_a . p_a)`.
pub fn mass_inner_product(q: &[f64], p: &[f64], sys: &MassSystem) -> Result<f64> {
    sys.check(q)?;
    sys.check(p)?;
    let d = sys.dim_ambient;
    Ok(q.chunks(d)
        .zip(p.chunks(d))
        .zip(&sys.masses)
        .map(|((qa, pa), m)| m * qa.iter().zip(pa).map(|(x, y)| x * y).sum::<f64>())
        .sum())
}

/// Weighted dot product with per-coordinate masses.
pub fn weighted_dot(masses: &[f64], u: &[f64], v: &[f64]) -> f64 {
    masses
        .iter()
        .zip(u.iter().zip(v))
        .map(|(m, (a, b))| m * a * b)
        .sum()
}

pub fn weighted_norm(masses: &[f64], u: &[f64]) -> f64 {
    weighted_dot(masses, u, u).sqrt()
}

/// Renormalize `s` onto the unit sphere of the mass metric.
///
/// Inputs within [`UNIT_TOLERANCE`] of unit norm are rescaled silently (and returned
/// unchanged when already unit to rounding); anything further off is rejected.
pub fn unit_direction(masses: &[f64], s: &[f64]) -> Result<Vec<f64>> {
    let norm = weighted_norm(masses, s);
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::NotUnit(norm));
    }
    if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
        return Ok(s.to_vec());
    }
    Ok(s.iter().map(|x| x / norm).collect())
}

/// Parameters of the piecewise-constant shape potential: `m` near the poles,
/// `m_big` on the equatorial band `|z| <= delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepShapeParams {
    pub m: f64,
    pub m_big: f64,
    pub delta: f64,
}

impl StepShapeParams {
    pub fn new(m: f64, m_big: f64, delta: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::param("m", format!("m = {m} must be positive")));
        }
        if !(m_big > m && m_big.is_finite()) {
            return Err(Error::param("M", format!("M = {m_big} must exceed m = {m}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param("delta", format!("delta = {delta} must lie in (0, 1)")));
        }
        Ok(Self { m, m_big, delta })
    }

    /// The step shape at height `z` of a unit vector.
    pub fn value_at_height(&self, z: f64) -> f64 {
        if z.abs() > self.delta {
            self.m
        } else {
            self.m_big
        }
    }
}

/// A shape function on the unit sphere, or its gradient in ambient coordinates.
pub type ShapeFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type ShapeGradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum PotentialKind {
    PowerLaw(MassSystem),
    AnalyticShape {
        dim: usize,
        label: String,
        shape: ShapeFn,
        /// Gradient of the degree-zero extension `s -> shape(s/|s|)`, evaluated at unit `s`.
        /// Estimated by central differences when absent.
        shape_gradient: Option<ShapeGradFn>,
    },
    StepShape {
        dim: usize,
        params: StepShapeParams,
    },
}

impl fmt::Debug for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialKind::PowerLaw(sys) => f.debug_tuple("PowerLaw").field(sys).finish(),
            PotentialKind::AnalyticShape { dim, label, .. } => f
                .debug_struct("AnalyticShape")
                .field("dim", dim)
                .field("label", label)
                .finish_non_exhaustive(),
            PotentialKind::StepShape { dim, params } => f
                .debug_struct("StepShape")
                .field("dim", dim)
                .field("params", params)
                .finish(),
        }
    }
}

/// How the step metric's refraction indices are read from the shape values.
///
/// `JmConsistent` takes the index to be `sqrt(U_hat)`, which is what the conformal
/// metric `U_hat (d rho^2 + c^2 rho^2 ds^2)` actually gives. `ShapeLinear` uses
/// `U_hat` itself as the index, which is the normalization under which the threshold
/// `M delta >= m / c(alpha)` is stated. The sector analysis is identical up to relabeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    JmConsistent,
    #[default]
    ShapeLinear,
}

impl Convention {
    /// Refraction index for a shape value.
    pub fn index(self, shape_value: f64) -> f64 {
        match self {
            Convention::JmConsistent => shape_value.sqrt(),
            Convention::ShapeLinear => shape_value,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Convention::JmConsistent => "jm_consistent",
            Convention::ShapeLinear => "shape_linear",
        }
    }
}

impl std::str::FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jm_consistent" => Ok(Convention::JmConsistent),
            "shape_linear" => Ok(Convention::ShapeLinear),
            other => Err(Error::param(
                "convention",
                format!("unknown convention `{other}` (expected jm_consistent or shape_linear)"),
            )),
        }
    }
}

/// Anything that can serve as the (negated) potential `U` of a mechanical system.
///
/// [`HomogeneousPotential`] is the main implementor; tests also implement it for
/// deliberately non-homogeneous or `alpha >= 2` functions.
pub trait Potential: Send + Sync {
    /// Homogeneity degree `-alpha` near poles.
    fn alpha(&self) -> f64;

    fn dim(&self) -> usize;

    /// `U(q)`; the caller guarantees `q.len() == self.dim()`.
    fn value(&self, q: &[f64]) -> PotentialValue;

    /// Euclidean gradient of `U`, `None` at a pole.
    fn gradient(&self, q: &[f64]) -> Option<Vec<f64>>;

    /// Mass attached to each coordinate; the kinetic metric is `sum m_i dq_i^2`.
    fn coordinate_masses(&self) -> Cow<'_, [f64]> {
        Cow::Owned(vec![1.0; self.dim()])
    }

    /// Distance to the nearest pole (zero exactly at a collision).
    fn pole_distance(&self, q: &[f64]) -> f64;

    /// Parameters `t` in `(0, 1)` where the segment `a + t (b - a)` passes through a pole.
    fn segment_pole_crossings(&self, _a: &[f64], _b: &[f64]) -> Vec<f64> {
        Vec::new()
    }
}

impl<T: Potential + ?Sized> Potential for &T {
    fn alpha(&self) -> f64 {
        (**self).alpha()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, q: &[f64]) -> PotentialValue {
        (**self).value(q)
    }
    fn gradient(&self, q: &[f64]) -> Option<Vec<f64>> {
        (**self).gradient(q)
    }
    fn coordinate_masses(&self) -> Cow<'_, [f64]> {
        (**self).coordinate_masses()
    }
    fn pole_distance(&self, q: &[f64]) -> f64 {
        (**self).pole_distance(q)
    }
    fn segment_pole_crossings(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        (**self).segment_pole_crossings(a, b)
    }
}

/// A potential homogeneous of degree `-alpha`, `0 < alpha < 2`.
#[derive(Debug, Clone)]
pub struct HomogeneousPotential {
    alpha: f64,
    kind: PotentialKind,
    convention: Convention,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange(alpha))
    }
}

impl HomogeneousPotential {
    pub fn new(alpha: f64, kind: PotentialKind) -> Result<Self> {
        check_alpha(alpha)?;
        match &kind {
            PotentialKind::AnalyticShape { dim, .. } | PotentialKind::StepShape { dim, .. }
                if *dim == 0 =>
            {
                return Err(Error::param("dim", "dimension must be at least 1"));
            }
            _ => {}
        }
        Ok(Self {
            alpha,
            kind,
            convention: Convention::default(),
        })
    }

    pub fn power_law(sys: MassSystem, alpha: f64) -> Result<Self> {
        Self::new(alpha, PotentialKind::PowerLaw(sys))
    }

    pub fn step(dim: usize, params: StepShapeParams, alpha: f64) -> Result<Self> {
        Self::new(alpha, PotentialKind::StepShape { dim, params })
    }

    pub fn analytic_shape(
        dim: usize,
        alpha: f64,
        label: impl Into<String>,
        shape: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(
            alpha,
            PotentialKind::AnalyticShape {
                dim,
                label: label.into(),
                shape: Arc::new(shape),
                shape_gradient: None,
            },
        )
    }

    /// `U = 1/|q|` in `R^dim`: the Kepler problem, shape identically 1.
    pub fn kepler(dim: usize) -> Result<Self> {
        Self::new(
            1.0,
            PotentialKind::AnalyticShape {
                dim,
                label: "kepler".into(),
                shape: Arc::new(|_| 1.0),
                shape_gradient: Some(Arc::new(|s: &[f64]| vec![0.0; s.len()])),
            },
        )
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn step_params(&self) -> Option<StepShapeParams> {
        match &self.kind {
            PotentialKind::StepShape { params, .. } => Some(*params),
            _ => None,
        }
    }

    /// Evaluate `U`, checking the dimension.
    pub fn eval(&self, q: &[f64]) -> Result<PotentialValue> {
        self.check_dim(q)?;
        Ok(self.value(q))
    }

    /// The shape potential `U_hat(s)` on the unit sphere of the mass metric.
    pub fn shape_eval(&self, s: &[f64]) -> Result<PotentialValue> {
        self.check_dim(s)?;
        let unit = unit_direction(&self.coordinate_masses(), s)?;
        Ok(match &self.kind {
            PotentialKind::PowerLaw(sys) => power_law_value(&unit, sys, self.alpha),
            _ => self.shape_of_unit(&unit),
        })
    }

    fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: q.len(),
            });
        }
        Ok(())
    }

    fn shape_of_unit(&self, s: &[f64]) -> PotentialValue {
        let v = match &self.kind {
            PotentialKind::PowerLaw(sys) => return power_law_value(s, sys, self.alpha),
            PotentialKind::AnalyticShape { shape, .. } => shape(s),
            PotentialKind::StepShape { params, .. } => {
                params.value_at_height(*s.last().expect("dim >= 1"))
            }
        };
        if v.is_finite() {
            PotentialValue::Finite(v)
        } else {
            PotentialValue::Pole
        }
    }
}

impl Potential for HomogeneousPotential {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn dim(&self) -> usize {
        match &self.kind {
            PotentialKind::PowerLaw(sys) => sys.config_dim(),
            PotentialKind::AnalyticShape { dim, .. } | PotentialKind::StepShape { dim, .. } => {
                *dim
            }
        }
    }

    fn value(&self, q: &[f64]) -> PotentialValue {
        match &self.kind {
            PotentialKind::PowerLaw(sys) => power_law_value(q, sys, self.alpha),
            _ => {
                let r = q.iter().map(|x| x * x).sum::<f64>().sqrt();
                if r == 0.0 {
                    return PotentialValue::Pole;
                }
                let s: Vec<f64> = q.iter().map(|x| x / r).collect();
                match self.shape_of_unit(&s) {
                    PotentialValue::Finite(v) => PotentialValue::Finite(r.powf(-self.alpha) * v),
                    PotentialValue::Pole => PotentialValue::Pole,
                }
            }
        }
    }

    fn gradient(&self, q: &[f64]) -> Option<Vec<f64>> {
        match &self.kind {
            PotentialKind::PowerLaw(sys) => power_law_gradient(q, sys, self.alpha),
            PotentialKind::AnalyticShape {
                shape,
                shape_gradient,
                ..
            } => {
                let r = q.iter().map(|x| x * x).sum::<f64>().sqrt();
                if r == 0.0 {
                    return None;
                }
                let s: Vec<f64> = q.iter().map(|x| x / r).collect();
                let shat = shape(&s);
                // Tangential gradient of the degree-zero extension.
                let tangential = match shape_gradient {
                    Some(g) => g(&s),
                    None => {
                        let h = 1e-6;
                        (0..s.len())
                            .map(|i| {
                                let mut p = s.clone();
                                let mut m = s.clone();
                                p[i] += h;
                                m[i] -= h;
                                let np = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                                let nm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
                                p.iter_mut().for_each(|x| *x /= np);
                                m.iter_mut().for_each(|x| *x /= nm);
                                (shape(&p) - shape(&m)) / (2.0 * h)
                            })
                            .collect()
                    }
                };
                let ra = r.powf(-self.alpha - 1.0);
                Some(
                    s.iter()
                        .zip(&tangential)
                        .map(|(si, ti)| ra * (-self.alpha * shat * si + ti))
                        .collect(),
                )
            }
            PotentialKind::StepShape { .. } => {
                // Radial part only; the band edges carry a singular tangential force.
                let r = q.iter().map(|x| x * x).sum::<f64>().sqrt();
                let u = self.value(q).finite()?;
                Some(q.iter().map(|x| -self.alpha * u * x / (r * r)).collect())
            }
        }
    }

    fn coordinate_masses(&self) -> Cow<'_, [f64]> {
        match &self.kind {
            PotentialKind::PowerLaw(sys) => Cow::Owned(sys.coordinate_masses()),
            _ => Cow::Owned(vec![1.0; self.dim()]),
        }
    }

    fn pole_distance(&self, q: &[f64]) -> f64 {
        match &self.kind {
            PotentialKind::PowerLaw(sys) => {
                let d = sys.dim_ambient;
                let n = sys.bodies();
                let mut best = f64::INFINITY;
                for a in 0..n {
                    for b in (a + 1)..n {
                        let r = (0..d)
                            .map(|k| (q[a * d + k] - q[b * d + k]).powi(2))
                            .sum::<f64>()
                            .sqrt();
                        best = best.min(r);
                    }
                }
                best
            }
            _ => q.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }

    fn segment_pole_crossings(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        match &self.kind {
            PotentialKind::PowerLaw(sys) => {
                let d = sys.dim_ambient;
                let n = sys.bodies();
                for i in 0..n {
                    for j in (i + 1)..n {
                        let d0: Vec<f64> = (0..d).map(|k| a[i * d + k] - a[j * d + k]).collect();
                        let d1: Vec<f64> = (0..d).map(|k| b[i * d + k] - b[j * d + k]).collect();
                        if let Some(t) = line_hits_origin(&d0, &d1) {
                            out.push(t);
                        }
                    }
                }
            }
            _ => {
                if let Some(t) = line_hits_origin(a, b) {
                    out.push(t);
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

/// Interior parameter at which `d0 + t (d1 - d0)` vanishes, if any.
fn line_hits_origin(d0: &[f64], d1: &[f64]) -> Option<f64> {
    let n0 = d0.iter().map(|x| x * x).sum::<f64>().sqrt();
    let n1 = d1.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n0 == 0.0 || n1 == 0.0 {
        return None;
    }
    let delta: Vec<f64> = d1.iter().zip(d0).map(|(x, y)| x - y).collect();
    let dd = delta.iter().map(|x| x * x).sum::<f64>();
    let t = -d0.iter().zip(&delta).map(|(x, y)| x * y).sum::<f64>() / dd;
    if !(t > 0.0 && t < 1.0) {
        return None;
    }
    let miss = d0
        .iter()
        .zip(&delta)
        .map(|(x, y)| (x + t * y).powi(2))
        .sum::<f64>()
        .sqrt();
    (miss <= 1e-12 * n0.max(n1)).then_some(t)
}

/// Maximum of `|U(r s) - r^-alpha U(s)| / (r^-alpha U(s))` over random `(r, s)`.
///
/// Radii are drawn log-uniformly from `[1e-2, 1e2]`, directions uniformly on the unit
/// sphere of the mass metric. Deterministic for a given seed.
pub fn homogeneity_check<P: Potential + ?Sized>(pot: &P, sample_count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masses = pot.coordinate_masses();
    let alpha = pot.alpha();
    let mut worst: f64 = 0.0;
    let mut drawn = 0;
    while drawn < sample_count.max(1) {
        let raw: Vec<f64> = (0..pot.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let norm = weighted_norm(&masses, &raw);
        if norm == 0.0 {
            continue;
        }
        let s: Vec<f64> = raw.iter().map(|x| x / norm).collect();
        let r = 10f64.powf(rng.random_range(-2.0..2.0));
        let (Some(shape), Some(u)) = (
            pot.value(&s).finite(),
            pot.value(&s.iter().map(|x| r * x).collect::<Vec<_>>()).finite(),
        ) else {
            continue;
        };
        let expected = r.powf(-alpha) * shape;
        worst = worst.max((u - expected).abs() / expected);
        drawn += 1;
    }
    worst
}
