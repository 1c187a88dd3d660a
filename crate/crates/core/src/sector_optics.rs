//! The step metric on the flattened half-plane and its geodesics.
//!
//! A step shape potential (`m` near the poles, `M` on the band `|z| <= delta`) makes the
//! zero-energy JM metric piecewise conical. Projecting onto the half-plane through `N`
//! and an equator point, and flattening `theta = c phi`, leaves a planar wedge of opening
//! `c pi` cut into three sectors of constant refraction index. Geodesics are straight
//! inside each sector and obey Snell's law across sector boundaries.
//!
//! Points of the flattened wedge are Cartesian `[x, y]` with the north pole `N` at
//! `(1, 0)` and the south pole `S` at unit radius on the far bounding ray.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jm_metric::cone_radius;
use crate::potentials::{Convention, StepShapeParams};

/// Angular tolerance for deciding that a point sits on a sector boundary.
const ANGLE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub start: f64,
    pub end: f64,
    pub index: f64,
}

/// A wedge `0 <= angle <= opening` partitioned into sectors of constant index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorMetric {
    sectors: Vec<Sector>,
}

/// The symmetric three-sector geometry the test-curve formulas need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricSectors {
    pub psi1: f64,
    pub psi2: f64,
    pub n_outer: f64,
    pub n_band: f64,
}

impl SectorMetric {
    pub fn new(sectors: Vec<Sector>) -> Result<Self> {
        if sectors.is_empty() {
            return Err(Error::param("sectors", "at least one sector is required"));
        }
        if sectors[0].start != 0.0 {
            return Err(Error::param("sectors", "the first sector must start at angle 0"));
        }
        for (i, s) in sectors.iter().enumerate() {
            if !(s.end > s.start) {
                return Err(Error::param("sectors", format!("sector {i} has nonpositive opening")));
            }
            if !(s.index > 0.0 && s.index.is_finite()) {
                return Err(Error::param("sectors", format!("sector {i} index must be positive")));
            }
            if i > 0 && sectors[i - 1].end != s.start {
                return Err(Error::param("sectors", format!("gap or overlap before sector {i}")));
            }
        }
        if sectors.last().unwrap().end >= PI {
            return Err(Error::param("sectors", "total opening must be below pi"));
        }
        Ok(Self { sectors })
    }

    /// A single sector of uniform index.
    pub fn uniform(opening: f64, index: f64) -> Result<Self> {
        Self::new(vec![Sector {
            start: 0.0,
            end: opening,
            index,
        }])
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn opening(&self) -> f64 {
        self.sectors.last().unwrap().end
    }

    /// Sector containing `angle`; points on an interior boundary go to the lower sector.
    pub fn sector_of(&self, angle: f64) -> usize {
        self.sectors
            .iter()
            .position(|s| angle <= s.end)
            .unwrap_or(self.sectors.len() - 1)
    }

    pub fn index_at(&self, angle: f64) -> f64 {
        self.sectors[self.sector_of(angle)].index
    }

    /// Interior boundary angles.
    pub fn interior_boundaries(&self) -> impl Iterator<Item = f64> + '_ {
        self.sectors[..self.sectors.len() - 1].iter().map(|s| s.end)
    }

    /// Index for a path running exactly along a boundary ray: the cheaper adjacent side.
    fn index_along(&self, angle: f64) -> f64 {
        let mut best = f64::INFINITY;
        for s in &self.sectors {
            if angle >= s.start - ANGLE_EPS && angle <= s.end + ANGLE_EPS {
                best = best.min(s.index);
            }
        }
        best
    }

    pub fn symmetric(&self) -> Result<SymmetricSectors> {
        let s = &self.sectors;
        if s.len() != 3 {
            return Err(Error::param("sectors", "test curves need exactly three sectors"));
        }
        let (w1, w3) = (s[0].end - s[0].start, s[2].end - s[2].start);
        if (w1 - w3).abs() > 1e-12 || (s[0].index - s[2].index).abs() > 1e-12 * s[0].index {
            return Err(Error::param("sectors", "outer sectors must be mirror images"));
        }
        Ok(SymmetricSectors {
            psi1: w1,
            psi2: s[1].end - s[1].start,
            n_outer: s[0].index,
            n_band: s[1].index,
        })
    }

    /// Step-metric length of the straight segment `p -> q` inside the wedge.
    pub fn segment_length(&self, p: [f64; 2], q: [f64; 2]) -> f64 {
        let ap = polar_angle(p);
        let aq = polar_angle(q);
        self.segment_length_with_angles(p, q, ap, aq)
    }

    fn segment_length_with_angles(&self, p: [f64; 2], q: [f64; 2], ap: f64, aq: f64) -> f64 {
        let d = [q[0] - p[0], q[1] - p[1]];
        let len = d[0].hypot(d[1]);
        if len == 0.0 {
            return 0.0;
        }
        let p_apex = p[0] == 0.0 && p[1] == 0.0;
        let q_apex = q[0] == 0.0 && q[1] == 0.0;
        if p_apex || q_apex || (ap - aq).abs() <= ANGLE_EPS {
            // radial segment, or one along a ray
            let a = if p_apex { aq } else { ap };
            let on_boundary = self.interior_boundaries().any(|b| (a - b).abs() <= ANGLE_EPS);
            let n = if on_boundary {
                self.index_along(a)
            } else {
                self.index_at(a)
            };
            return n * len;
        }
        let (lo, hi) = if ap < aq { (ap, aq) } else { (aq, ap) };
        let mut cuts = vec![0.0];
        for b in self.interior_boundaries() {
            if b > lo + ANGLE_EPS && b < hi - ANGLE_EPS {
                let u = [b.cos(), b.sin()];
                let t = -cross(u, p) / cross(u, d);
                if t > 0.0 && t < 1.0 {
                    cuts.push(t);
                }
            }
        }
        cuts.push(1.0);
        cuts.sort_by(f64::total_cmp);
        cuts.windows(2)
            .map(|w| {
                let tm = 0.5 * (w[0] + w[1]);
                let mid = [p[0] + tm * d[0], p[1] + tm * d[1]];
                self.index_at(polar_angle(mid)) * (w[1] - w[0]) * len
            })
            .sum()
    }
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn polar_angle(p: [f64; 2]) -> f64 {
    p[1].atan2(p[0])
}

fn at_angle(r: f64, a: f64) -> [f64; 2] {
    [r * a.cos(), r * a.sin()]
}

/// Band angular width `phi* = 2 arcsin(delta)` on the sphere.
pub fn band_width(delta: f64) -> f64 {
    2.0 * delta.asin()
}

/// The three-sector wedge of the step potential.
pub fn build_counterexample_sector(
    params: StepShapeParams,
    alpha: f64,
    convention: Convention,
) -> Result<SectorMetric> {
    let params = StepShapeParams::new(params.m, params.m_big, params.delta)?;
    let c = cone_radius(alpha)?;
    let phi_star = band_width(params.delta);
    let psi1 = c * (PI - phi_star) / 2.0;
    let psi2 = c * phi_star;
    let n1 = convention.index(params.m);
    let n2 = convention.index(params.m_big);
    SectorMetric::new(vec![
        Sector { start: 0.0, end: psi1, index: n1 },
        Sector { start: psi1, end: psi1 + psi2, index: n2 },
        Sector { start: psi1 + psi2, end: c * PI, index: n1 },
    ])
}

/// The test curve `N -> x on l2 -> x on l3 -> S`, labelled by the crossing distance `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestCurve {
    pub x: f64,
}

impl TestCurve {
    pub fn new(x: f64) -> Result<Self> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::param("x", format!("x = {x} must be nonnegative")));
        }
        Ok(Self { x })
    }

    /// Vertices of the curve in the flattened wedge.
    pub fn points(&self, metric: &SectorMetric) -> Result<Vec<[f64; 2]>> {
        let g = metric.symmetric()?;
        let open = metric.opening();
        Ok(vec![
            [1.0, 0.0],
            at_angle(self.x, g.psi1),
            at_angle(self.x, g.psi1 + g.psi2),
            at_angle(1.0, open),
        ])
    }
}

/// Outer leg `s1(x) = sqrt(1 + x^2 - 2 x cos psi1)`.
fn outer_leg(psi1: f64, x: f64) -> f64 {
    (1.0 + x * x - 2.0 * x * psi1.cos()).max(0.0).sqrt()
}

/// Total step length `S(x) = 2 n1 s1(x) + n2 s2(x)`, `s2 = 2 x sin(psi2/2)`.
pub fn test_curve_length(metric: &SectorMetric, x: f64) -> Result<f64> {
    let x = TestCurve::new(x)?.x;
    let g = metric.symmetric()?;
    Ok(2.0 * g.n_outer * outer_leg(g.psi1, x) + g.n_band * 2.0 * x * (g.psi2 / 2.0).sin())
}

/// `dS/dx = 2 n1 (x - cos psi1) / s1 + 2 n2 sin(psi2/2)`.
pub fn test_curve_derivative(metric: &SectorMetric, x: f64) -> Result<f64> {
    let x = TestCurve::new(x)?.x;
    let g = metric.symmetric()?;
    let s1 = outer_leg(g.psi1, x);
    Ok(2.0 * g.n_outer * (x - g.psi1.cos()) / s1 + 2.0 * g.n_band * (g.psi2 / 2.0).sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    CollisionPath,
    InteriorMinimizer,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::CollisionPath => "collision_path",
            Classification::InteriorMinimizer => "interior_minimizer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestCurveMinimum {
    pub x_star: f64,
    pub length: f64,
    pub classification: Classification,
}

/// Minimize `S` over the test-curve family.
///
/// `S` is convex, so the minimizer is the collision path `x = 0` iff
/// `n2 sin(psi2/2) >= n1 cos(psi1)`; ties count as collision. Otherwise the stationary
/// point is `x* = cos psi1 - k sin psi1 / sqrt(1 - k^2)` with `k = n2 sin(psi2/2) / n1`.
pub fn minimize_test_curve(metric: &SectorMetric) -> Result<TestCurveMinimum> {
    let g = metric.symmetric()?;
    let k = g.n_band * (g.psi2 / 2.0).sin() / g.n_outer;
    if k >= g.psi1.cos() {
        return Ok(TestCurveMinimum {
            x_star: 0.0,
            length: 2.0 * g.n_outer,
            classification: Classification::CollisionPath,
        });
    }
    let x_star = g.psi1.cos() - k * g.psi1.sin() / (1.0 - k * k).sqrt();
    Ok(TestCurveMinimum {
        x_star,
        length: test_curve_length(metric, x_star)?,
        classification: Classification::InteriorMinimizer,
    })
}

/// Band index `n1 cos(psi1) / sin(psi2/2)` at which the minimizer collapses onto the vertex.
pub fn critical_index(psi1: f64, psi2: f64, n1: f64) -> Result<f64> {
    if !(psi1 > 0.0 && psi1 < PI) || !(psi2 > 0.0 && psi2 < PI) {
        return Err(Error::param("psi", format!("angles ({psi1}, {psi2}) must lie in (0, pi)")));
    }
    if !(n1 > 0.0) {
        return Err(Error::param("n1", "outer index must be positive"));
    }
    Ok(n1 * psi1.cos() / (psi2 / 2.0).sin())
}

/// The sufficient threshold `n1 / (c delta)`, always above [`critical_index`].
pub fn critical_index_bound(n1: f64, c: f64, delta: f64) -> f64 {
    n1 / (c * delta)
}

/// `sin(c theta) - c sin(theta)`, positive for `0 < theta < pi`, `0 < c < 1`.
pub fn sin_inequality_margin(c: f64, theta: f64) -> f64 {
    (c * theta).sin() - c * theta.sin()
}

/// The sufficient condition `n2 c(alpha) delta >= n1` for the collision path to minimize.
pub fn marchal_condition(
    params: StepShapeParams,
    alpha: f64,
    convention: Convention,
) -> Result<bool> {
    let c = cone_radius(alpha)?;
    Ok(convention.index(params.m_big) * c * params.delta >= convention.index(params.m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Refraction {
    Transmitted(f64),
    TotalInternalReflection,
}

/// Snell's law `n_in sin(theta_in) = n_out sin(theta_out)`, angles from the normal.
pub fn snell_refract(theta_in: f64, n_in: f64, n_out: f64) -> Result<Refraction> {
    if !(0.0..=PI / 2.0).contains(&theta_in) {
        return Err(Error::param("theta_in", format!("{theta_in} is outside [0, pi/2]")));
    }
    if !(n_in > 0.0 && n_out > 0.0) {
        return Err(Error::param("index", "refraction indices must be positive"));
    }
    let s = n_in / n_out * theta_in.sin();
    if s > 1.0 {
        Ok(Refraction::TotalInternalReflection)
    } else {
        Ok(Refraction::Transmitted(s.asin()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxLength,
    DomainBoundary,
    Collision,
}

/// One boundary event of a traced geodesic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub point: [f64; 2],
    pub boundary: f64,
    pub n_in: f64,
    pub n_out: f64,
    pub theta_in: f64,
    pub theta_out: f64,
    pub reflected: bool,
}

impl Crossing {
    /// `(n_in sin theta_in, n_out sin theta_out)`; equal for transmitted rays.
    pub fn snell_invariants(&self) -> (f64, f64) {
        (self.n_in * self.theta_in.sin(), self.n_out * self.theta_out.sin())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorTrace {
    pub points: Vec<[f64; 2]>,
    pub termination: Termination,
    pub optical_length: f64,
    pub euclidean_length: f64,
    pub crossings: Vec<Crossing>,
}

/// Trace a geodesic from `start` in the direction `direction` (radians from the x axis)
/// until its step length reaches `max_length`, it leaves the wedge, or it hits the vertex.
///
/// `start` must lie inside a sector, or on a bounding ray with `direction` pointing inward.
pub fn trace_sector_geodesic(
    metric: &SectorMetric,
    start: [f64; 2],
    direction: f64,
    max_length: f64,
) -> Result<SectorTrace> {
    let open = metric.opening();
    let a0 = polar_angle(start);
    let r0 = start[0].hypot(start[1]);
    if !(r0 > 0.0) || a0 < -ANGLE_EPS || a0 > open + ANGLE_EPS {
        return Err(Error::OutsideDomain(start[0], start[1]));
    }
    if metric.interior_boundaries().any(|b| (a0 - b).abs() <= ANGLE_EPS) {
        return Err(Error::param("start", "start lies on an interior sector boundary"));
    }
    let mut d = [direction.cos(), direction.sin()];
    let mut sector = if a0 <= ANGLE_EPS {
        if cross([1.0, 0.0], d) <= 0.0 {
            return Err(Error::param("direction", "direction leaves the wedge"));
        }
        0
    } else if a0 >= open - ANGLE_EPS {
        let u = [open.cos(), open.sin()];
        if cross(u, d) >= 0.0 {
            return Err(Error::param("direction", "direction leaves the wedge"));
        }
        metric.sectors().len() - 1
    } else {
        metric.sector_of(a0)
    };
    let mut p = start;
    let mut points = vec![p];
    let mut crossings = Vec::new();
    let mut optical = 0.0;
    let mut euclid = 0.0;
    let sectors = metric.sectors().to_vec();
    let last = sectors.len() - 1;
    for _ in 0..100_000 {
        let s = sectors[sector];
        let n = s.index;
        // earliest exit through one of the two bounding rays of the current sector
        let scale = 1.0 + p[0].hypot(p[1]);
        let mut hit: Option<(f64, f64, bool)> = None; // (t, ray angle, is_upper)
        for (beta, upper) in [(s.start, false), (s.end, true)] {
            let u = [beta.cos(), beta.sin()];
            let denom = cross(d, u);
            if denom == 0.0 {
                continue;
            }
            let t = -cross(p, u) / denom;
            if t <= 1e-12 * scale {
                continue;
            }
            let q = [p[0] + t * d[0], p[1] + t * d[1]];
            if dot(q, u) < -1e-12 * scale {
                continue;
            }
            if hit.is_none_or(|(tb, _, _)| t < tb) {
                hit = Some((t, beta, upper));
            }
        }
        let remaining = max_length - optical;
        let Some((t, beta, upper)) = hit else {
            let t = remaining / n;
            p = [p[0] + t * d[0], p[1] + t * d[1]];
            points.push(p);
            return Ok(SectorTrace {
                points,
                termination: Termination::MaxLength,
                optical_length: max_length,
                euclidean_length: euclid + t,
                crossings,
            });
        };
        if n * t >= remaining {
            let t = remaining / n;
            p = [p[0] + t * d[0], p[1] + t * d[1]];
            points.push(p);
            return Ok(SectorTrace {
                points,
                termination: Termination::MaxLength,
                optical_length: max_length,
                euclidean_length: euclid + t,
                crossings,
            });
        }
        let u = [beta.cos(), beta.sin()];
        let q = [p[0] + t * d[0], p[1] + t * d[1]];
        let radial = dot(q, u);
        optical += n * t;
        euclid += t;
        if radial <= 1e-12 * scale {
            points.push([0.0, 0.0]);
            return Ok(SectorTrace {
                points,
                termination: Termination::Collision,
                optical_length: optical,
                euclidean_length: euclid,
                crossings,
            });
        }
        p = at_angle(radial, beta);
        points.push(p);
        let outward = (upper && sector == last) || (!upper && sector == 0);
        if outward {
            return Ok(SectorTrace {
                points,
                termination: Termination::DomainBoundary,
                optical_length: optical,
                euclidean_length: euclid,
                crossings,
            });
        }
        let next = if upper { sector + 1 } else { sector - 1 };
        let normal = [-beta.sin(), beta.cos()];
        let dn = dot(d, normal);
        let dt = dot(d, u);
        let theta_in = dn.abs().min(1.0).acos();
        let n_out = sectors[next].index;
        match snell_refract(theta_in, n, n_out)? {
            Refraction::Transmitted(theta_out) => {
                let (sn, st) = (dn.signum(), if dt >= 0.0 { 1.0 } else { -1.0 });
                d = [
                    st * theta_out.sin() * u[0] + sn * theta_out.cos() * normal[0],
                    st * theta_out.sin() * u[1] + sn * theta_out.cos() * normal[1],
                ];
                crossings.push(Crossing {
                    point: p,
                    boundary: beta,
                    n_in: n,
                    n_out,
                    theta_in,
                    theta_out,
                    reflected: false,
                });
                sector = next;
            }
            Refraction::TotalInternalReflection => {
                d = [d[0] - 2.0 * dn * normal[0], d[1] - 2.0 * dn * normal[1]];
                crossings.push(Crossing {
                    point: p,
                    boundary: beta,
                    n_in: n,
                    n_out: n,
                    theta_in,
                    theta_out: theta_in,
                    reflected: true,
                });
            }
        }
    }
    Err(Error::Numerical("trace exceeded the segment budget".into()))
}

/// Shoot from `N` so that the traced geodesic crosses `l2` at distance `x`.
pub fn shoot_from_north(metric: &SectorMetric, x: f64, max_length: f64) -> Result<SectorTrace> {
    let g = metric.symmetric()?;
    let target = at_angle(x, g.psi1);
    let dir = (target[1]).atan2(target[0] - 1.0);
    trace_sector_geodesic(metric, [1.0, 0.0], dir, max_length)
}

/// The symmetric Snell geodesic from `N` to `S`, found by bisecting the crossing
/// distance on `l2` until the trace lands on `S`. `None` when every shot misses
/// (the minimizer is the collision path).
pub fn symmetric_north_south_geodesic(metric: &SectorMetric) -> Result<Option<SectorTrace>> {
    let g = metric.symmetric()?;
    let budget = 100.0 * g.n_band.max(g.n_outer);
    let open = metric.opening();
    let miss = |x: f64| -> Result<Option<f64>> {
        let tr = shoot_from_north(metric, x, budget)?;
        if tr.termination != Termination::DomainBoundary {
            return Ok(None);
        }
        let end = *tr.points.last().unwrap();
        if (polar_angle(end) - open).abs() > 1e-9 {
            return Ok(None);
        }
        Ok(Some(end[0].hypot(end[1]) - 1.0))
    };
    // scan for a sign change of the landing radius, then bisect
    let upper = 1.0 / g.psi1.cos().max(1e-6);
    let steps = 400;
    let mut prev: Option<(f64, f64)> = None;
    for i in 1..=steps {
        let x = upper * i as f64 / steps as f64;
        let Some(f) = miss(x)? else {
            prev = None;
            continue;
        };
        if let Some((xp, fp)) = prev {
            if fp.signum() != f.signum() {
                let (mut lo, mut hi, mut flo) = (xp, x, fp);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let Some(fm) = miss(mid)? else { break };
                    if fm.signum() == flo.signum() {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-15 {
                        break;
                    }
                }
                return shoot_from_north(metric, 0.5 * (lo + hi), budget).map(Some);
            }
        }
        prev = Some((x, f));
    }
    Ok(None)
}

/// A curve in the half-plane `(rho, phi)`, `0 <= phi <= pi` measured from `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfPlanePath {
    pub rho: Vec<f64>,
    pub phi: Vec<f64>,
}

impl HalfPlanePath {
    /// Points of the flattened wedge, `theta = c phi`.
    pub fn flattened(&self, c: f64) -> Vec<[f64; 2]> {
        self.rho
            .iter()
            .zip(&self.phi)
            .map(|(&r, &p)| at_angle(r, c * p))
            .collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rotate the spherical part of each normal-form point `x = rho s` onto the longitude
/// through `N = e_M` and the equator point `equator`, keeping `rho`.
///
/// Points are the Cartesian form of normal-form coordinates; the returned half-plane
/// path has `cos(phi) = z(s)`.
pub fn project_to_halfplane(points: &[Vec<f64>], equator: &[f64]) -> Result<HalfPlanePath> {
    let dim = equator.len();
    if dim < 2 {
        return Err(Error::param("equator", "need at least two dimensions"));
    }
    if (norm(equator) - 1.0).abs() > 1e-9 || equator[dim - 1].abs() > 1e-9 {
        return Err(Error::param("equator", "equator point must be a unit vector with z = 0"));
    }
    let mut rho = Vec::with_capacity(points.len());
    let mut phi = Vec::with_capacity(points.len());
    for x in points {
        if x.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
        }
        let r = norm(x);
        rho.push(r);
        phi.push(if r == 0.0 {
            0.0
        } else {
            (x[dim - 1] / r).clamp(-1.0, 1.0).acos()
        });
    }
    Ok(HalfPlanePath { rho, phi })
}

/// Embed a half-plane path back into `R^M` as `rho (cos(phi) N + sin(phi) E)`.
pub fn embed_halfplane(path: &HalfPlanePath, equator: &[f64]) -> Vec<Vec<f64>> {
    let dim = equator.len();
    path.rho
        .iter()
        .zip(&path.phi)
        .map(|(&r, &p)| {
            let mut v: Vec<f64> = equator.iter().map(|e| r * p.sin() * e).collect();
            v[dim - 1] += r * p.cos();
            v
        })
        .collect()
}

fn step_index(params: &StepShapeParams, convention: Convention, z: f64) -> f64 {
    convention.index(params.value_at_height(z))
}

/// Step length of a normal-form path `x_i = rho_i s_i` in `R^M`.
///
/// Each segment contributes `n_avg sqrt(d rho^2 + c^2 rho_mid^2 d angle^2)`, with
/// `d angle` the great-circle angle and `n_avg` the mean of the endpoint indices.
pub fn step_length_cone(
    points: &[Vec<f64>],
    params: &StepShapeParams,
    alpha: f64,
    convention: Convention,
) -> Result<f64> {
    let c = cone_radius(alpha)?;
    let dirs: Vec<(f64, Option<Vec<f64>>)> = points
        .iter()
        .map(|x| {
            let r = norm(x);
            (r, (r > 0.0).then(|| x.iter().map(|v| v / r).collect()))
        })
        .collect();
    let mut total = 0.0;
    for w in dirs.windows(2) {
        let ((r1, s1), (r2, s2)) = (&w[0], &w[1]);
        let (s1, s2) = match (s1, s2) {
            (Some(a), Some(b)) => (a, b),
            (Some(a), None) => (a, a),
            (None, Some(b)) => (b, b),
            (None, None) => continue,
        };
        let diff: Vec<f64> = s1.iter().zip(s2).map(|(a, b)| a - b).collect();
        let sum: Vec<f64> = s1.iter().zip(s2).map(|(a, b)| a + b).collect();
        let dang = 2.0 * norm(&diff).atan2(norm(&sum));
        let n = 0.5
            * (step_index(params, convention, *s1.last().unwrap())
                + step_index(params, convention, *s2.last().unwrap()));
        let rm = 0.5 * (r1 + r2);
        total += n * ((r2 - r1).powi(2) + (c * rm * dang).powi(2)).sqrt();
    }
    Ok(total)
}

/// Step length of a half-plane path, using the same segment rule as [`step_length_cone`].
pub fn step_length_halfplane(
    path: &HalfPlanePath,
    params: &StepShapeParams,
    alpha: f64,
    convention: Convention,
) -> Result<f64> {
    let c = cone_radius(alpha)?;
    let mut total = 0.0;
    for i in 0..path.rho.len().saturating_sub(1) {
        let (r1, r2) = (path.rho[i], path.rho[i + 1]);
        let (p1, p2) = (path.phi[i], path.phi[i + 1]);
        let (p1, p2) = match (r1 == 0.0, r2 == 0.0) {
            (true, true) => continue,
            (true, false) => (p2, p2),
            (false, true) => (p1, p1),
            _ => (p1, p2),
        };
        let n = 0.5
            * (step_index(params, convention, p1.cos()) + step_index(params, convention, p2.cos()));
        let rm = 0.5 * (r1 + r2);
        total += n * ((r2 - r1).powi(2) + (c * rm * (p2 - p1)).powi(2)).sqrt();
    }
    Ok(total)
}

/// Outcome of a brute-force shortest-path query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub length: f64,
    pub path: Vec<[f64; 2]>,
    pub hits_vertex: bool,
    pub nodes: usize,
}

/// Radius of the oracle's polar grid.
pub const ORACLE_RADIUS: f64 = 1.5;

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

struct PolarGrid<'a> {
    metric: &'a SectorMetric,
    rings: usize,
    spokes: usize,
    rho: Vec<f64>,
    angle: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    /// Sector of each spoke, or `None` for a spoke lying on an interior boundary.
    spoke_sector: Vec<Option<usize>>,
}

impl<'a> PolarGrid<'a> {
    fn new(metric: &'a SectorMetric, resolution: usize) -> Self {
        let rings = resolution;
        let spokes = resolution + 1;
        let open = metric.opening();
        let rho: Vec<f64> = (1..=rings).map(|i| ORACLE_RADIUS * i as f64 / rings as f64).collect();
        let angle: Vec<f64> = (0..spokes)
            .map(|j| open * j as f64 / (spokes - 1) as f64)
            .collect();
        let spoke_sector = angle
            .iter()
            .map(|&a| {
                if metric.interior_boundaries().any(|b| (a - b).abs() <= ANGLE_EPS) {
                    None
                } else {
                    Some(metric.sector_of(a))
                }
            })
            .collect();
        Self {
            metric,
            rings,
            spokes,
            cos: angle.iter().map(|a| a.cos()).collect(),
            sin: angle.iter().map(|a| a.sin()).collect(),
            rho,
            angle,
            spoke_sector,
        }
    }

    fn vertex(&self) -> usize {
        self.rings * self.spokes
    }

    fn id(&self, i: usize, j: usize) -> usize {
        i * self.spokes + j
    }

    fn xy(&self, i: usize, j: usize) -> [f64; 2] {
        [self.rho[i] * self.cos[j], self.rho[i] * self.sin[j]]
    }

    fn weight(&self, (i1, j1): (usize, usize), (i2, j2): (usize, usize)) -> f64 {
        let p = self.xy(i1, j1);
        let q = self.xy(i2, j2);
        match (self.spoke_sector[j1], self.spoke_sector[j2]) {
            (Some(a), Some(b)) if a == b => {
                self.metric.sectors()[a].index * (p[0] - q[0]).hypot(p[1] - q[1])
            }
            _ => self
                .metric
                .segment_length_with_angles(p, q, self.angle[j1], self.angle[j2]),
        }
    }

    /// Edges from an off-grid point to the grid nodes around it (and the vertex if close).
    fn attach(&self, pt: [f64; 2], k: usize) -> Vec<(usize, f64)> {
        let r = pt[0].hypot(pt[1]);
        let a = polar_angle(pt).clamp(0.0, self.metric.opening());
        let dr = ORACLE_RADIUS / self.rings as f64;
        let da = self.metric.opening() / (self.spokes - 1) as f64;
        let ci = (r / dr).round() as i64 - 1;
        let cj = (a / da).round() as i64;
        let k = k as i64 + 1;
        let mut out = Vec::new();
        for i in (ci - k)..=(ci + k) {
            for j in (cj - k)..=(cj + k) {
                if i < 0 || j < 0 || i >= self.rings as i64 || j >= self.spokes as i64 {
                    continue;
                }
                let (i, j) = (i as usize, j as usize);
                let q = self.xy(i, j);
                out.push((self.id(i, j), self.metric.segment_length(pt, q)));
            }
        }
        if ci - k < 0 {
            out.push((self.vertex(), self.metric.segment_length(pt, [0.0, 0.0])));
        }
        out
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Entry(Reverse<u64>, u32);

/// Shortest step-metric path between two points of the wedge on a polar grid graph.
///
/// The grid has `resolution` rings out to [`ORACLE_RADIUS`] and `resolution + 1` spokes
/// across the opening; the vertex is a single node joined to the innermost ring. Each node
/// connects to its `neighbor_order`-ring neighborhood (primitive offsets only, since a
/// non-primitive offset repeats a shorter one). Edge weights split straight edges at sector
/// boundaries. Graph paths are genuine curves, so the result overestimates the true
/// distance by the metrication error.
pub fn oracle_shortest_path(
    metric: &SectorMetric,
    a: [f64; 2],
    b: [f64; 2],
    resolution: usize,
    neighbor_order: usize,
) -> Result<OracleResult> {
    if resolution < 100 {
        return Err(Error::param("resolution", "oracle resolution must be at least 100"));
    }
    if neighbor_order == 0 {
        return Err(Error::param("neighbor_order", "neighbor order must be at least 1"));
    }
    let open = metric.opening();
    for p in [a, b] {
        let r = p[0].hypot(p[1]);
        let ang = polar_angle(p);
        if r > ORACLE_RADIUS + 1e-12 || (r > 0.0 && (ang < -1e-9 || ang > open + 1e-9)) {
            return Err(Error::OutsideDomain(p[0], p[1]));
        }
    }
    let grid = PolarGrid::new(metric, resolution);
    let vertex = grid.vertex();
    let is_apex = |p: [f64; 2]| p[0] == 0.0 && p[1] == 0.0;
    let source = if is_apex(a) { vertex } else { vertex + 1 };
    let target = if is_apex(b) { vertex } else { vertex + 2 };
    let n_nodes = vertex + 3;
    let source_edges = if source == vertex { Vec::new() } else { grid.attach(a, neighbor_order) };
    let target_edges: HashMap<usize, f64> = if target == vertex {
        HashMap::new()
    } else {
        grid.attach(b, neighbor_order).into_iter().collect()
    };

    let k = neighbor_order as i64;
    let offsets: Vec<(i64, i64)> = (-k..=k)
        .flat_map(|di| (-k..=k).map(move |dj| (di, dj)))
        .filter(|&(di, dj)| (di, dj) != (0, 0) && gcd(di, dj) == 1)
        .collect();

    let mut dist = vec![f64::INFINITY; n_nodes];
    let mut prev = vec![u32::MAX; n_nodes];
    let mut done = vec![false; n_nodes];
    let mut heap = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<Entry>, d: f64, v: usize| {
        heap.push(Entry(Reverse(d.to_bits()), v as u32));
    };
    dist[source] = 0.0;
    push(&mut heap, 0.0, source);
    if source != vertex && target != vertex {
        // a direct edge when the endpoints are close
        let dr = ORACLE_RADIUS / resolution as f64 * (neighbor_order as f64 + 1.0);
        if (a[0] - b[0]).hypot(a[1] - b[1]) <= dr {
            dist[target] = metric.segment_length(a, b);
            prev[target] = source as u32;
            push(&mut heap, dist[target], target);
        }
    }

    while let Some(Entry(Reverse(bits), u)) = heap.pop() {
        let u = u as usize;
        let du = f64::from_bits(bits);
        if done[u] || du > dist[u] {
            continue;
        }
        done[u] = true;
        if u == target {
            break;
        }
        let mut relax = |v: usize, w: f64, heap: &mut BinaryHeap<Entry>| {
            let nd = du + w;
            if !done[v] && nd < dist[v] {
                dist[v] = nd;
                prev[v] = u as u32;
                push(heap, nd, v);
            }
        };
        if u == vertex + 1 {
            for &(v, w) in &source_edges {
                relax(v, w, &mut heap);
            }
            continue;
        }
        if u == vertex {
            for j in 0..grid.spokes {
                let w = metric.segment_length([0.0, 0.0], grid.xy(0, j));
                relax(grid.id(0, j), w, &mut heap);
            }
            if target != vertex {
                if let Some(&w) = target_edges.get(&vertex) {
                    relax(target, w, &mut heap);
                }
            }
            continue;
        }
        if u >= vertex {
            continue;
        }
        let (i, j) = (u / grid.spokes, u % grid.spokes);
        if i == 0 {
            let w = metric.segment_length(grid.xy(0, j), [0.0, 0.0]);
            relax(vertex, w, &mut heap);
        }
        for &(di, dj) in &offsets {
            let (ni, nj) = (i as i64 + di, j as i64 + dj);
            if ni < 0 || nj < 0 || ni >= grid.rings as i64 || nj >= grid.spokes as i64 {
                continue;
            }
            let (ni, nj) = (ni as usize, nj as usize);
            let v = grid.id(ni, nj);
            if done[v] {
                continue;
            }
            relax(v, grid.weight((i, j), (ni, nj)), &mut heap);
        }
        if let Some(&w) = target_edges.get(&u) {
            relax(target, w, &mut heap);
        }
    }

    if !dist[target].is_finite() {
        return Err(Error::Numerical("oracle target unreachable".into()));
    }
    let mut path = Vec::new();
    let mut hits_vertex = false;
    let mut cur = target;
    loop {
        let pt = if cur == vertex {
            hits_vertex = true;
            [0.0, 0.0]
        } else if cur == vertex + 1 {
            a
        } else if cur == vertex + 2 {
            b
        } else {
            grid.xy(cur / grid.spokes, cur % grid.spokes)
        };
        path.push(pt);
        if cur == source {
            break;
        }
        cur = prev[cur] as usize;
    }
    path.reverse();
    Ok(OracleResult {
        length: dist[target],
        path,
        hits_vertex,
        nodes: n_nodes,
    })
}

/// `N` and `S` in the flattened wedge.
pub fn poles(metric: &SectorMetric) -> ([f64; 2], [f64; 2]) {
    ([1.0, 0.0], at_angle(1.0, metric.opening()))
}

/// One point of a counterexample parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: f64,
    pub m_big: f64,
    pub delta: f64,
    pub alpha: f64,
    pub convention: Convention,
    pub psi1: f64,
    pub psi2: f64,
    pub mc: f64,
    pub condition_holds: bool,
    pub x_star: f64,
    pub s_min: f64,
    pub classification: Classification,
    pub oracle_len: Option<f64>,
    pub oracle_hits_vertex: Option<bool>,
}

/// Evaluate one sweep point; the oracle runs when `oracle = Some((resolution, order))`.
pub fn sweep_point(
    params: StepShapeParams,
    alpha: f64,
    convention: Convention,
    oracle: Option<(usize, usize)>,
) -> Result<SweepRow> {
    let metric = build_counterexample_sector(params, alpha, convention)?;
    let g = metric.symmetric()?;
    let min = minimize_test_curve(&metric)?;
    let (oracle_len, oracle_hits_vertex) = match oracle {
        Some((res, k)) => {
            let (n, s) = poles(&metric);
            let o = oracle_shortest_path(&metric, n, s, res, k)?;
            (Some(o.length), Some(o.hits_vertex))
        }
        None => (None, None),
    };
    Ok(SweepRow {
        m: params.m,
        m_big: params.m_big,
        delta: params.delta,
        alpha,
        convention,
        psi1: g.psi1,
        psi2: g.psi2,
        mc: critical_index(g.psi1, g.psi2, g.n_outer)?,
        condition_holds: marchal_condition(params, alpha, convention)?,
        x_star: min.x_star,
        s_min: min.length,
        classification: min.classification,
        oracle_len,
        oracle_hits_vertex,
    })
}
