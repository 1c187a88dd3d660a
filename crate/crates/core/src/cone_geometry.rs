//! Cones over circles: `d rho^2 + c^2 rho^2 d theta^2`.
//!
//! Flattening `phi = c theta` turns the cone into a planar sector of opening `2 pi c`
//! with its two bounding rays glued. Minimizing geodesics are straight segments in the
//! flattened sector, or pass through the apex when the flattened angle reaches `pi`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirclePoint {
    pub rho: f64,
    pub theta: f64,
}

impl CirclePoint {
    /// A point with `theta` reduced to `[0, 2 pi)`.
    pub fn new(rho: f64, theta: f64) -> Self {
        Self {
            rho,
            theta: theta.rem_euclid(TAU),
        }
    }

    pub fn apex() -> Self {
        Self { rho: 0.0, theta: 0.0 }
    }

    pub fn is_apex(&self) -> bool {
        self.rho == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    c: f64,
}

impl ConeSpec {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param("c", format!("cone radius {c} must be positive")));
        }
        Ok(Self { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Total opening angle `2 pi c` of the cut flattened cone.
    pub fn opening(&self) -> f64 {
        TAU * self.c
    }
}

/// A point of the flattened sector in polar form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatPoint {
    pub rho: f64,
    pub phi: f64,
}

impl FlatPoint {
    pub fn xy(&self) -> [f64; 2] {
        [self.rho * self.phi.cos(), self.rho * self.phi.sin()]
    }
}

/// `(rho, theta) -> (rho, c theta)`; the stored `theta` is used as given.
pub fn flatten(p: CirclePoint, cone: ConeSpec) -> FlatPoint {
    FlatPoint {
        rho: p.rho,
        phi: cone.c * p.theta,
    }
}

/// Smallest angular gap between two circle angles, in `[0, pi]`.
pub fn angular_gap(theta1: f64, theta2: f64) -> f64 {
    let d = (theta2 - theta1).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Exact length-space distance on the cone.
pub fn cone_distance(p1: CirclePoint, p2: CirclePoint, cone: ConeSpec) -> f64 {
    if p1.is_apex() || p2.is_apex() {
        return p1.rho + p2.rho;
    }
    let flat = cone.c * angular_gap(p1.theta, p2.theta);
    if flat < PI {
        let (a, b) = (p1.rho, p2.rho);
        (a * a + b * b - 2.0 * a * b * flat.cos()).max(0.0).sqrt()
    } else {
        p1.rho + p2.rho
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ApexVerdict {
    /// The broken geodesic can be shortened; `margin` is the saving of the full unit-radius corner cut.
    Inextendible { margin: f64, flat_angle: f64 },
    /// The concatenation through the apex is locally minimizing.
    Geodesic { flat_angle: f64 },
}

impl ApexVerdict {
    pub fn margin(&self) -> f64 {
        match self {
            ApexVerdict::Inextendible { margin, .. } => *margin,
            ApexVerdict::Geodesic { .. } => 0.0,
        }
    }

    pub fn is_inextendible(&self) -> bool {
        matches!(self, ApexVerdict::Inextendible { .. })
    }
}

/// Smaller of the two flattened angles between rays at `theta_in`, `theta_out`,
/// measured through either copy of the glued bounding ray.
pub fn min_flat_angle(cone: ConeSpec, theta_in: f64, theta_out: f64) -> f64 {
    let d = (theta_out - theta_in).rem_euclid(TAU);
    (cone.c * d).min(cone.c * (TAU - d))
}

/// Decide whether a geodesic arriving at the apex along `theta_in` continues as one
/// along `theta_out`.
pub fn apex_extendibility(cone: ConeSpec, theta_in: f64, theta_out: f64) -> ApexVerdict {
    let flat_angle = min_flat_angle(cone, theta_in, theta_out);
    if flat_angle < PI {
        ApexVerdict::Inextendible {
            margin: 2.0 - 2.0 * (flat_angle / 2.0).sin(),
            flat_angle,
        }
    } else {
        ApexVerdict::Geodesic { flat_angle }
    }
}

/// The shortened path of a corner cut, in flattened Cartesian coordinates with the
/// incoming ray along `phi = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerCut {
    pub flat_angle: f64,
    pub cut_radius: f64,
    /// Unit-radius start, the two cut points, unit-radius end.
    pub path: Vec<[f64; 2]>,
    /// The original through-apex path.
    pub apex_path: Vec<[f64; 2]>,
    pub length: f64,
    pub apex_length: f64,
    pub saving: f64,
}

/// Replace the part of the unit rays inside `cut_radius` by the chord between them.
pub fn corner_cut(
    cone: ConeSpec,
    theta_in: f64,
    theta_out: f64,
    cut_radius: f64,
) -> Result<CornerCut> {
    if !(cut_radius > 0.0 && cut_radius <= 1.0) {
        return Err(Error::param(
            "cut_radius",
            format!("cut radius {cut_radius} must lie in (0, 1]"),
        ));
    }
    let phi = min_flat_angle(cone, theta_in, theta_out);
    let r = cut_radius;
    let (c, s) = (phi.cos(), phi.sin());
    let apex_length = 2.0;
    let (path, length) = if phi < PI {
        let chord = 2.0 * r * (phi / 2.0).sin();
        (
            vec![[1.0, 0.0], [r, 0.0], [r * c, r * s], [c, s]],
            2.0 * (1.0 - r) + chord,
        )
    } else {
        (vec![[1.0, 0.0], [0.0, 0.0], [c, s]], apex_length)
    };
    Ok(CornerCut {
        flat_angle: phi,
        cut_radius: r,
        path,
        apex_path: vec![[1.0, 0.0], [0.0, 0.0], [c, s]],
        length,
        apex_length,
        saving: (apex_length - length).max(0.0),
    })
}

/// The double-cover image of a point of the `c = 1/2` cone in the plane.
pub fn half_cone_to_plane(p: CirclePoint) -> [f64; 2] {
    let phi = p.theta / 2.0;
    [p.rho * phi.cos(), p.rho * phi.sin()]
}

/// Distance in the quotient `R^2 / Z_2` under `u -> -u`.
pub fn z2_quotient_distance(u: [f64; 2], v: [f64; 2]) -> f64 {
    let minus = ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2)).sqrt();
    let plus = ((u[0] + v[0]).powi(2) + (u[1] + v[1]).powi(2)).sqrt();
    minus.min(plus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn half() -> ConeSpec {
        ConeSpec::new(0.5).unwrap()
    }

    #[test]
    fn flatten_examples() {
        assert!((flatten(CirclePoint { rho: 1.0, theta: PI }, half()).phi - PI / 2.0).abs() < 1e-15);
        assert_eq!(flatten(CirclePoint { rho: 1.0, theta: TAU }, half()).phi, PI);
        assert!(CirclePoint::new(0.0, 1.3).is_apex());
    }

    #[test]
    fn distance_examples() {
        let d = cone_distance(CirclePoint::new(1.0, 0.0), CirclePoint::new(1.0, PI), half());
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        let p = CirclePoint::new(0.7, 2.0);
        assert_eq!(cone_distance(p, p, half()), 0.0);
        let flat = ConeSpec::new(1.0).unwrap();
        let d = cone_distance(CirclePoint::new(1.0, 0.0), CirclePoint::new(1.0, PI), flat);
        assert!((d - 2.0).abs() < 1e-15);
        // c > 1: wide gaps route through the apex
        let wide = ConeSpec::new(1.5).unwrap();
        let d = cone_distance(CirclePoint::new(1.0, 0.0), CirclePoint::new(2.0, 2.5), wide);
        assert_eq!(d, 3.0);
    }

    #[test]
    fn apex_examples() {
        assert!(apex_extendibility(half(), 0.3, 2.9).margin() > 0.0);
        let v = apex_extendibility(ConeSpec::new(1.0).unwrap(), 0.0, PI);
        assert_eq!(v, ApexVerdict::Geodesic { flat_angle: PI });
        match apex_extendibility(half(), 0.0, PI) {
            ApexVerdict::Inextendible { flat_angle, margin } => {
                assert!((flat_angle - PI / 2.0).abs() < 1e-15);
                assert!((margin - (2.0 - 2f64.sqrt())).abs() < 1e-15);
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn corner_cut_examples() {
        let cut = corner_cut(half(), 0.0, PI, 1.0).unwrap();
        assert!((cut.saving - (2.0 - 2f64.sqrt())).abs() < 1e-12);
        let flat = ConeSpec::new(1.0).unwrap();
        for r in [0.1, 0.5, 1.0] {
            assert_eq!(corner_cut(flat, 0.0, PI, r).unwrap().saving, 0.0);
        }
        assert!(corner_cut(half(), 0.0, PI, 0.0).is_err());
        assert!(corner_cut(half(), 0.0, PI, 1.5).is_err());
        let mut prev = 0.0;
        for k in 1..=100 {
            let s = corner_cut(half(), 0.4, 2.0, k as f64 / 100.0).unwrap().saving;
            assert!(s >= prev);
            prev = s;
        }
        let margin = apex_extendibility(half(), 0.4, 2.0).margin();
        assert!((prev - margin).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn triangle_inequality(
            c in 0.05f64..2.0,
            r in proptest::array::uniform3(0.0f64..5.0),
            t in proptest::array::uniform3(0.0f64..TAU),
        ) {
            let cone = ConeSpec::new(c).unwrap();
            let p: Vec<_> = (0..3).map(|i| CirclePoint::new(r[i], t[i])).collect();
            let d01 = cone_distance(p[0], p[1], cone);
            let d12 = cone_distance(p[1], p[2], cone);
            let d02 = cone_distance(p[0], p[2], cone);
            prop_assert!(d02 <= d01 + d12 + 1e-12);
        }

        #[test]
        fn chord_beats_apex_below_unit_radius(
            c in 0.01f64..0.999,
            r1 in 1e-3f64..5.0, r2 in 1e-3f64..5.0,
            t1 in 0.0f64..TAU, t2 in 0.0f64..TAU,
        ) {
            let cone = ConeSpec::new(c).unwrap();
            let d = cone_distance(CirclePoint::new(r1, t1), CirclePoint::new(r2, t2), cone);
            prop_assert!(d < r1 + r2);
        }

        #[test]
        fn half_cone_is_plane_mod_z2(
            r1 in 0.0f64..3.0, r2 in 0.0f64..3.0,
            t1 in 0.0f64..TAU, t2 in 0.0f64..TAU,
        ) {
            let (p, q) = (CirclePoint::new(r1, t1), CirclePoint::new(r2, t2));
            let d = cone_distance(p, q, half());
            let z = z2_quotient_distance(half_cone_to_plane(p), half_cone_to_plane(q));
            prop_assert!((d - z).abs() < 1e-12);
        }
    }
}
