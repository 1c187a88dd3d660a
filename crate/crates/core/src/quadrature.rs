//! Segment quadrature shared by JM lengths, action integrals and zero-energy timing.
//!
//! A piecewise-linear path is split into pieces that touch a pole at most at one end.
//! Regular pieces use Gauss-Legendre nodes directly; a piece ending at a pole is
//! integrated in the variable `u` with geometric fraction `w = u^p` (measured from the
//! pole), `p = 2 / (2 - alpha)`, which absorbs the `w^(-alpha/2)` singularity of the
//! length integrand exactly for a homogeneous pole.

use crate::potentials::Potential;

/// 8-point Gauss-Legendre nodes and weights on `[0, 1]`.
const GL_NODES: [f64; 8] = [
    0.019855071751231856,
    0.10166676129318664,
    0.2372337950418355,
    0.4082826787521751,
    0.5917173212478249,
    0.7627662049581645,
    0.8983332387068134,
    0.9801449282487681,
];
const GL_WEIGHTS: [f64; 8] = [
    0.05061426814518813,
    0.11119051722668724,
    0.15685332293894363,
    0.18134189168918100,
    0.18134189168918100,
    0.15685332293894363,
    0.11119051722668724,
    0.05061426814518813,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PoleEnd {
    None,
    Start,
    End,
}

/// A sub-segment of a path segment, as fractions `[f0, f1]` of the parent.
#[derive(Debug, Clone)]
pub(crate) struct Piece {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub f0: f64,
    pub f1: f64,
    pub pole: PoleEnd,
}

/// Split `[a, b]` so that every piece touches a pole at most at one endpoint.
///
/// Returns `None` when the segment runs along the collision set (the midpoint of a
/// pole-to-pole piece is itself a pole), in which case every length through it is infinite.
pub(crate) fn split_at_poles<P: Potential + ?Sized>(
    pot: &P,
    a: &[f64],
    b: &[f64],
) -> Option<Vec<Piece>> {
    let mut cuts = vec![0.0];
    cuts.extend(pot.segment_pole_crossings(a, b));
    cuts.push(1.0);
    let lerp = |t: f64| -> Vec<f64> {
        if t == 0.0 {
            a.to_vec()
        } else if t == 1.0 {
            b.to_vec()
        } else {
            a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
        }
    };
    let mut pieces = Vec::new();
    for w in cuts.windows(2) {
        let (f0, f1) = (w[0], w[1]);
        let pa = lerp(f0);
        let pb = lerp(f1);
        let start_pole = f0 > 0.0 || pot.value(&pa).is_pole();
        let end_pole = f1 < 1.0 || pot.value(&pb).is_pole();
        match (start_pole, end_pole) {
            (false, false) => pieces.push(Piece { a: pa, b: pb, f0, f1, pole: PoleEnd::None }),
            (true, false) => pieces.push(Piece { a: pa, b: pb, f0, f1, pole: PoleEnd::Start }),
            (false, true) => pieces.push(Piece { a: pa, b: pb, f0, f1, pole: PoleEnd::End }),
            (true, true) => {
                if pa == pb {
                    continue;
                }
                let fm = 0.5 * (f0 + f1);
                let mid: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| 0.5 * (x + y)).collect();
                if pot.value(&mid).is_pole() {
                    return None;
                }
                pieces.push(Piece { a: pa, b: mid.clone(), f0, f1: fm, pole: PoleEnd::Start });
                pieces.push(Piece { a: mid, b: pb, f0: fm, f1, pole: PoleEnd::End });
            }
        }
    }
    Some(pieces)
}

/// One quadrature node on a piece: the point, the fraction `s` of the piece measured
/// from `a`, and the weight for `ds`.
pub(crate) struct Node {
    pub point: Vec<f64>,
    pub weight: f64,
    /// `u` variable of the substitution (equal to the Gauss node on pole-adjacent pieces).
    pub u: f64,
    /// Gauss-Legendre weight in `u` (before substitution Jacobians).
    pub gauss_weight: f64,
}

/// Exponent of the length-regularizing substitution near a pole.
pub(crate) fn pole_exponent(alpha: f64) -> f64 {
    2.0 / (2.0 - alpha)
}

pub(crate) fn nodes(piece: &Piece, alpha: f64) -> Vec<Node> {
    let at = |s: f64| -> Vec<f64> { piece.a.iter().zip(&piece.b).map(|(x, y)| x + s * (y - x)).collect() };
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .map(|(&u, gw)| match piece.pole {
            PoleEnd::None => Node { point: at(u), weight: gw, u, gauss_weight: gw },
            PoleEnd::Start | PoleEnd::End => {
                let p = pole_exponent(alpha);
                let w = u.powf(p);
                let jac = p * u.powf(p - 1.0);
                let s = if piece.pole == PoleEnd::Start { w } else { 1.0 - w };
                Node { point: at(s), weight: gw * jac, u, gauss_weight: gw }
            }
        })
        .collect()
}
