//! Gauss rules on segments, rectangles and polygons.
//!
//! Every rule is exact for polynomials up to the requested total degree.

use crate::Vec2;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(Vec2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec2, f64)> + '_ {
        self.points
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    fn push(&mut self, x: Vec2, w: f64) {
        self.points.push(x);
        self.weights.push(w);
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` for `n` in `1..=5`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = 0.6f64.sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let r = 2.0 / 7.0 * 1.2f64.sqrt();
            let inner = (3.0 / 7.0 - r).sqrt();
            let outer = (3.0 / 7.0 + r).sqrt();
            let wi = (18.0 + 30f64.sqrt()) / 36.0;
            let wo = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-outer, -inner, inner, outer], vec![wo, wi, wi, wo])
        }
        5 => {
            let r = 2.0 * (10.0f64 / 7.0).sqrt();
            let inner = (5.0 - r).sqrt() / 3.0;
            let outer = (5.0 + r).sqrt() / 3.0;
            let wi = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
            let wo = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
            (
                vec![-outer, -inner, 0.0, inner, outer],
                vec![wo, wi, 128.0 / 225.0, wi, wo],
            )
        }
        _ => panic!("Gauss-Legendre rule with {n} points is not tabulated"),
    }
}

/// Points needed for an `n`-point Gauss rule to integrate degree `degree`.
fn points_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

/// Gauss-Legendre rule along the segment `a -> b`.
pub fn segment_quadrature(a: Vec2, b: Vec2, exact_degree: usize) -> QuadratureRule {
    let len = (b - a).norm();
    let mut rule = QuadratureRule::default();
    if len == 0.0 {
        return rule;
    }
    let (nodes, weights) = gauss_legendre(points_for_degree(exact_degree));
    for (s, w) in nodes.iter().zip(&weights) {
        rule.push(a + (b - a) * (0.5 * (s + 1.0)), 0.5 * len * w);
    }
    rule
}

/// Tensor Gauss rule on the axis-aligned rectangle `[lo, hi]`.
pub fn rect_quadrature(lo: Vec2, hi: Vec2, exact_degree: usize) -> QuadratureRule {
    let (nodes, weights) = gauss_legendre(points_for_degree(exact_degree));
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut rule = QuadratureRule::default();
    for (sy, wy) in nodes.iter().zip(&weights) {
        for (sx, wx) in nodes.iter().zip(&weights) {
            rule.push(
                mid + Vec2::new(sx * half.x, sy * half.y),
                wx * wy * half.x * half.y,
            );
        }
    }
    rule
}

fn signed_area2(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).perp(&(c - a))
}

/// Appends a rule for triangle `abc` (counterclockwise, positive area).
fn triangle_rule(rule: &mut QuadratureRule, a: Vec2, b: Vec2, c: Vec2, exact_degree: usize) {
    let area = 0.5 * signed_area2(a, b, c);
    let bary = |l1: f64, l2: f64| a * (1.0 - l1 - l2) + b * l1 + c * l2;
    match exact_degree {
        0 | 1 => rule.push((a + b + c) / 3.0, area),
        2 => {
            for (l1, l2) in [
                (1.0 / 6.0, 1.0 / 6.0),
                (2.0 / 3.0, 1.0 / 6.0),
                (1.0 / 6.0, 2.0 / 3.0),
            ] {
                rule.push(bary(l1, l2), area / 3.0);
            }
        }
        3..=5 => {
            let s15 = 15f64.sqrt();
            rule.push((a + b + c) / 3.0, 0.225 * area);
            for (p, w) in [
                ((6.0 - s15) / 21.0, (155.0 - s15) / 1200.0),
                ((6.0 + s15) / 21.0, (155.0 + s15) / 1200.0),
            ] {
                let q = 1.0 - 2.0 * p;
                for (l1, l2) in [(p, p), (q, p), (p, q)] {
                    rule.push(bary(l1, l2), w * area);
                }
            }
        }
        _ => {
            // collapsed square: x = a + s (b - a) + s t (c - b), Jacobian 2 area s
            let n = points_for_degree(exact_degree + 1);
            let (nodes, weights) = gauss_legendre(n);
            for (ss, ws) in nodes.iter().zip(&weights) {
                let s = 0.5 * (ss + 1.0);
                for (tt, wt) in nodes.iter().zip(&weights) {
                    let t = 0.5 * (tt + 1.0);
                    let x = a + (b - a) * s + (c - b) * (s * t);
                    rule.push(x, 0.25 * ws * wt * 2.0 * area * s);
                }
            }
        }
    }
}

/// Signed area of a polygon (positive when counterclockwise).
pub fn polygon_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|k| poly[k].perp(&poly[(k + 1) % n]))
        .sum::<f64>()
        * 0.5
}

/// Rule for a counterclockwise polygon that is star-shaped with respect to its
/// vertex average (convex polygons always are), built by fanning triangles
/// from that point.
///
/// Polygons with area below `1e-14` times their squared bounding-box diagonal
/// get an empty rule.
pub fn polygon_quadrature(poly: &[Vec2], exact_degree: usize) -> QuadratureRule {
    let mut rule = QuadratureRule::default();
    if poly.len() < 3 {
        return rule;
    }
    let (mut lo, mut hi) = (poly[0], poly[0]);
    for p in poly {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    if polygon_area(poly) < 1e-14 * (hi - lo).norm_squared() {
        return rule;
    }
    let centre = poly.iter().sum::<Vec2>() / poly.len() as f64;
    for k in 0..poly.len() {
        let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
        if signed_area2(centre, a, b) > 0.0 {
            triangle_rule(&mut rule, centre, a, b, exact_degree);
        }
    }
    rule
}
