//! Marching-squares clipping of a grid cell against a level set.

use crate::grid::LevelSet;
use crate::Vec2;

use super::quadrature::polygon_area;

/// Piece of the zero isocontour inside one cell. `normal` is the unit outward
/// normal of the region `φ ≤ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundarySegment {
    pub a: Vec2,
    pub b: Vec2,
    pub normal: Vec2,
}

impl BoundarySegment {
    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    pub fn midpoint(&self) -> Vec2 {
        0.5 * (self.a + self.b)
    }
}

/// Part of a cell where `φ ≤ 0`: counterclockwise convex polygons and the
/// isocontour segments bounding them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CellClip {
    pub polygons: Vec<Vec<Vec2>>,
    pub segments: Vec<BoundarySegment>,
}

impl CellClip {
    pub fn area(&self) -> f64 {
        self.polygons.iter().map(|p| polygon_area(p)).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Vertex {
    Corner(Vec2),
    /// Crossing leaving the region `φ ≤ 0` when walking counterclockwise.
    Exit(Vec2),
    /// Crossing entering the region.
    Enter(Vec2),
}

impl Vertex {
    fn pos(self) -> Vec2 {
        match self {
            Vertex::Corner(x) | Vertex::Exit(x) | Vertex::Enter(x) => x,
        }
    }
}

/// Closes a counterclockwise vertex loop into a polygon plus the segments
/// that run from an exit crossing to the following entry crossing.
fn finish(loop_: &[Vertex], out: &mut CellClip) {
    let n = loop_.len();
    let mut poly: Vec<Vec2> = Vec::with_capacity(n);
    for v in loop_ {
        let x = v.pos();
        if poly.last() != Some(&x) {
            poly.push(x);
        }
    }
    while poly.len() > 1 && poly.first() == poly.last() {
        poly.pop();
    }
    if poly.len() < 3 || polygon_area(&poly) <= 0.0 {
        return;
    }
    for k in 0..n {
        if let (Vertex::Exit(a), Vertex::Enter(b)) = (loop_[k], loop_[(k + 1) % n]) {
            let d = b - a;
            let len = d.norm();
            if len > 0.0 {
                out.segments.push(BoundarySegment {
                    a,
                    b,
                    normal: Vec2::new(d.y, -d.x) / len,
                });
            }
        }
    }
    out.polygons.push(poly);
}

/// Clips the square with counterclockwise `corners` and corner values `phi`.
///
/// Crossings are placed by linear interpolation along the edges. When the
/// signs alternate around the square the bilinear centre value decides
/// whether the two inside corners are connected (centre `≤ 0`) or separate.
pub fn clip_square(corners: [Vec2; 4], phi: [f64; 4]) -> CellClip {
    let inside = phi.map(|p| p <= 0.0);
    let mut walk = Vec::with_capacity(8);
    for k in 0..4 {
        let l = (k + 1) % 4;
        if inside[k] {
            walk.push(Vertex::Corner(corners[k]));
        }
        if inside[k] != inside[l] {
            let t = phi[k] / (phi[k] - phi[l]);
            let x = corners[k] + (corners[l] - corners[k]) * t;
            walk.push(if inside[k] {
                Vertex::Exit(x)
            } else {
                Vertex::Enter(x)
            });
        }
    }
    let mut out = CellClip::default();
    let saddle = inside[0] == inside[2] && inside[1] == inside[3] && inside[0] != inside[1];
    let centre = phi.iter().sum::<f64>() * 0.25;
    if saddle && centre > 0.0 {
        // two separate corner triangles: split the walk after each entry
        let start = walk
            .iter()
            .position(|v| matches!(v, Vertex::Corner(_)))
            .unwrap();
        walk.rotate_left(start);
        // walk is [corner, exit, enter, corner, exit, enter]
        let first = [walk[5], walk[0], walk[1]];
        let second = [walk[2], walk[3], walk[4]];
        for tri in [first, second] {
            // each triangle: enter, corner, exit; close with exit -> enter
            finish(&[tri[0], tri[1], tri[2]], &mut out);
        }
    } else if !walk.is_empty() {
        finish(&walk, &mut out);
    }
    out
}

/// Clips grid cell `(i, j)` against `phi`.
pub fn clip_cell(phi: &LevelSet, i: usize, j: usize) -> CellClip {
    let g = &phi.grid;
    let corners = [
        g.node(i, j),
        g.node(i + 1, j),
        g.node(i + 1, j + 1),
        g.node(i, j + 1),
    ];
    clip_square(corners, phi.cell_corners(i, j))
}
