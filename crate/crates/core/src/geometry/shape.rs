//! Analytic regions described by signed distance functions (negative inside).

use serde::{Deserialize, Serialize};

use crate::grid::{GridDesc, LevelSet};
use crate::Vec2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// `{x : n·x ≤ offset}`; the normal need not be unit length.
    HalfPlane {
        normal: [f64; 2],
        offset: f64,
    },
    Circle {
        center: [f64; 2],
        radius: f64,
    },
    Box {
        min: [f64; 2],
        max: [f64; 2],
    },
    /// Region above `y = base + amplitude sin(2π x / period + phase)`.
    SineFloor {
        base: f64,
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
    Union {
        shapes: Vec<Shape>,
    },
    Intersection {
        shapes: Vec<Shape>,
    },
    Complement {
        shape: std::boxed::Box<Shape>,
    },
}

impl Shape {
    pub fn sdf(&self, x: Vec2) -> f64 {
        match self {
            Shape::HalfPlane { normal, offset } => {
                let n = Vec2::new(normal[0], normal[1]);
                let len = n.norm();
                (n.dot(&x) - offset) / len
            }
            Shape::Circle { center, radius } => {
                (x - Vec2::new(center[0], center[1])).norm() - radius
            }
            Shape::Box { min, max } => {
                let c = Vec2::new(0.5 * (min[0] + max[0]), 0.5 * (min[1] + max[1]));
                let h = Vec2::new(0.5 * (max[0] - min[0]), 0.5 * (max[1] - min[1]));
                let d = (x - c).abs() - h;
                let outside = d.sup(&Vec2::zeros()).norm();
                outside + d.x.max(d.y).min(0.0)
            }
            Shape::SineFloor {
                base,
                amplitude,
                period,
                phase,
            } => {
                let floor = base + amplitude * (std::f64::consts::TAU * x.x / period + phase).sin();
                floor - x.y
            }
            Shape::Union { shapes } => shapes
                .iter()
                .map(|s| s.sdf(x))
                .fold(f64::INFINITY, f64::min),
            Shape::Intersection { shapes } => shapes
                .iter()
                .map(|s| s.sdf(x))
                .fold(f64::NEG_INFINITY, f64::max),
            Shape::Complement { shape } => -shape.sdf(x),
        }
    }

    pub fn contains(&self, x: Vec2) -> bool {
        self.sdf(x) <= 0.0
    }

    /// Samples the distance function at the grid nodes.
    pub fn to_levelset(&self, grid: &GridDesc) -> LevelSet {
        LevelSet::from_fn(*grid, |x| self.sdf(x))
    }

    pub fn boxed(min: [f64; 2], max: [f64; 2]) -> Self {
        Shape::Box { min, max }
    }

    pub fn complement(self) -> Self {
        Shape::Complement {
            shape: std::boxed::Box::new(self),
        }
    }

    pub fn intersect(self, other: Shape) -> Self {
        Shape::Intersection {
            shapes: vec![self, other],
        }
    }
}
