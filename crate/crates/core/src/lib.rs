//! Two-dimensional incompressible flow on a collocated B-spline grid.
//!
//! Velocity is a multiquadratic B-spline with coefficients at cell centres,
//! pressure is multilinear with values at nodes. A time step advects velocity
//! by solving the backward semi-Lagrangian relation `w = u(x - dt w)` per cell
//! centre with Newton's method, optionally blends in particle velocities, and
//! then projects onto the discretely divergence-free space with a cut-cell
//! variational pressure solve.

pub mod advect;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod narrowband;
pub mod particles;
pub mod projection;
pub mod sim;
pub mod spline;

pub use error::{Error, Result};
pub use grid::{GridDesc, LevelSet, NodalField, PressureField, VelocityField};

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;
