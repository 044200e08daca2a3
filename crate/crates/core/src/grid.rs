//! Collocated grid: velocity coefficients live at cell centres, pressures and
//! level-set values at nodes. Storage is dense and row-major (`j * nx + i`).

use crate::error::{Error, Result};
use crate::spline::{pressure_stencil, velocity_stencil};
use crate::{Mat2, Vec2};

/// Uniform grid geometry. Node `(0, 0)` sits at `origin`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridDesc {
    pub cells: [usize; 2],
    pub dx: f64,
    pub origin: Vec2,
}

impl GridDesc {
    pub fn new(cells: [usize; 2], dx: f64, origin: Vec2) -> Result<Self> {
        if cells.iter().any(|&n| n < 4) {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 cells per axis, got {cells:?}"
            )));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidGrid(format!("dx must be positive, got {dx}")));
        }
        if !(origin.x.is_finite() && origin.y.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { cells, dx, origin })
    }

    /// Grid covering the box `[lo, hi]` with `pad` extra cells on every side.
    ///
    /// The origin is shifted by half a cell so the box faces run through cell
    /// interiors; level-set walls then never coincide with grid lines.
    pub fn padded(lo: Vec2, hi: Vec2, dx: f64, pad: [usize; 2]) -> Result<Self> {
        let mut cells = [0usize; 2];
        let mut origin = Vec2::zeros();
        for a in 0..2 {
            let span = ((hi[a] - lo[a]) / dx).round();
            if !(span >= 1.0) {
                return Err(Error::InvalidGrid(format!("empty extent on axis {a}")));
            }
            cells[a] = span as usize + 2 * pad[a] + 1;
            origin[a] = lo[a] - (pad[a] as f64 + 0.5) * dx;
        }
        Self::new(cells, dx, origin)
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.cells[0]
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.cells[1]
    }

    pub fn n_cells(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn node_dims(&self) -> [usize; 2] {
        [self.cells[0] + 1, self.cells[1] + 1]
    }

    pub fn n_nodes(&self) -> usize {
        (self.cells[0] + 1) * (self.cells[1] + 1)
    }

    #[inline]
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.cells[0] + i
    }

    #[inline]
    pub fn cell_coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.cells[0], idx / self.cells[0])
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.cells[0] + 1) + i
    }

    #[inline]
    pub fn node_coords(&self, idx: usize) -> (usize, usize) {
        (idx % (self.cells[0] + 1), idx / (self.cells[0] + 1))
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new(i as f64 + 0.5, j as f64 + 0.5) * self.dx
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new(i as f64, j as f64) * self.dx
    }

    /// Cells in the outermost layer have incomplete quadratic stencils.
    pub fn is_boundary_cell(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.cells[0] || j + 1 == self.cells[1]
    }

    /// Box where every quadratic stencil is complete.
    pub fn velocity_region(&self) -> (Vec2, Vec2) {
        let lo = self.origin + Vec2::repeat(self.dx);
        let hi = self.origin
            + Vec2::new(
                (self.cells[0] - 1) as f64 * self.dx,
                (self.cells[1] - 1) as f64 * self.dx,
            );
        (lo, hi)
    }

    /// Box spanned by the nodes.
    pub fn node_region(&self) -> (Vec2, Vec2) {
        let hi = self.origin
            + Vec2::new(
                self.cells[0] as f64 * self.dx,
                self.cells[1] as f64 * self.dx,
            );
        (self.origin, hi)
    }

    pub fn in_velocity_region(&self, x: Vec2) -> bool {
        let (lo, hi) = self.velocity_region();
        (0..2).all(|a| x[a] >= lo[a] && x[a] <= hi[a])
    }

    pub fn clamp_to_velocity_region(&self, x: Vec2) -> Vec2 {
        let (lo, hi) = self.velocity_region();
        Vec2::new(x.x.clamp(lo.x, hi.x), x.y.clamp(lo.y, hi.y))
    }

    pub fn clamp_to_node_region(&self, x: Vec2) -> Vec2 {
        let (lo, hi) = self.node_region();
        Vec2::new(x.x.clamp(lo.x, hi.x), x.y.clamp(lo.y, hi.y))
    }

    pub(crate) fn check_velocity_region(&self, x: Vec2) -> Result<()> {
        let (lo, hi) = self.velocity_region();
        check_box(x, lo, hi)
    }

    pub(crate) fn check_node_region(&self, x: Vec2) -> Result<()> {
        let (lo, hi) = self.node_region();
        check_box(x, lo, hi)
    }

    /// Cell containing `x`, clamped to the grid.
    pub fn cell_of(&self, x: Vec2) -> (usize, usize) {
        let f = |a: usize| {
            let t = ((x[a] - self.origin[a]) / self.dx).floor();
            (t.max(0.0) as usize).min(self.cells[a] - 1)
        };
        (f(0), f(1))
    }
}

fn check_box(x: Vec2, lo: Vec2, hi: Vec2) -> Result<()> {
    for axis in 0..2 {
        // NaN fails both comparisons
        if !(x[axis] >= lo[axis] && x[axis] <= hi[axis]) {
            return Err(Error::OutOfDomain {
                axis,
                coord: x[axis],
                lo: lo[axis],
                hi: hi[axis],
            });
        }
    }
    Ok(())
}

/// Multiquadratic B-spline velocity: `u(x) = Σ ū_i N_i(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub grid: GridDesc,
    pub coeffs: Vec<Vec2>,
}

impl VelocityField {
    pub fn zeros(grid: GridDesc) -> Self {
        Self {
            grid,
            coeffs: vec![Vec2::zeros(); grid.n_cells()],
        }
    }

    /// Coefficients set to `f` sampled at the cell centres.
    ///
    /// This reproduces `f` exactly when `f` is affine; for anything else the
    /// result is a quasi-interpolant, not an interpolant.
    pub fn from_fn(grid: GridDesc, f: impl Fn(Vec2) -> Vec2) -> Self {
        let mut coeffs = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                coeffs.push(f(grid.cell_center(i, j)));
            }
        }
        Self { grid, coeffs }
    }

    #[inline]
    pub fn coeff(&self, i: usize, j: usize) -> Vec2 {
        self.coeffs[self.grid.cell_index(i, j)]
    }

    pub fn eval(&self, x: Vec2) -> Result<Vec2> {
        let s = velocity_stencil(x, &self.grid)?;
        let mut u = Vec2::zeros();
        for (i, j, w, _) in s.iter() {
            u += self.coeff(i, j) * w;
        }
        Ok(u)
    }

    /// Velocity gradient `∂u_a/∂x_b` at `x`.
    pub fn gradient(&self, x: Vec2) -> Result<Mat2> {
        let s = velocity_stencil(x, &self.grid)?;
        let mut g = Mat2::zeros();
        for (i, j, _, dn) in s.iter() {
            g += self.coeff(i, j) * dn.transpose();
        }
        Ok(g)
    }

    /// Value and gradient in one stencil pass.
    pub fn eval_with_gradient(&self, x: Vec2) -> Result<(Vec2, Mat2)> {
        let s = velocity_stencil(x, &self.grid)?;
        let mut u = Vec2::zeros();
        let mut g = Mat2::zeros();
        for (i, j, w, dn) in s.iter() {
            let c = self.coeff(i, j);
            u += c * w;
            g += c * dn.transpose();
        }
        Ok((u, g))
    }

    pub fn eval_clamped(&self, x: Vec2) -> Vec2 {
        self.eval(self.grid.clamp_to_velocity_region(x))
            .expect("clamped position is interpolatable")
    }

    pub fn gradient_clamped(&self, x: Vec2) -> Mat2 {
        self.gradient(self.grid.clamp_to_velocity_region(x))
            .expect("clamped position is interpolatable")
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.x.is_finite() && c.y.is_finite())
    }
}

/// Scalar field on grid nodes with multilinear interpolation. Used for
/// pressures, level sets and passive dye.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalField {
    pub grid: GridDesc,
    pub values: Vec<f64>,
}

pub type PressureField = NodalField;
pub type LevelSet = NodalField;

impl NodalField {
    pub fn constant(grid: GridDesc, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_nodes()],
        }
    }

    pub fn from_fn(grid: GridDesc, f: impl Fn(Vec2) -> f64) -> Self {
        let [nx, ny] = grid.node_dims();
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(f(grid.node(i, j)));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.node_index(i, j)]
    }

    pub fn eval(&self, x: Vec2) -> Result<f64> {
        let s = pressure_stencil(x, &self.grid)?;
        Ok(s.iter().map(|(i, j, w, _)| w * self.at(i, j)).sum())
    }

    pub fn gradient(&self, x: Vec2) -> Result<Vec2> {
        let s = pressure_stencil(x, &self.grid)?;
        Ok(s.iter().map(|(i, j, _, g)| g * self.at(i, j)).sum())
    }

    pub fn eval_clamped(&self, x: Vec2) -> f64 {
        self.eval(self.grid.clamp_to_node_region(x))
            .expect("clamped position is inside the node box")
    }

    /// Average of the four corner values, i.e. the bilinear value at the centre.
    pub fn cell_center_value(&self, i: usize, j: usize) -> f64 {
        0.25 * (self.at(i, j) + self.at(i + 1, j) + self.at(i, j + 1) + self.at(i + 1, j + 1))
    }

    pub fn cell_corners(&self, i: usize, j: usize) -> [f64; 4] {
        [
            self.at(i, j),
            self.at(i + 1, j),
            self.at(i + 1, j + 1),
            self.at(i, j + 1),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
