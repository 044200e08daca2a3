//! Velocity self-advection.
//!
//! The backward scheme solves `w = u(x_i - dt w)` at every cell centre with
//! Newton's method, seeded by the explicit semi-Lagrangian value
//! `u(x_i - dt u(x_i))`. The resulting point values are turned back into
//! B-spline coefficients by a blended interpolation solve.

use rayon::prelude::*;

use crate::error::Result;
use crate::grid::{GridDesc, NodalField, VelocityField};
use crate::linalg::{pcg, CgParams, CgReport, SparseMatrix};
use crate::{Mat2, Vec2};

/// Determinants below this make the Newton step unusable.
const SINGULAR_DET: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Classical explicit semi-Lagrangian: one interpolation at the upwind point.
    ExplicitSl,
    /// Backward semi-Lagrangian with quadratic B-splines and Newton solves.
    Bslqb,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdvectionParams {
    pub scheme: Scheme,
    /// Blend between interpolation (1) and plain sampling (0) when recovering
    /// coefficients from point values.
    pub lambda: f64,
    /// Newton residual tolerance in units of `dx / dt`.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub cg_tol: f64,
    pub max_cg_iters: usize,
}

impl Default for AdvectionParams {
    fn default() -> Self {
        Self {
            scheme: Scheme::Bslqb,
            lambda: 1.0,
            newton_tol: 1e-10,
            max_newton_iters: 20,
            cg_tol: 1e-12,
            max_cg_iters: 500,
        }
    }
}

/// Velocity prescribed outside the interpolatable region.
pub trait VelocityBoundary: Sync {
    /// Velocity at `x` and time `t`, or `None` to extrapolate by clamping the
    /// evaluation point into the grid.
    fn velocity(&self, x: Vec2, t: f64) -> Option<Vec2>;
}

/// Extrapolates everywhere by clamping.
#[derive(Clone, Copy, Debug, Default)]
pub struct ClampBoundary;

impl VelocityBoundary for ClampBoundary {
    fn velocity(&self, _x: Vec2, _t: f64) -> Option<Vec2> {
        None
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NodeSolveReport {
    /// Residual evaluations performed.
    pub iterations: usize,
    pub converged: bool,
    /// The explicit value (with boundary interpolation) was returned.
    pub used_fallback: bool,
}

/// Velocity at `x` at time `t`: interpolated inside the grid, taken from the
/// boundary model outside it.
fn sample(u: &VelocityField, x: Vec2, bc: &dyn VelocityBoundary, t: f64) -> Vec2 {
    if u.grid.in_velocity_region(x) {
        u.eval(x).expect("point inside the region")
    } else {
        bc.velocity(x, t).unwrap_or_else(|| u.eval_clamped(x))
    }
}

/// `u(x_i - dt u(x_i))` at time `t`; the flag reports an upwind point outside
/// the interpolatable region.
pub fn explicit_sl_node(
    u: &VelocityField,
    x_i: Vec2,
    dt: f64,
    bc: &dyn VelocityBoundary,
    t: f64,
) -> (Vec2, bool) {
    let foot = x_i - dt * sample(u, x_i, bc, t);
    let off_grid = !u.grid.in_velocity_region(foot);
    (sample(u, foot, bc, t), off_grid)
}

/// Newton solve of `w = u(x_i - dt w)`, falling back to the explicit value when
/// the Jacobian is singular, the iteration stalls, or the upwind point leaves
/// the grid.
pub fn bslqb_node_solve(
    u: &VelocityField,
    x_i: Vec2,
    dt: f64,
    params: &AdvectionParams,
    bc: &dyn VelocityBoundary,
    t: f64,
) -> (Vec2, NodeSolveReport) {
    let (w0, off_grid) = explicit_sl_node(u, x_i, dt, bc, t);
    let fallback = |iterations| {
        (
            w0,
            NodeSolveReport {
                iterations,
                converged: false,
                used_fallback: true,
            },
        )
    };
    if off_grid {
        return fallback(0);
    }
    if dt == 0.0 {
        return (
            w0,
            NodeSolveReport {
                iterations: 1,
                converged: true,
                used_fallback: false,
            },
        );
    }
    let tol = params.newton_tol * u.grid.dx / dt;
    let mut w = w0;
    for k in 1..=params.max_newton_iters {
        let foot = x_i - dt * w;
        let Ok((uf, grad)) = u.eval_with_gradient(foot) else {
            return fallback(k - 1);
        };
        let r = uf - w;
        if r.norm() <= tol {
            return (
                w,
                NodeSolveReport {
                    iterations: k,
                    converged: true,
                    used_fallback: false,
                },
            );
        }
        if k == params.max_newton_iters {
            break;
        }
        let jac = Mat2::identity() + dt * grad;
        if jac.determinant().abs() < SINGULAR_DET {
            return fallback(k);
        }
        let step = jac.lu().solve(&r).expect("nonsingular 2x2");
        w += step;
    }
    fallback(params.max_newton_iters)
}

/// Per-axis weights of the quadratic basis at neighbouring cell centres.
const CENTRE_WEIGHTS: [f64; 3] = [0.125, 0.75, 0.125];

/// Rows of `λ N_j(x_i) + (1 - λ) δ_ij` for every interior cell `i`, over all
/// cells `j`. Rows are indexed by interior-cell order, columns by cell index.
pub fn recovery_rows(grid: &GridDesc, lambda: f64) -> SparseMatrix {
    let [nx, ny] = grid.cells;
    let interior = (nx - 2) * (ny - 2);
    let mut t = Vec::with_capacity(interior * 9);
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let row = (j - 1) * (nx - 2) + (i - 1);
            for (b, wy) in CENTRE_WEIGHTS.iter().enumerate() {
                for (a, wx) in CENTRE_WEIGHTS.iter().enumerate() {
                    let mut v = lambda * wx * wy;
                    if a == 1 && b == 1 {
                        v += 1.0 - lambda;
                    }
                    t.push((row, grid.cell_index(i + a - 1, j + b - 1), v));
                }
            }
        }
    }
    SparseMatrix::from_triplets(interior, grid.n_cells(), t)
}

/// Recovers coefficients `w̄` from point values `w(x_i)` at the cell centres.
///
/// Cells in the outermost layer keep their point value; the remaining
/// coefficients solve the blended interpolation system with those values
/// moved to the right-hand side. Returns the CG reports for both components.
pub fn recover_coefficients(
    grid: &GridDesc,
    nodal: &[Vec2],
    params: &AdvectionParams,
) -> Result<(VelocityField, [CgReport; 2])> {
    assert_eq!(nodal.len(), grid.n_cells());
    let mut out = VelocityField {
        grid: *grid,
        coeffs: nodal.to_vec(),
    };
    let zero = CgReport {
        iterations: 0,
        residual: 0.0,
    };
    if params.lambda == 0.0 {
        return Ok((out, [zero, zero]));
    }
    let [nx, ny] = grid.cells;
    let rows = recovery_rows(grid, params.lambda);
    // split into the square interior block and the boundary coupling
    let interior_of = |c: usize| {
        let (i, j) = grid.cell_coords(c);
        (!grid.is_boundary_cell(i, j)).then(|| (j - 1) * (nx - 2) + (i - 1))
    };
    let n = rows.rows();
    let mut block = Vec::with_capacity(rows.nnz());
    let mut rhs = [vec![0.0; n], vec![0.0; n]];
    let mut row_cells = Vec::with_capacity(n);
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            row_cells.push(grid.cell_index(i, j));
        }
    }
    for r in 0..n {
        let w = nodal[row_cells[r]];
        rhs[0][r] = w.x;
        rhs[1][r] = w.y;
        for (c, v) in rows.row(r) {
            match interior_of(c) {
                Some(k) => block.push((r, k, v)),
                None => {
                    rhs[0][r] -= v * nodal[c].x;
                    rhs[1][r] -= v * nodal[c].y;
                }
            }
        }
    }
    let a = SparseMatrix::from_triplets(n, n, block);
    let diag = a.diagonal();
    let cg = CgParams {
        tol: params.cg_tol,
        abs_tol: 0.0,
        max_iters: params.max_cg_iters,
    };
    let mut reports = [zero, zero];
    for axis in 0..2 {
        let mut x: Vec<f64> = row_cells.iter().map(|&c| nodal[c][axis]).collect();
        reports[axis] = pcg(&a, &rhs[axis], &mut x, &diag, cg, None)?;
        for (r, &c) in row_cells.iter().enumerate() {
            out.coeffs[c][axis] = x[r];
        }
    }
    Ok((out, reports))
}

#[derive(Clone, Debug, Default)]
pub struct AdvectionReport {
    /// One entry per cell; outermost-layer cells are left at the default.
    pub nodes: Vec<NodeSolveReport>,
    pub cg: Option<[CgReport; 2]>,
}

impl AdvectionReport {
    /// Mean Newton iterations and fallback fraction over interior cells
    /// selected by `mask` (all interior cells when `None`).
    pub fn newton_stats(&self, grid: &GridDesc, mask: Option<&[bool]>) -> (f64, f64) {
        let mut count = 0usize;
        let mut iters = 0usize;
        let mut fallbacks = 0usize;
        for (c, rep) in self.nodes.iter().enumerate() {
            let (i, j) = grid.cell_coords(c);
            if grid.is_boundary_cell(i, j) || mask.is_some_and(|m| !m[c]) {
                continue;
            }
            count += 1;
            iters += rep.iterations;
            fallbacks += rep.used_fallback as usize;
        }
        if count == 0 {
            return (0.0, 0.0);
        }
        (iters as f64 / count as f64, fallbacks as f64 / count as f64)
    }
}

/// Point values of the advected velocity at every cell centre.
///
/// Outermost-layer cells take the boundary velocity at `t + dt` when the
/// boundary model provides one, otherwise the explicit value.
pub fn advect_nodes(
    u: &VelocityField,
    dt: f64,
    t: f64,
    params: &AdvectionParams,
    bc: &dyn VelocityBoundary,
) -> (Vec<Vec2>, Vec<NodeSolveReport>) {
    let grid = u.grid;
    (0..grid.n_cells())
        .into_par_iter()
        .map(|c| {
            let (i, j) = grid.cell_coords(c);
            let x = grid.cell_center(i, j);
            if grid.is_boundary_cell(i, j) {
                let w = bc
                    .velocity(x, t + dt)
                    .unwrap_or_else(|| explicit_sl_node(u, x, dt, bc, t).0);
                return (w, NodeSolveReport::default());
            }
            match params.scheme {
                Scheme::Bslqb => bslqb_node_solve(u, x, dt, params, bc, t),
                Scheme::ExplicitSl => {
                    let (w, off_grid) = explicit_sl_node(u, x, dt, bc, t);
                    let rep = NodeSolveReport {
                        iterations: 0,
                        converged: true,
                        used_fallback: off_grid,
                    };
                    (w, rep)
                }
            }
        })
        .unzip()
}

/// Advects `u` by itself over `[t, t + dt]` and recovers the coefficients.
pub fn advect_field(
    u: &VelocityField,
    dt: f64,
    t: f64,
    params: &AdvectionParams,
    bc: &dyn VelocityBoundary,
) -> Result<(VelocityField, AdvectionReport)> {
    let (nodal, nodes) = advect_nodes(u, dt, t, params, bc);
    let (field, cg) = recover_coefficients(&u.grid, &nodal, params)?;
    let cg = (params.lambda != 0.0).then_some(cg);
    Ok((field, AdvectionReport { nodes, cg }))
}

/// Velocity at every grid node, clamped into the interpolatable region.
pub fn nodal_velocities(u: &VelocityField) -> Vec<Vec2> {
    let grid = u.grid;
    let [nx, ny] = grid.node_dims();
    (0..nx * ny)
        .into_par_iter()
        .map(|k| u.eval_clamped(grid.node(k % nx, k / nx)))
        .collect()
}

/// `φ^{n+1}(x_i) = φ^n(x_i - dt w_i)` with multilinear interpolation, clamped
/// at the grid edge.
pub fn advect_levelset(phi: &NodalField, w: &[Vec2], dt: f64) -> NodalField {
    let grid = phi.grid;
    assert_eq!(w.len(), grid.n_nodes());
    let [nx, _] = grid.node_dims();
    let values = (0..grid.n_nodes())
        .into_par_iter()
        .map(|k| phi.eval_clamped(grid.node(k % nx, k / nx) - dt * w[k]))
        .collect();
    NodalField { grid, values }
}
