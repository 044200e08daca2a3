//! Grid-refinement study on the two-dimensional Burgers equation.
//!
//! The initial field is `u0(x) = (xᵀ A x) (1, 1)` on the unit square with
//! `A = R diag(1, 1/4) Rᵀ` and `R` a rotation by 0.1 rad. Its exact solution
//! `u(x, t) = u0(x - t u(x, t))` is evaluated pointwise by Newton's method on
//! the analytic `u0`, and also supplies the boundary values.

use rayon::prelude::*;
use serde::Serialize;

use crate::advect::{advect_field, AdvectionParams, Scheme, VelocityBoundary};
use crate::error::{Error, Result};
use crate::grid::{GridDesc, VelocityField};
use crate::{Mat2, Vec2};

/// Exact Burgers solution for the quadratic initial field.
#[derive(Clone, Copy, Debug)]
pub struct QuadraticBurgers {
    pub a: Mat2,
}

impl Default for QuadraticBurgers {
    fn default() -> Self {
        let (s, c) = 0.1f64.sin_cos();
        let r = Mat2::new(c, -s, s, c);
        let lambda = Mat2::new(1.0, 0.0, 0.0, 0.25);
        Self {
            a: r * lambda * r.transpose(),
        }
    }
}

impl QuadraticBurgers {
    pub fn initial(&self, x: Vec2) -> Vec2 {
        Vec2::repeat(x.dot(&(self.a * x)))
    }

    fn initial_gradient(&self, x: Vec2) -> Mat2 {
        let g = 2.0 * self.a * x;
        Vec2::repeat(1.0) * g.transpose()
    }

    /// B-spline coefficients reproducing the initial field exactly: sampling
    /// a quadratic through the `(1/8, 3/4, 1/8)` stencil adds `dx²/8 Δu`.
    pub fn initial_coefficients(&self, grid: GridDesc) -> VelocityField {
        let lap = 2.0 * self.a.trace();
        let shift = Vec2::repeat(grid.dx * grid.dx / 8.0 * lap);
        VelocityField::from_fn(grid, |x| self.initial(x) - shift)
    }

    /// Solves `w = u0(x - t w)` by Newton's method from `w = u0(x)`.
    pub fn exact(&self, x: Vec2, t: f64) -> Vec2 {
        let mut w = self.initial(x);
        for _ in 0..50 {
            let foot = x - t * w;
            let r = self.initial(foot) - w;
            if r.norm() <= 1e-15 * (1.0 + w.norm()) {
                break;
            }
            let jac = Mat2::identity() + t * self.initial_gradient(foot);
            w += jac.lu().solve(&r).expect("no shock before the final time");
        }
        w
    }
}

impl VelocityBoundary for QuadraticBurgers {
    fn velocity(&self, x: Vec2, t: f64) -> Option<Vec2> {
        Some(self.exact(x, t))
    }
}

/// Final-time error of one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelRun {
    pub dx: f64,
    pub steps: usize,
    /// Max over interior cell centres of `|u_h - u|`.
    pub error: f64,
    pub mean_newton_iters: f64,
    pub fallback_fraction: f64,
}

/// Advances the quadratic field on an `n × n` grid of the unit square with
/// `dt = dx` up to `end_time` and measures the error.
pub fn run_level(
    problem: &QuadraticBurgers,
    n: usize,
    end_time: f64,
    params: &AdvectionParams,
) -> Result<LevelRun> {
    let dx = 1.0 / n as f64;
    let grid = GridDesc::new([n, n], dx, Vec2::zeros())?;
    let steps = (end_time / dx).round() as usize;
    if steps == 0 {
        return Err(Error::Validation(format!(
            "end_time {end_time} is shorter than one step at dx {dx}"
        )));
    }
    let dt = end_time / steps as f64;
    let mut u = problem.initial_coefficients(grid);
    let (mut iters, mut falls) = (0.0, 0.0);
    for s in 0..steps {
        let (next, report) = advect_field(&u, dt, s as f64 * dt, params, problem)?;
        let (m, f) = report.newton_stats(&grid, None);
        iters += m;
        falls += f;
        u = next;
    }
    let error = (0..grid.n_cells())
        .into_par_iter()
        .filter_map(|c| {
            let (i, j) = grid.cell_coords(c);
            if grid.is_boundary_cell(i, j) {
                return None;
            }
            let x = grid.cell_center(i, j);
            Some((u.eval(x).expect("interior") - problem.exact(x, end_time)).norm())
        })
        .reduce(|| 0.0, f64::max);
    Ok(LevelRun {
        dx,
        steps,
        error,
        mean_newton_iters: iters / steps as f64,
        fallback_fraction: falls / steps as f64,
    })
}

/// One row of `errors.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorRow {
    pub dx: f64,
    pub error_sl: f64,
    pub error_bslqb_l1: f64,
    pub error_bslqb_lc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ErrorRow>,
    pub slope_sl: f64,
    pub slope_bslqb_l1: f64,
    pub slope_bslqb_lc: f64,
}

/// Runs explicit semi-Lagrangian, BSLQB with `λ = 1` and BSLQB with
/// `λ = 1 - c dx` on every level.
pub fn convergence_study(
    levels: &[usize],
    end_time: f64,
    lambda_c: f64,
    base: &AdvectionParams,
) -> Result<ConvergenceStudy> {
    let problem = QuadraticBurgers::default();
    let mut rows = Vec::with_capacity(levels.len());
    for &n in levels {
        let dx = 1.0 / n as f64;
        let run = |scheme, lambda| {
            let params = AdvectionParams {
                scheme,
                lambda,
                ..*base
            };
            run_level(&problem, n, end_time, &params).map(|r| r.error)
        };
        rows.push(ErrorRow {
            dx,
            error_sl: run(Scheme::ExplicitSl, 1.0)?,
            error_bslqb_l1: run(Scheme::Bslqb, 1.0)?,
            error_bslqb_lc: run(Scheme::Bslqb, 1.0 - lambda_c * dx)?,
        });
    }
    let dxs: Vec<f64> = rows.iter().map(|r| r.dx).collect();
    let slope = |f: fn(&ErrorRow) -> f64| {
        let e: Vec<f64> = rows.iter().map(f).collect();
        fit_slope(&dxs, &e).map(|(s, _)| s)
    };
    Ok(ConvergenceStudy {
        slope_sl: slope(|r| r.error_sl)?,
        slope_bslqb_l1: slope(|r| r.error_bslqb_l1)?,
        slope_bslqb_lc: slope(|r| r.error_bslqb_lc)?,
        rows,
    })
}

/// Least-squares line through `(log x, log y)`; returns slope and intercept.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Validation(
            "slope fit needs at least two paired points".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Validation(
            "slope fit needs positive finite values".into(),
        ));
    }
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}
