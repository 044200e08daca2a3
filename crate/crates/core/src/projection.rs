//! Variational pressure projection on a cut-cell domain.
//!
//! Unknowns are the active velocity coefficients `U`, nodal pressures `P` and
//! boundary multipliers `Λ` on nodes of cells crossed by the solid boundary.
//! With `G = [-Dᵀ, Bᵀ]` and the lumped mass `M`, the pressures solve
//! `Gᵀ M⁻¹ G [P; Λ] = Gᵀ (W + M⁻¹ ĝ) - [0; A]` and the velocity is corrected
//! as `U = W + M⁻¹ ĝ - M⁻¹ G [P; Λ]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{segment_quadrature, CutCellDomain, QuadratureRule};
use crate::grid::{GridDesc, PressureField, VelocityField};
use std::sync::{Arc, OnceLock};

use crate::linalg::{
    norm_inf, pcg_with, project_out, CgParams, CgReport, Jacobi, Preconditioner, ShiftedCholesky,
    SparseMatrix,
};
use crate::spline::{pressure_stencil, velocity_stencil};
use crate::Vec2;

/// Degree for volume integrals: pressure basis times velocity-basis gradient.
const VOLUME_DEGREE: usize = 5;
/// Degree for boundary integrals: pressure basis times velocity basis along a line.
const BOUNDARY_DEGREE: usize = 6;
/// Coefficients with `∫_Ω N_i` below this fraction of a cell area are dropped.
/// A coefficient diagonal to a full fluid cell overlaps it by `dx²/2304`, so
/// only slivers of cut cells fall under it; keeping them would let roundoff
/// in the pressure reach their velocities through a near-zero mass. Larger
/// thresholds drop coefficients that carry boundary flux and break the
/// consistency of uniform streams.
const ACTIVE_FRACTION: f64 = 1e-6;
/// Relative diagonal shift of the Cholesky preconditioner.
const CHOLESKY_SHIFT: f64 = 1e-10;
/// Correction solves per projection before giving up.
const MAX_REFINEMENTS: usize = 8;
/// Inner solves never ask for more than this relative reduction.
const INNER_TOL_FLOOR: f64 = 1e-12;

/// Prescribed normal velocity `a(x, n)` on the solid boundary.
pub trait NormalSpeed: Sync {
    fn normal_speed(&self, x: Vec2, n: Vec2) -> f64;
}

impl<F: Fn(Vec2, Vec2) -> f64 + Sync> NormalSpeed for F {
    fn normal_speed(&self, x: Vec2, n: Vec2) -> f64 {
        self(x, n)
    }
}

/// Solid walls at rest.
pub fn no_flux(_x: Vec2, _n: Vec2) -> f64 {
    0.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioning {
    Jacobi,
    /// Sparse Cholesky factor of the slightly shifted Schur operator, computed
    /// once per fluid mask.
    #[default]
    Cholesky,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverParams {
    /// Relative tolerance of the Schur solve.
    pub tol: f64,
    /// Iteration cap; `None` means ten times the number of unknowns.
    pub max_iters: Option<usize>,
    pub preconditioner: Preconditioning,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: None,
            preconditioner: Preconditioning::default(),
        }
    }
}

/// Assembled, time-step independent parts of the projection.
#[derive(Clone, Debug)]
pub struct ProjectionSystem {
    pub grid: GridDesc,
    pub rho: f64,
    /// Cell index of each active velocity coefficient.
    pub vel_cells: Vec<usize>,
    /// Active velocity number of each cell.
    pub vel_index: Vec<Option<usize>>,
    /// Node index of each pressure unknown.
    pub p_nodes: Vec<usize>,
    /// Node index of each boundary multiplier.
    pub l_nodes: Vec<usize>,
    /// `ρ ∫_Ω N_i` per active coefficient; the lumped mass is this over `dt`.
    pub mass: Vec<f64>,
    /// `∫_Ω ρ g N_i`, interleaved by component.
    pub g_hat: Vec<f64>,
    /// `Gᵀ`: rows are `-D` then `B`, columns are interleaved velocity components.
    pub gt: SparseMatrix,
    /// `∫_{∂Ω_D} a χ_b` per multiplier.
    pub a: Vec<f64>,
    /// `Gᵀ diag(1 / (ρ ∫N)) G`; the Schur operator is this times `dt`.
    schur_unit: SparseMatrix,
    /// `[1; 1]` when constant pressures and multipliers are in the null space.
    null_vector: Option<Vec<f64>>,
    factor: OnceLock<Arc<ShiftedCholesky>>,
}

#[derive(Clone, Debug)]
pub struct ProjectionSolution {
    pub pressure: Vec<f64>,
    pub lambda: Vec<f64>,
    pub velocity: VelocityField,
    pub iterations: usize,
    pub residual: f64,
    /// `‖D W‖∞` before and `‖D U‖∞` after the correction.
    pub divergence_before: f64,
    pub divergence_after: f64,
}

struct CellIntegrals {
    rule: QuadratureRule,
    segments: Vec<(QuadratureRule, Vec2)>,
}

fn index_map(len: usize, items: &[usize]) -> Vec<Option<usize>> {
    let mut map = vec![None; len];
    for (k, &i) in items.iter().enumerate() {
        map[i] = Some(k);
    }
    map
}

impl ProjectionSystem {
    /// Assembles the projection operators over `domain` for density `rho`,
    /// gravity `gravity` and boundary normal speed `speed`.
    pub fn assemble(
        domain: &CutCellDomain,
        rho: f64,
        gravity: Vec2,
        speed: &dyn NormalSpeed,
    ) -> Result<Self> {
        let grid = domain.grid;
        let fluid: Vec<usize> = domain.fluid_cells().collect();
        if fluid.is_empty() {
            return Err(Error::EmptyDomain);
        }
        let integrals: Vec<CellIntegrals> = fluid
            .par_iter()
            .map(|&c| CellIntegrals {
                rule: domain.volume_rule(c, VOLUME_DEGREE),
                segments: domain
                    .segments(c)
                    .iter()
                    .map(|s| (segment_quadrature(s.a, s.b, BOUNDARY_DEGREE), s.normal))
                    .collect(),
            })
            .collect();

        // pass 1: basis integrals decide the active sets
        let mut int_n = vec![0.0; grid.n_cells()];
        let mut node_used = vec![false; grid.n_nodes()];
        let mut node_on_wall = vec![false; grid.n_nodes()];
        for (ci, &c) in fluid.iter().enumerate() {
            let (i, j) = grid.cell_coords(c);
            for (x, w) in integrals[ci].rule.iter() {
                let s = velocity_stencil(x, &grid)?;
                for (a, b, n, _) in s.iter() {
                    int_n[grid.cell_index(a, b)] += w * n;
                }
            }
            for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let node = grid.node_index(i + di, j + dj);
                node_used[node] = true;
                if !integrals[ci].segments.is_empty() {
                    node_on_wall[node] = true;
                }
            }
        }
        let min_int = ACTIVE_FRACTION * grid.dx * grid.dx;
        let vel_cells: Vec<usize> = (0..grid.n_cells())
            .filter(|&c| int_n[c] > min_int)
            .collect();
        let vel_index = index_map(grid.n_cells(), &vel_cells);
        let p_nodes: Vec<usize> = (0..grid.n_nodes()).filter(|&n| node_used[n]).collect();
        let p_index = index_map(grid.n_nodes(), &p_nodes);
        let wall_nodes: Vec<usize> = (0..grid.n_nodes()).filter(|&n| node_on_wall[n]).collect();
        let wall_index = index_map(grid.n_nodes(), &wall_nodes);
        let nv = vel_cells.len();
        let np = p_nodes.len();

        // pass 2: divergence, boundary and load terms
        let mut g_hat = vec![0.0; 2 * nv];
        let mut d_trip = Vec::new();
        let mut b_trip = Vec::new();
        let mut a_wall = vec![0.0; wall_nodes.len()];
        for cell in &integrals {
            for (x, w) in cell.rule.iter() {
                let vs = velocity_stencil(x, &grid)?;
                let ps = pressure_stencil(x, &grid)?;
                for (a, b, n, dn) in vs.iter() {
                    let Some(k) = vel_index[grid.cell_index(a, b)] else {
                        continue;
                    };
                    g_hat[2 * k] += w * rho * gravity.x * n;
                    g_hat[2 * k + 1] += w * rho * gravity.y * n;
                    for (pa, pb, chi, _) in ps.iter() {
                        if chi == 0.0 {
                            continue;
                        }
                        let row = p_index[grid.node_index(pa, pb)].expect("corner of a fluid cell");
                        // rows of Gᵀ hold -D
                        d_trip.push((row, 2 * k, -w * chi * dn.x));
                        d_trip.push((row, 2 * k + 1, -w * chi * dn.y));
                    }
                }
            }
            for (rule, normal) in &cell.segments {
                for (x, w) in rule.iter() {
                    let vs = velocity_stencil(x, &grid)?;
                    let ps = pressure_stencil(x, &grid)?;
                    let a_x = speed.normal_speed(x, *normal);
                    for (pa, pb, chi, _) in ps.iter() {
                        if chi == 0.0 {
                            continue;
                        }
                        let bi = wall_index[grid.node_index(pa, pb)].expect("corner of a cut cell");
                        a_wall[bi] += w * a_x * chi;
                        for (a, b, n, _) in vs.iter() {
                            let Some(k) = vel_index[grid.cell_index(a, b)] else {
                                continue;
                            };
                            b_trip.push((bi, 2 * k, w * chi * n * normal.x));
                            b_trip.push((bi, 2 * k + 1, w * chi * n * normal.y));
                        }
                    }
                }
            }
        }

        // multipliers whose trace vanishes on the boundary carry no equation
        let b_full = SparseMatrix::from_triplets(wall_nodes.len(), 2 * nv, b_trip);
        let b_scale = grid.dx * 1e-12;
        let keep: Vec<usize> = (0..wall_nodes.len())
            .filter(|&r| b_full.row(r).map(|(_, v)| v.abs()).sum::<f64>() > b_scale)
            .collect();
        let l_nodes: Vec<usize> = keep.iter().map(|&r| wall_nodes[r]).collect();
        let a: Vec<f64> = keep.iter().map(|&r| a_wall[r]).collect();
        let mut gt_trip = d_trip;
        for (new, &r) in keep.iter().enumerate() {
            gt_trip.extend(b_full.row(r).map(|(c, v)| (np + new, c, v)));
        }
        let gt = SparseMatrix::from_triplets(np + l_nodes.len(), 2 * nv, gt_trip);

        let mass: Vec<f64> = vel_cells.iter().map(|&c| rho * int_n[c]).collect();
        let inv_mass: Vec<f64> = (0..2 * nv).map(|k| 1.0 / mass[k / 2]).collect();
        let schur_unit = weighted_gram(&gt, &inv_mass);

        // constant pressure is a null mode when G [1; 1] vanishes (closed domain)
        let ones = vec![1.0; gt.rows()];
        let g_ones = gt.transpose().mul_vec(&ones);
        let scale = gt.norm_inf().max(f64::MIN_POSITIVE);
        let null_vector = (norm_inf(&g_ones) <= 1e-9 * scale).then_some(ones);

        Ok(Self {
            grid,
            rho,
            vel_cells,
            vel_index,
            p_nodes,
            l_nodes,
            mass,
            g_hat,
            gt,
            a,
            schur_unit,
            null_vector,
            factor: OnceLock::new(),
        })
    }

    pub fn n_velocity(&self) -> usize {
        self.vel_cells.len()
    }

    pub fn n_pressure(&self) -> usize {
        self.p_nodes.len()
    }

    pub fn n_multipliers(&self) -> usize {
        self.l_nodes.len()
    }

    /// Whether constant pressures lie in the null space (no free surface).
    pub fn is_closed(&self) -> bool {
        self.null_vector.is_some()
    }

    /// Lumped mass diagonal `ρ/dt ∫_Ω N_i`, one entry per active coefficient.
    pub fn lumped_mass(&self, dt: f64) -> Vec<f64> {
        self.mass.iter().map(|m| m / dt).collect()
    }

    /// The Schur operator `Gᵀ M⁻¹ G` for time step `dt`.
    pub fn schur(&self, dt: f64) -> SparseMatrix {
        let t: Vec<_> = self
            .schur_unit
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (r, c, v * dt))
            .collect();
        SparseMatrix::from_triplets(self.schur_unit.rows(), self.schur_unit.cols(), t)
    }

    /// Active coefficients of `u`, interleaved by component.
    pub fn gather(&self, u: &VelocityField) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.n_velocity());
        for &c in &self.vel_cells {
            out.push(u.coeffs[c].x);
            out.push(u.coeffs[c].y);
        }
        out
    }

    /// Weak divergence `D U` of a coefficient vector, one entry per pressure node.
    pub fn divergence(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut y = self.gt.mul_vec(coeffs);
        y.truncate(self.n_pressure());
        y.iter_mut().for_each(|v| *v = -*v);
        y
    }

    /// Velocity `W* - M⁻¹ G X` for `W* = W + M⁻¹ ĝ`.
    fn corrected(&self, w_star: &[f64], x: &[f64], dt: f64) -> Vec<f64> {
        let gx = self.gt.transpose_mul(x);
        (0..w_star.len())
            .map(|k| w_star[k] - dt * gx[k] / self.mass[k / 2])
            .collect()
    }

    /// Schur residual `(Gᵀ U - [0; A]) / dt` evaluated from the corrected
    /// velocity itself. Its pressure rows are `-D U / dt`.
    fn velocity_residual(&self, u: &[f64], dt: f64) -> Vec<f64> {
        let np = self.n_pressure();
        let mut r = self.gt.mul_vec(u);
        for (k, a) in self.a.iter().enumerate() {
            r[np + k] -= a;
        }
        r.iter_mut().for_each(|v| *v /= dt);
        if let Some(v) = &self.null_vector {
            project_out(&mut r, v);
        }
        r
    }

    fn cholesky(&self) -> Result<Arc<ShiftedCholesky>> {
        if let Some(f) = self.factor.get() {
            return Ok(f.clone());
        }
        let mut shift = CHOLESKY_SHIFT;
        let f = loop {
            match ShiftedCholesky::new(&self.schur_unit, shift) {
                Ok(f) => break f,
                Err(e) if shift > 1e-4 => return Err(e),
                Err(_) => shift *= 100.0,
            }
        };
        Ok(self.factor.get_or_init(|| Arc::new(f)).clone())
    }

    /// Projects `w` over a step of length `dt`. `warm` is an initial guess for
    /// `[P; Λ]`, typically the previous step's solution.
    ///
    /// Conjugate gradients solve for corrections to `[P; Λ]` against the
    /// residual recomputed from the corrected velocity, until that residual
    /// meets the tolerance. Forming the right-hand side `Gᵀ W*` directly loses
    /// digits to cancellation, which near-null multiplier modes then amplify.
    pub fn solve(
        &self,
        w: &VelocityField,
        dt: f64,
        params: &SolverParams,
        warm: Option<&[f64]>,
    ) -> Result<ProjectionSolution> {
        if w.grid != self.grid {
            return Err(Error::GridMismatch(
                "velocity field and projection grid differ".into(),
            ));
        }
        let nv2 = 2 * self.n_velocity();
        let np = self.n_pressure();
        let n = self.gt.rows();
        let wv = self.gather(w);
        // W + M⁻¹ ĝ with M⁻¹ = dt / (ρ ∫N)
        let w_star: Vec<f64> = (0..nv2)
            .map(|k| wv[k] + dt * self.g_hat[k] / self.mass[k / 2])
            .collect();

        // tolerance relative to the right-hand side, floored at the size of the
        // fluxes that cancel in it
        let mut rhs = self.gt.mul_vec(&w_star);
        for (k, a) in self.a.iter().enumerate() {
            rhs[np + k] -= a;
        }
        if let Some(v) = &self.null_vector {
            project_out(&mut rhs, v);
        }
        let b_norm = norm_inf(&rhs) / dt;
        let flux: f64 = (0..n)
            .map(|r| {
                self.gt
                    .row(r)
                    .map(|(c, v)| (v * w_star[c]).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
            .max(norm_inf(&self.a))
            / dt;
        let target = (params.tol * b_norm).max(params.tol * 1e-3 * flux);
        // pressure rows are -D U / dt: also hold ‖D U‖ to tol·max(1, ‖D W‖)
        let div_before = norm_inf(&self.divergence(&wv));
        let div_cap = params.tol * div_before.max(1.0) / dt;
        let unconverged = |r: &[f64]| norm_inf(r) > target || norm_inf(&r[..np]) > div_cap;

        let mut x = match warm {
            Some(x0) if x0.len() == n => x0.to_vec(),
            _ => vec![0.0; n],
        };
        let mut u = if x.iter().all(|v| *v == 0.0) {
            w_star.clone()
        } else {
            self.corrected(&w_star, &x, dt)
        };
        let diag = self.schur_unit.diagonal();
        let scale = norm_inf(&diag);
        let jacobi;
        let chol;
        let precond: &dyn Preconditioner = match params.preconditioner {
            Preconditioning::Jacobi => {
                jacobi = Jacobi::new(&diag);
                &jacobi
            }
            Preconditioning::Cholesky => {
                chol = self.cholesky()?;
                chol.as_ref()
            }
        };
        let max_iters = params.max_iters.unwrap_or(10 * n.max(1));
        let mut iterations = 0;
        let mut r = self.velocity_residual(&u, dt);
        let mut passes = 0;
        while unconverged(&r) {
            if passes == MAX_REFINEMENTS || iterations >= max_iters {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: norm_inf(&r) / b_norm.max(f64::MIN_POSITIVE),
                });
            }
            passes += 1;
            let r_norm = norm_inf(&r);
            let cg = CgParams {
                tol: (0.5 * target.min(div_cap) / r_norm).clamp(INNER_TOL_FLOOR, 0.5),
                abs_tol: 0.0,
                max_iters: max_iters - iterations,
            };
            let mut dx = vec![0.0; n];
            let report = pcg_with(
                &self.schur_unit,
                &r,
                &mut dx,
                precond,
                scale,
                cg,
                self.null_vector.as_deref(),
            )
            .or_else(|e| match e {
                // a stalled correction still improves the iterate; the
                // outer residual decides
                Error::NoConvergence { iterations, .. } if passes < MAX_REFINEMENTS => {
                    Ok(CgReport {
                        iterations,
                        residual: f64::NAN,
                    })
                }
                e => Err(e),
            })?;
            iterations += report.iterations;
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            let gd = self.gt.transpose_mul(&dx);
            for k in 0..nv2 {
                u[k] -= dt * gd[k] / self.mass[k / 2];
            }
            r = self.velocity_residual(&u, dt);
        }
        if self.null_vector.is_some() && np > 0 {
            let mean = x[..np].iter().sum::<f64>() / np as f64;
            x.iter_mut().for_each(|v| *v -= mean);
        }

        let mut velocity = w.clone();
        for (k, &c) in self.vel_cells.iter().enumerate() {
            velocity.coeffs[c] = Vec2::new(u[2 * k], u[2 * k + 1]);
        }
        Ok(ProjectionSolution {
            pressure: x[..np].to_vec(),
            lambda: x[np..].to_vec(),
            velocity,
            iterations,
            residual: norm_inf(&r) / b_norm.max(f64::MIN_POSITIVE),
            divergence_before: div_before,
            divergence_after: norm_inf(&self.divergence(&u)),
        })
    }

    /// Nodal pressure field with zero at inactive nodes.
    pub fn pressure_field(&self, sol: &ProjectionSolution) -> PressureField {
        let mut f = PressureField::constant(self.grid, 0.0);
        for (k, &node) in self.p_nodes.iter().enumerate() {
            f.values[node] = sol.pressure[k];
        }
        f
    }

    /// Concatenated `[P; Λ]` of a solution, for warm starts.
    pub fn unknowns(sol: &ProjectionSolution) -> Vec<f64> {
        let mut x = sol.pressure.clone();
        x.extend_from_slice(&sol.lambda);
        x
    }
}

/// `A diag(d) Aᵀ` for a row-major sparse `A`.
fn weighted_gram(a: &SparseMatrix, d: &[f64]) -> SparseMatrix {
    let at = a.transpose();
    let rows: Vec<Vec<(usize, usize, f64)>> = (0..a.rows())
        .into_par_iter()
        .map(|r| {
            let mut acc: Vec<(usize, f64)> = Vec::new();
            for (k, v) in a.row(r) {
                for (r2, v2) in at.row(k) {
                    acc.push((r2, v * d[k] * v2));
                }
            }
            acc.sort_by_key(|e| e.0);
            let mut out: Vec<(usize, usize, f64)> = Vec::new();
            for (c, v) in acc {
                match out.last_mut() {
                    Some(last) if last.1 == c => last.2 += v,
                    _ => out.push((r, c, v)),
                }
            }
            out
        })
        .collect();
    SparseMatrix::from_triplets(a.rows(), a.rows(), rows.into_iter().flatten().collect())
}

/// Consistent mass `ρ ∫_Ω N_i N_j`. Rows are the active coefficients of
/// `sys`, columns are all cells, so dropped slivers still count in row sums.
pub fn full_mass_matrix(domain: &CutCellDomain, sys: &ProjectionSystem) -> Result<SparseMatrix> {
    let grid = domain.grid;
    let mut t = Vec::new();
    for c in domain.fluid_cells() {
        for (x, w) in domain.volume_rule(c, VOLUME_DEGREE).iter() {
            let s = velocity_stencil(x, &grid)?;
            for (a, b, na, _) in s.iter() {
                let Some(ka) = sys.vel_index[grid.cell_index(a, b)] else {
                    continue;
                };
                for (c2, d2, nb, _) in s.iter() {
                    t.push((ka, grid.cell_index(c2, d2), sys.rho * w * na * nb));
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(
        sys.n_velocity(),
        grid.n_cells(),
        t,
    ))
}
