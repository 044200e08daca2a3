//! Narrow-band free surface: particles near the surface, a level set below.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridDesc, LevelSet, VelocityField};
use crate::particles::{g2p, particle_mass, stratified_samples, ParticleSet};
use crate::{Mat2, Vec2};

/// Particle radius as a fraction of the cell size.
pub const PARTICLE_RADIUS: f64 = 0.36;
/// Particles influence nodes within this many cells.
const REACH_CELLS: f64 = 3.0;
/// Default number of fast-sweeping iterations (four sweeps each).
pub const REDISTANCE_ITERATIONS: usize = 2;

#[derive(Clone, Debug)]
pub struct NarrowBandState {
    /// Fluid surface, negative inside.
    pub phi: LevelSet,
    pub particles: ParticleSet,
    pub band_width: f64,
}

/// Union-of-balls level set `min_p (|x - x_p| - r_p)` at the grid nodes.
/// Nodes farther than three cells from every particle get `10·max(W, dx)`.
pub fn particles_to_levelset(
    positions: &[Vec2],
    grid: &GridDesc,
    r_p: f64,
    band_width: f64,
) -> LevelSet {
    let far = 10.0 * band_width.max(grid.dx);
    let reach = REACH_CELLS * grid.dx;
    let [nx, ny] = [grid.nx(), grid.ny()];
    // bucket particles by cell; positions outside the grid are clamped in
    let mut heads = vec![usize::MAX; nx * ny];
    let mut next = vec![usize::MAX; positions.len()];
    for (p, x) in positions.iter().enumerate() {
        let (i, j) = grid.cell_of(*x);
        let c = grid.cell_index(i, j);
        next[p] = heads[c];
        heads[c] = p;
    }
    let r = REACH_CELLS as usize;
    let mut phi = LevelSet::constant(*grid, far);
    phi.values.par_iter_mut().enumerate().for_each(|(node, v)| {
        let (i, j) = grid.node_coords(node);
        let x = grid.node(i, j);
        let mut best = f64::INFINITY;
        for b in j.saturating_sub(r)..(j + r).min(ny) {
            for a in i.saturating_sub(r)..(i + r).min(nx) {
                let mut p = heads[grid.cell_index(a, b)];
                while p != usize::MAX {
                    let d = (x - positions[p]).norm();
                    if d <= reach {
                        best = best.min(d - r_p);
                    }
                    p = next[p];
                }
            }
        }
        if best.is_finite() {
            *v = best;
        }
    });
    phi
}

/// Pointwise minimum of two level sets on the same grid.
pub fn union_levelsets(a: &LevelSet, b: &LevelSet) -> Result<LevelSet> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(
            "level sets live on different grids".into(),
        ));
    }
    let mut out = a.clone();
    out.values
        .iter_mut()
        .zip(&b.values)
        .for_each(|(x, y)| *x = x.min(*y));
    Ok(out)
}

/// Fast-sweeping redistancing to `|∇φ| = 1`.
pub fn redistance(phi: &LevelSet, iterations: usize) -> Result<LevelSet> {
    redistance_outside(phi, iterations, None)
}

/// [`redistance`] leaving nodes covered by `solid` (`> 0`) untouched and out
/// of every stencil.
///
/// Nodes next to a sign change are frozen at the distance implied by linear
/// interpolation along the grid lines; the rest are solved by Godunov upwind
/// updates in four alternating sweep orders per iteration.
pub fn redistance_outside(
    phi: &LevelSet,
    iterations: usize,
    solid: Option<&LevelSet>,
) -> Result<LevelSet> {
    let grid = phi.grid;
    let [nx, ny] = grid.node_dims();
    let h = grid.dx;
    let idx = |i: usize, j: usize| j * nx + i;
    let active: Vec<bool> = match solid {
        Some(s) => s.values.iter().map(|v| *v <= 0.0).collect(),
        None => vec![true; nx * ny],
    };
    let v = &phi.values;
    let far = f64::MAX;
    // values within roundoff of zero lie on the interface
    let on_surface = |x: f64| x.abs() <= 1e-12 * h;
    let mut dist = vec![far; nx * ny];
    let mut frozen = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let k = idx(i, j);
            if !active[k] {
                continue;
            }
            if on_surface(v[k]) {
                dist[k] = v[k].abs();
                frozen[k] = true;
                continue;
            }
            let mut crossing = false;
            let mut inv_sq = 0.0;
            let mut grad_sq = 0.0;
            for axis in 0..2 {
                let at = |step: i64| {
                    let (a, b) = if axis == 0 {
                        (i as i64 + step, j as i64)
                    } else {
                        (i as i64, j as i64 + step)
                    };
                    if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                        return None;
                    }
                    let q = idx(a as usize, b as usize);
                    active[q].then(|| if on_surface(v[q]) { 0.0 } else { v[q] })
                };
                let (lo, hi) = (at(-1), at(1));
                let mut d_axis = f64::INFINITY;
                for vq in [lo, hi].into_iter().flatten() {
                    if vq * v[k] <= 0.0 {
                        d_axis = d_axis.min(h * v[k] / (v[k] - vq));
                    }
                }
                if d_axis.is_finite() {
                    crossing = true;
                    inv_sq += 1.0 / (d_axis * d_axis).max(f64::MIN_POSITIVE);
                }
                let slope = match (lo, hi) {
                    (Some(a), Some(b)) => (b - a) / (2.0 * h),
                    (Some(a), None) => (v[k] - a) / h,
                    (None, Some(b)) => (b - v[k]) / h,
                    (None, None) => 0.0,
                };
                grad_sq += slope * slope;
            }
            if crossing {
                // |φ|/|∇φ| is exact for affine fields; per-axis crossings bound it
                let per_axis = 1.0 / inv_sq.sqrt();
                let by_gradient = v[k].abs() / grad_sq.sqrt();
                dist[k] = if by_gradient.is_finite() {
                    by_gradient.min(per_axis)
                } else {
                    per_axis
                };
                frozen[k] = true;
            }
        }
    }
    if !frozen.iter().any(|f| *f) {
        return Err(Error::NoInterface);
    }

    let update = |dist: &mut [f64], i: usize, j: usize| {
        let k = idx(i, j);
        if frozen[k] || !active[k] {
            return;
        }
        let neighbour = |a: Option<usize>, b: Option<usize>| match (a, b) {
            (Some(a), Some(b)) if a < nx && b < ny && active[idx(a, b)] => dist[idx(a, b)],
            _ => far,
        };
        let ux = neighbour(i.checked_sub(1), Some(j)).min(neighbour(Some(i + 1), Some(j)));
        let uy = neighbour(Some(i), j.checked_sub(1)).min(neighbour(Some(i), Some(j + 1)));
        let (a, b) = (ux.min(uy), ux.max(uy));
        if a == far {
            return;
        }
        let d = if b - a >= h {
            a + h
        } else {
            0.5 * (a + b + (2.0 * h * h - (a - b) * (a - b)).sqrt())
        };
        if d < dist[k] {
            dist[k] = d;
        }
    };
    for _ in 0..iterations {
        for (rev_i, rev_j) in [(false, false), (true, false), (true, true), (false, true)] {
            for jj in 0..ny {
                let j = if rev_j { ny - 1 - jj } else { jj };
                for ii in 0..nx {
                    let i = if rev_i { nx - 1 - ii } else { ii };
                    update(&mut dist, i, j);
                }
            }
        }
    }
    let mut out = phi.clone();
    for k in 0..nx * ny {
        if active[k] && dist[k] < far {
            out.values[k] = if v[k] < 0.0 { -dist[k] } else { dist[k] };
        }
    }
    Ok(out)
}

/// Drops particles outside the band `-W ≤ φ ≤ 0` and tops up every cell
/// whose centre lies in the band to `per_cell` particles. New particles take
/// their velocity and affine matrix from `u`; `solid` (`> 0` inside) keeps
/// them out of obstacles.
pub fn reseed_band(
    mut state: NarrowBandState,
    per_cell: usize,
    rho: f64,
    u: &VelocityField,
    solid: Option<&LevelSet>,
    rng: &mut impl Rng,
) -> NarrowBandState {
    let grid = state.phi.grid;
    let w = state.band_width;
    let phi = &state.phi;
    let in_band = |x: Vec2| {
        let p = phi.eval_clamped(x);
        let open = solid.is_none_or(|s| s.eval_clamped(x) <= 0.0);
        p <= 0.0 && p >= -w && open
    };
    state.particles.retain(|_, x| in_band(x));
    if per_cell == 0 || w <= 0.0 {
        state.particles = ParticleSet::default();
        return state;
    }
    let mut count = vec![0usize; grid.n_cells()];
    for x in &state.particles.positions {
        let (i, j) = grid.cell_of(*x);
        count[grid.cell_index(i, j)] += 1;
    }
    let mass = particle_mass(rho, grid.dx, per_cell);
    let mut fresh = ParticleSet::default();
    for c in 0..grid.n_cells() {
        let (i, j) = grid.cell_coords(c);
        if grid.is_boundary_cell(i, j) || count[c] >= per_cell {
            continue;
        }
        let centre = phi.cell_center_value(i, j);
        if !(centre <= 0.0 && centre >= -w) {
            continue;
        }
        let missing = per_cell - count[c];
        for x in stratified_samples(&grid, i, j, per_cell, rng)
            .into_iter()
            .filter(|x| in_band(*x))
            .take(missing)
        {
            fresh.push(x, mass, Vec2::zeros(), Mat2::zeros());
        }
    }
    g2p(&mut fresh, u);
    state.particles.append(fresh);
    state
}
