//! Affine particle-in-cell transfers and the particle/grid velocity blend.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::grid::{GridDesc, VelocityField};
use crate::spline::velocity_stencil;
use crate::{Mat2, Vec2};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParticleSet {
    pub positions: Vec<Vec2>,
    pub masses: Vec<f64>,
    pub velocities: Vec<Vec2>,
    /// Local velocity gradient carried by each particle.
    pub affine: Vec<Mat2>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HybridParams {
    /// Minimum particle mass weight `Σ m_p N_j(x_p)` for a coefficient to take
    /// the particle value.
    pub tau_m: f64,
    /// Depth of the particle band below the free surface.
    pub band_width: f64,
    /// Particles seeded per cell.
    pub per_cell: usize,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn push(&mut self, x: Vec2, mass: f64, v: Vec2, c: Mat2) {
        self.positions.push(x);
        self.masses.push(mass);
        self.velocities.push(v);
        self.affine.push(c);
    }

    /// Keeps the particles for which `keep(index, position)` holds, in order.
    pub fn retain(&mut self, mut keep: impl FnMut(usize, Vec2) -> bool) {
        let mask: Vec<bool> = self
            .positions
            .iter()
            .enumerate()
            .map(|(k, &x)| keep(k, x))
            .collect();
        let mut it = mask.iter();
        self.positions.retain(|_| *it.next().unwrap());
        let mut it = mask.iter();
        self.masses.retain(|_| *it.next().unwrap());
        let mut it = mask.iter();
        self.velocities.retain(|_| *it.next().unwrap());
        let mut it = mask.iter();
        self.affine.retain(|_| *it.next().unwrap());
    }

    pub fn append(&mut self, other: ParticleSet) {
        self.positions.extend(other.positions);
        self.masses.extend(other.masses);
        self.velocities.extend(other.velocities);
        self.affine.extend(other.affine);
    }
}

/// Mass of one particle when `per_cell` particles share a cell of density `rho`.
pub fn particle_mass(rho: f64, dx: f64, per_cell: usize) -> f64 {
    rho * dx * dx / per_cell as f64
}

/// Stratified jittered positions inside cell `(i, j)`: `per_cell` distinct
/// strata of a near-square sub-grid, one uniform sample in each.
pub fn stratified_samples(
    grid: &GridDesc,
    i: usize,
    j: usize,
    per_cell: usize,
    rng: &mut impl Rng,
) -> Vec<Vec2> {
    if per_cell == 0 {
        return Vec::new();
    }
    let sx = (per_cell as f64).sqrt().ceil() as usize;
    let sy = per_cell.div_ceil(sx);
    let mut strata: Vec<usize> = (0..sx * sy).collect();
    strata.shuffle(rng);
    let corner = grid.node(i, j);
    strata[..per_cell]
        .iter()
        .map(|&s| {
            let (a, b) = (s % sx, s / sx);
            let u = (a as f64 + rng.gen::<f64>()) / sx as f64;
            let v = (b as f64 + rng.gen::<f64>()) / sy as f64;
            corner + Vec2::new(u, v) * grid.dx
        })
        .collect()
}

/// Seeds `per_cell` particles in every listed cell, keeping the samples for
/// which `keep` holds. Velocities and gradients start at zero.
pub fn seed_cells(
    grid: &GridDesc,
    cells: impl IntoIterator<Item = (usize, usize)>,
    per_cell: usize,
    rho: f64,
    rng: &mut impl Rng,
    keep: impl Fn(Vec2) -> bool,
) -> ParticleSet {
    let mass = particle_mass(rho, grid.dx, per_cell.max(1));
    let mut ps = ParticleSet::default();
    for (i, j) in cells {
        for x in stratified_samples(grid, i, j, per_cell, rng) {
            if keep(x) {
                ps.push(x, mass, Vec2::zeros(), Mat2::zeros());
            }
        }
    }
    ps
}

/// `x_p += dt v_p`, clamped into the interpolatable region.
pub fn advect_particles(ps: &mut ParticleSet, dt: f64, grid: &GridDesc) {
    ps.positions
        .par_iter_mut()
        .zip(ps.velocities.par_iter())
        .for_each(|(x, v)| *x = grid.clamp_to_velocity_region(*x + dt * v));
}

/// Replaces every coefficient whose particle mass weight exceeds `tau_m` by
/// the mass-weighted affine particle prediction; other coefficients keep the
/// grid value bit for bit. Returns the blended field and the number of
/// replaced coefficients.
pub fn p2g_blend(
    ps: &ParticleSet,
    bsl: &VelocityField,
    params: &HybridParams,
) -> (VelocityField, usize) {
    let grid = bsl.grid;
    let mut num = vec![Vec2::zeros(); grid.n_cells()];
    let mut den = vec![0.0; grid.n_cells()];
    for p in 0..ps.len() {
        let xp = grid.clamp_to_velocity_region(ps.positions[p]);
        let s = velocity_stencil(xp, &grid).expect("clamped particle");
        for (i, j, w, _) in s.iter() {
            if w == 0.0 {
                continue;
            }
            let c = grid.cell_index(i, j);
            let mw = ps.masses[p] * w;
            num[c] += mw * (ps.velocities[p] + ps.affine[p] * (grid.cell_center(i, j) - xp));
            den[c] += mw;
        }
    }
    let mut out = bsl.clone();
    let mut replaced = 0;
    for c in 0..grid.n_cells() {
        if den[c] > params.tau_m {
            out.coeffs[c] = num[c] / den[c];
            replaced += 1;
        }
    }
    (out, replaced)
}

/// Samples velocity and velocity gradient of `u` at the particles.
pub fn g2p(ps: &mut ParticleSet, u: &VelocityField) {
    let grid = u.grid;
    ps.velocities
        .par_iter_mut()
        .zip(ps.affine.par_iter_mut())
        .zip(ps.positions.par_iter())
        .for_each(|((v, c), x)| {
            let (uv, g) = u
                .eval_with_gradient(grid.clamp_to_velocity_region(*x))
                .expect("clamped particle");
            *v = uv;
            *c = g;
        });
}
