//! Time stepping, scenes and diagnostics.
//!
//! A step computes `dt`, moves particles, advects the velocity (blending in
//! particle velocities where they are dense enough), rebuilds the liquid
//! region, projects, transfers the result back to the particles and records
//! diagnostics.

pub mod config;
pub mod convergence;
pub mod scenes;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::advect::{advect_field, advect_levelset, nodal_velocities, VelocityBoundary};
use crate::error::{Error, Result};
use crate::geometry::{classify_cells, CutCellDomain, FluidMarker};
use crate::grid::{GridDesc, LevelSet, NodalField, PressureField, VelocityField};
use crate::narrowband::{
    particles_to_levelset, redistance_outside, reseed_band, union_levelsets, NarrowBandState,
    PARTICLE_RADIUS, REDISTANCE_ITERATIONS,
};
use crate::particles::{advect_particles, g2p, p2g_blend, ParticleSet};
use crate::projection::{ProjectionSystem, SolverParams};
use crate::Vec2;

pub use config::SceneConfig;
pub use scenes::{build_scene, BoundaryModel, Scene, SceneKind, SCENES};

/// Mass fraction of a full cell below which a coefficient is not trusted.
const TRUSTED_MASS: f64 = 0.2;
/// Guards the CFL time step against a fluid at rest.
const MIN_SPEED: f64 = 1e-8;

/// One row of `diagnostics.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub kinetic_energy: f64,
    /// Largest coefficient magnitude `|ū_i|` over trusted coefficients.
    pub max_speed: f64,
    /// `‖D U‖∞` after projection.
    pub divergence: f64,
    pub newton_mean_iters: f64,
    pub newton_fallback_fraction: f64,
    pub cg_iterations: usize,
    pub particle_count: usize,
    /// `‖D W‖∞` before projection.
    pub divergence_before: f64,
}

/// Evolving part of a simulation.
#[derive(Clone, Debug)]
pub struct SimState {
    pub step: usize,
    pub time: f64,
    pub velocity: VelocityField,
    pub pressure: Option<PressureField>,
    pub particles: ParticleSet,
    pub phi: Option<LevelSet>,
    pub dye: Option<NodalField>,
    /// Fluid cells of the last projection.
    pub fluid: Vec<bool>,
}

/// `CFL dx / max(|u|, ε)` clamped to `[dt_min, dt_max]`, or the fixed step.
pub fn cfl_dt(max_speed: f64, cfg: &SceneConfig) -> f64 {
    if let Some(dt) = cfg.dt_fixed {
        return dt;
    }
    let cfl = cfg.cfl.unwrap_or(1.0);
    (cfl * cfg.dx / max_speed.max(MIN_SPEED)).clamp(cfg.dt_min, cfg.dt_max)
}

/// A scene being stepped.
pub struct Simulation {
    pub cfg: SceneConfig,
    pub scene: Scene,
    pub state: SimState,
    rng: ChaCha8Rng,
    system: Option<(Vec<bool>, Arc<ProjectionSystem>)>,
    warm: Option<Vec<f64>>,
}

impl Simulation {
    /// Builds the scene named in `cfg`; particle jitter is seeded by `cfg.seed`.
    pub fn new(cfg: SceneConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let scene = build_scene(&cfg, &mut rng)?;
        let grid = scene.grid;
        let fluid = match scene.kind {
            SceneKind::Advection => vec![true; grid.n_cells()],
            SceneKind::Confined => classify_cells(scene.solid.as_ref(), &grid, FluidMarker::All),
            SceneKind::FreeSurface => classify_cells(
                scene.solid.as_ref(),
                &grid,
                FluidMarker::Free {
                    particles: Some(&scene.particles),
                    phi: scene.phi.as_ref(),
                },
            ),
        };
        let state = SimState {
            step: 0,
            time: 0.0,
            velocity: scene.velocity.clone(),
            pressure: None,
            particles: scene.particles.clone(),
            phi: scene.phi.clone(),
            dye: scene.dye.clone(),
            fluid,
        };
        Ok(Self {
            cfg,
            scene,
            state,
            rng,
            system: None,
            warm: None,
        })
    }

    pub fn grid(&self) -> GridDesc {
        self.scene.grid
    }

    /// Whether the end time or the step cap has been reached.
    pub fn finished(&self) -> bool {
        let eps = 1e-12 * self.cfg.end_time;
        self.state.time >= self.cfg.end_time - eps
            || self.cfg.steps.is_some_and(|n| self.state.step >= n)
    }

    /// Projection operators for the current fluid mask, reassembled only when
    /// the mask changes.
    pub fn projection_system(&mut self) -> Result<Arc<ProjectionSystem>> {
        if let Some((mask, sys)) = &self.system {
            if *mask == self.state.fluid {
                return Ok(sys.clone());
            }
        }
        let grid = self.grid();
        let domain = CutCellDomain::new(&grid, self.scene.solid.as_ref(), &self.state.fluid);
        let g = Vec2::new(self.cfg.gravity[0], self.cfg.gravity[1]);
        let sys = Arc::new(ProjectionSystem::assemble(
            &domain,
            self.cfg.rho,
            g,
            &self.scene.boundary,
        )?);
        self.system = Some((self.state.fluid.clone(), sys.clone()));
        self.warm = None;
        Ok(sys)
    }

    /// Coefficients that carry the fluid velocity: active ones holding at
    /// least `TRUSTED_MASS` of a full cell's mass. Lighter ones touch the
    /// fluid through thin overlaps, so the projection sets them almost freely
    /// and self-advecting them feeds their values back into the flow.
    fn trusted(&self) -> Vec<bool> {
        match &self.system {
            Some((_, sys)) => {
                let full = self.cfg.rho * self.grid().dx * self.grid().dx;
                let mut known = vec![false; self.grid().n_cells()];
                for (&c, m) in sys.vel_cells.iter().zip(&sys.mass) {
                    known[c] = *m >= TRUSTED_MASS * full;
                }
                known
            }
            None => self.state.fluid.clone(),
        }
    }

    /// The velocity the next step advects with: trusted coefficients as they
    /// are, the rest extended from them.
    fn advection_velocity(&self) -> VelocityField {
        let mut u = self.state.velocity.clone();
        if self.scene.kind != SceneKind::Advection {
            extend_velocity(
                &mut u,
                &self.trusted(),
                &self.scene.boundary,
                self.state.time,
            );
        }
        u
    }

    /// Largest trusted velocity coefficient.
    fn max_speed(&self, u: &VelocityField) -> f64 {
        let trusted = self.trusted();
        interior_cells(&u.grid)
            .filter(|&c| trusted[c])
            .map(|c| u.coeffs[c].norm())
            .fold(0.0, f64::max)
    }

    /// Advances one step and returns its diagnostics.
    pub fn step(&mut self) -> Result<DiagnosticsRow> {
        let step = self.state.step + 1;
        let stage = |name: &'static str| move |e: Error| e.at_stage(step, name);
        let grid = self.grid();
        let params = self.cfg.advection_params();
        let remaining = self.cfg.end_time - self.state.time;
        let u_old = self.advection_velocity();
        let mut dt = cfl_dt(self.max_speed(&u_old), &self.cfg);
        if remaining > 0.0 && remaining < dt {
            dt = remaining;
        }
        let t = self.state.time;

        // particles move with their own velocities
        advect_particles(&mut self.state.particles, dt, &grid);

        let (bsl, report) =
            advect_field(&u_old, dt, t, &params, &self.scene.boundary).map_err(stage("advect"))?;
        let w = match &self.scene.hybrid {
            Some(h) if !self.state.particles.is_empty() => {
                p2g_blend(&self.state.particles, &bsl, h).0
            }
            _ => bsl,
        };
        let (newton_mean, fallback) = report.newton_stats(&grid, Some(&self.state.fluid));

        // passive and liquid level sets ride on the old velocity
        if self.state.phi.is_some() || self.state.dye.is_some() {
            let nodes = nodal_velocities(&u_old);
            if let Some(dye) = &self.state.dye {
                self.state.dye = Some(advect_levelset(dye, &nodes, dt));
            }
            if let Some(phi) = &self.state.phi {
                let moved = advect_levelset(phi, &nodes, dt);
                self.state.phi = Some(self.rebuild_surface(moved).map_err(stage("surface"))?);
            }
        }

        let row = if self.scene.kind == SceneKind::Advection {
            self.state.velocity = w;
            let cg = report.cg.map_or(0, |r| r[0].iterations + r[1].iterations);
            let rho_area = self.cfg.rho * grid.dx * grid.dx;
            let u = &self.state.velocity;
            let ke = interior_cells(&grid)
                .map(|c| 0.5 * rho_area * u.coeffs[c].norm_squared())
                .sum();
            DiagnosticsRow {
                step,
                time: t + dt,
                dt,
                kinetic_energy: ke,
                max_speed: interior_cells(&grid)
                    .map(|c| u.coeffs[c].norm())
                    .fold(0.0, f64::max),
                divergence: 0.0,
                newton_mean_iters: newton_mean,
                newton_fallback_fraction: fallback,
                cg_iterations: cg,
                particle_count: 0,
                divergence_before: 0.0,
            }
        } else {
            self.project(w, dt, t, step, newton_mean, fallback)?
        };
        self.state.step = step;
        self.state.time = t + dt;
        if !self.state.velocity.is_finite() {
            return Err(Error::Validation("velocity became non-finite".into())
                .at_stage(step, "diagnostics"));
        }
        Ok(row)
    }

    /// Advected liquid level set merged with the particle surface, redistanced,
    /// and the fluid mask rebuilt from it.
    fn rebuild_surface(&mut self, moved: LevelSet) -> Result<LevelSet> {
        let grid = self.grid();
        let mut phi = moved;
        if let Some(h) = &self.scene.hybrid {
            if !self.state.particles.is_empty() {
                let from_particles = particles_to_levelset(
                    &self.state.particles.positions,
                    &grid,
                    PARTICLE_RADIUS * grid.dx,
                    h.band_width,
                );
                phi = union_levelsets(&phi, &from_particles)?;
            }
        }
        phi = match redistance_outside(&phi, REDISTANCE_ITERATIONS, self.scene.solid.as_ref()) {
            Ok(p) => p,
            Err(Error::NoInterface) => phi,
            Err(e) => return Err(e),
        };
        self.state.fluid = classify_cells(
            self.scene.solid.as_ref(),
            &grid,
            FluidMarker::Free {
                particles: Some(&self.state.particles),
                phi: Some(&phi),
            },
        );
        Ok(phi)
    }

    fn project(
        &mut self,
        w: VelocityField,
        dt: f64,
        t: f64,
        step: usize,
        newton_mean: f64,
        fallback: f64,
    ) -> Result<DiagnosticsRow> {
        let stage = |name: &'static str| move |e: Error| e.at_stage(step, name);
        let sys = self.projection_system().map_err(stage("assemble"))?;
        let solver: SolverParams = self.cfg.solver_params();
        let sol = sys
            .solve(&w, dt, &solver, self.warm.as_deref())
            .map_err(stage("project"))?;
        self.warm = Some(ProjectionSystem::unknowns(&sol));
        let mut u = sol.velocity.clone();
        let mut known = vec![false; u.grid.n_cells()];
        sys.vel_cells.iter().for_each(|&c| known[c] = true);
        extend_velocity(&mut u, &known, &self.scene.boundary, t + dt);
        self.state.velocity = u;
        self.state.pressure = Some(sys.pressure_field(&sol));

        if let Some(h) = self.scene.hybrid {
            g2p(&mut self.state.particles, &self.state.velocity);
            if let Some(phi) = &self.state.phi {
                let band = NarrowBandState {
                    phi: phi.clone(),
                    particles: std::mem::take(&mut self.state.particles),
                    band_width: h.band_width,
                };
                let solid = self.scene.solid.as_ref();
                self.state.particles = reseed_band(
                    band,
                    h.per_cell,
                    self.cfg.rho,
                    &self.state.velocity,
                    solid,
                    &mut self.rng,
                )
                .particles;
            }
        }

        let u = &self.state.velocity;
        let ke = sys
            .vel_cells
            .iter()
            .zip(&sys.mass)
            .map(|(&c, m)| 0.5 * m * u.coeffs[c].norm_squared())
            .sum();
        let max_speed = self.max_speed(u);
        Ok(DiagnosticsRow {
            step,
            time: t + dt,
            dt,
            kinetic_energy: ke,
            max_speed,
            divergence: sol.divergence_after,
            newton_mean_iters: newton_mean,
            newton_fallback_fraction: fallback,
            cg_iterations: sol.iterations,
            particle_count: self.state.particles.len(),
            divergence_before: sol.divergence_before,
        })
    }

    /// Steps until the end time or step cap, handing each row to `observe`.
    pub fn run(
        &mut self,
        mut observe: impl FnMut(&Simulation, &DiagnosticsRow) -> Result<()>,
    ) -> Result<Vec<DiagnosticsRow>> {
        let mut rows = Vec::new();
        while !self.finished() {
            let row = self.step()?;
            observe(self, &row)?;
            rows.push(row);
        }
        Ok(rows)
    }
}

fn interior_cells(grid: &GridDesc) -> impl Iterator<Item = usize> + '_ {
    (0..grid.n_cells()).filter(|&c| {
        let (i, j) = grid.cell_coords(c);
        !grid.is_boundary_cell(i, j)
    })
}

/// Fills coefficients outside `known`: the boundary model's velocity where it
/// prescribes one, otherwise layer by layer the mean of known neighbours.
/// Cells unreachable from any known cell are set to zero.
pub fn extend_velocity(
    u: &mut VelocityField,
    known: &[bool],
    boundary: &dyn VelocityBoundary,
    t: f64,
) {
    let grid = u.grid;
    let mut known = known.to_vec();
    for c in 0..grid.n_cells() {
        if !known[c] {
            let (i, j) = grid.cell_coords(c);
            if let Some(v) = boundary.velocity(grid.cell_center(i, j), t) {
                u.coeffs[c] = v;
                known[c] = true;
            }
        }
    }
    let [nx, ny] = grid.cells;
    let mut frontier: Vec<usize> = (0..grid.n_cells()).filter(|&c| !known[c]).collect();
    while !frontier.is_empty() {
        let mut updates = Vec::new();
        for &c in &frontier {
            let (i, j) = grid.cell_coords(c);
            let mut sum = Vec2::zeros();
            let mut n = 0;
            for b in j.saturating_sub(1)..=(j + 1).min(ny - 1) {
                for a in i.saturating_sub(1)..=(i + 1).min(nx - 1) {
                    let k = grid.cell_index(a, b);
                    if known[k] {
                        sum += u.coeffs[k];
                        n += 1;
                    }
                }
            }
            if n > 0 {
                updates.push((c, sum / n as f64));
            }
        }
        if updates.is_empty() {
            for &c in &frontier {
                u.coeffs[c] = Vec2::zeros();
            }
            break;
        }
        for &(c, v) in &updates {
            u.coeffs[c] = v;
            known[c] = true;
        }
        frontier.retain(|&c| !known[c]);
    }
}
