//! Scene construction: grid, container, initial velocity and liquid.

use rand::Rng;

use crate::advect::VelocityBoundary;
use crate::error::{Error, Result};
use crate::geometry::Shape;
use crate::grid::{GridDesc, LevelSet, NodalField, VelocityField};
use crate::narrowband::{reseed_band, NarrowBandState};
use crate::particles::{HybridParams, ParticleSet};
use crate::projection::NormalSpeed;
use crate::sim::config::{InitialVelocity, SceneConfig};
use crate::sim::convergence::QuadraticBurgers;
use crate::Vec2;

pub const SCENES: [&str; 6] = [
    "burgers_convergence",
    "standing_pool",
    "spinning_circle",
    "vortex_shedding",
    "narrow_band_drop",
    "dam_break",
];

/// Velocity outside the grid and normal speed on the solid boundary.
#[derive(Clone, Copy, Debug)]
pub enum BoundaryModel {
    /// Walls at rest; off-grid velocities are extrapolated.
    Walls,
    /// Uniform inflow `velocity` for `x ≤ inlet`, walls at rest elsewhere.
    Inflow {
        velocity: Vec2,
        inlet: f64,
        tol: f64,
    },
    /// Exact solution of the Burgers refinement problem.
    Burgers(QuadraticBurgers),
}

impl VelocityBoundary for BoundaryModel {
    fn velocity(&self, x: Vec2, t: f64) -> Option<Vec2> {
        match self {
            BoundaryModel::Walls => None,
            BoundaryModel::Inflow {
                velocity, inlet, ..
            } => (x.x <= *inlet).then_some(*velocity),
            BoundaryModel::Burgers(p) => p.velocity(x, t),
        }
    }
}

impl NormalSpeed for BoundaryModel {
    fn normal_speed(&self, x: Vec2, n: Vec2) -> f64 {
        match self {
            BoundaryModel::Inflow {
                velocity,
                inlet,
                tol,
            } if x.x <= inlet + tol => velocity.dot(&n),
            _ => 0.0,
        }
    }
}

/// How the fluid region evolves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SceneKind {
    /// Self-advection only, no projection.
    Advection,
    /// Every open cell holds fluid; the mask never changes.
    Confined,
    /// Liquid tracked by a level set and optional narrow-band particles.
    FreeSurface,
}

/// Initial state and static data of a scene.
#[derive(Clone, Debug)]
pub struct Scene {
    pub name: String,
    pub kind: SceneKind,
    pub grid: GridDesc,
    /// Container, negative in the open region.
    pub solid: Option<LevelSet>,
    pub boundary: BoundaryModel,
    pub velocity: VelocityField,
    /// Liquid level set for free-surface scenes.
    pub phi: Option<LevelSet>,
    /// Passive tracer for confined scenes.
    pub dye: Option<NodalField>,
    pub particles: ParticleSet,
    /// Particle transfer settings when particles are in use.
    pub hybrid: Option<HybridParams>,
}

fn extent(cfg: &SceneConfig) -> Vec2 {
    Vec2::new(cfg.cells[0] as f64 * cfg.dx, cfg.cells[1] as f64 * cfg.dx)
}

fn padded(cfg: &SceneConfig, pad: [usize; 2]) -> Result<GridDesc> {
    GridDesc::padded(Vec2::zeros(), extent(cfg), cfg.dx, pad)
}

fn initial_velocity(grid: GridDesc, init: &InitialVelocity) -> VelocityField {
    match init {
        InitialVelocity::Zero => VelocityField::zeros(grid),
        InitialVelocity::Uniform { value } => {
            VelocityField::from_fn(grid, |_| Vec2::new(value[0], value[1]))
        }
        InitialVelocity::Affine { matrix, offset } => VelocityField::from_fn(grid, |x| {
            Vec2::new(
                matrix[0][0] * x.x + matrix[0][1] * x.y + offset[0],
                matrix[1][0] * x.x + matrix[1][1] * x.y + offset[1],
            )
        }),
        InitialVelocity::Spin {
            center,
            radius,
            omega,
        } => {
            let c = Vec2::new(center[0], center[1]);
            VelocityField::from_fn(grid, |x| {
                let r = x - c;
                if r.norm() <= *radius {
                    *omega * Vec2::new(-r.y, r.x)
                } else {
                    Vec2::zeros()
                }
            })
        }
    }
}

fn tank(l: Vec2) -> Shape {
    Shape::boxed([0.0, 0.0], [l.x, l.y])
}

/// Fills the band below the surface of `phi` with particles.
fn seed_band(
    grid: GridDesc,
    phi: &LevelSet,
    solid: Option<&LevelSet>,
    hybrid: &HybridParams,
    rho: f64,
    rng: &mut impl Rng,
) -> ParticleSet {
    let state = NarrowBandState {
        phi: phi.clone(),
        particles: ParticleSet::default(),
        band_width: hybrid.band_width,
    };
    reseed_band(
        state,
        hybrid.per_cell,
        rho,
        &VelocityField::zeros(grid),
        solid,
        rng,
    )
    .particles
}

/// Builds the initial state of `cfg.scene`. Particle jitter draws from `rng`.
pub fn build_scene(cfg: &SceneConfig, rng: &mut impl Rng) -> Result<Scene> {
    cfg.validate()?;
    let l = extent(cfg);
    let mut scene = match cfg.scene.as_str() {
        "burgers_convergence" => {
            let problem = QuadraticBurgers::default();
            let grid = GridDesc::new(cfg.cells, cfg.dx, Vec2::zeros())?;
            Scene {
                name: cfg.scene.clone(),
                kind: SceneKind::Advection,
                grid,
                solid: None,
                boundary: BoundaryModel::Burgers(problem),
                velocity: problem.initial_coefficients(grid),
                phi: None,
                dye: None,
                particles: ParticleSet::default(),
                hybrid: None,
            }
        }
        "standing_pool" => {
            let grid = padded(cfg, [2, 2])?;
            let container = cfg.solid.clone().unwrap_or_else(|| {
                tank(l).intersect(Shape::SineFloor {
                    base: 0.2 * l.y,
                    amplitude: 0.05 * l.y,
                    period: 0.5 * l.x,
                    phase: 0.3,
                })
            });
            let liquid = cfg.fluid.clone().unwrap_or(Shape::HalfPlane {
                normal: [0.0, 1.0],
                offset: 0.75 * l.y,
            });
            Scene {
                name: cfg.scene.clone(),
                kind: SceneKind::FreeSurface,
                grid,
                solid: Some(container.to_levelset(&grid)),
                boundary: BoundaryModel::Walls,
                velocity: VelocityField::zeros(grid),
                phi: Some(liquid.to_levelset(&grid)),
                dye: None,
                particles: ParticleSet::default(),
                hybrid: None,
            }
        }
        "spinning_circle" => {
            let grid = padded(cfg, [2, 2])?;
            let container = cfg.solid.clone().unwrap_or_else(|| tank(l));
            let center = [0.5 * l.x, 0.5 * l.y];
            let radius = 0.2 * l.x.min(l.y);
            let init = InitialVelocity::Spin {
                center,
                radius,
                omega: 4.0,
            };
            let disc = Shape::Circle { center, radius };
            Scene {
                name: cfg.scene.clone(),
                kind: SceneKind::Confined,
                grid,
                solid: Some(container.to_levelset(&grid)),
                boundary: BoundaryModel::Walls,
                velocity: initial_velocity(grid, &init),
                phi: None,
                dye: Some(disc.to_levelset(&grid)),
                particles: ParticleSet::default(),
                hybrid: None,
            }
        }
        "vortex_shedding" => {
            // upstream padding keeps CFL-4 characteristics near the inlet on the grid
            let grid = padded(cfg, [6, 2])?;
            let speed = cfg.boundary_speed.unwrap_or(1.5);
            let container = cfg.solid.clone().unwrap_or_else(|| Shape::Intersection {
                shapes: vec![
                    Shape::HalfPlane {
                        normal: [-1.0, 0.0],
                        offset: 0.0,
                    },
                    Shape::HalfPlane {
                        normal: [0.0, -1.0],
                        offset: 0.0,
                    },
                    Shape::HalfPlane {
                        normal: [0.0, 1.0],
                        offset: l.y,
                    },
                    // slightly off the centre line so the wake breaks symmetry
                    Shape::Circle {
                        center: [0.5 * l.y, 0.51 * l.y],
                        radius: 0.1 * l.y,
                    }
                    .complement(),
                ],
            });
            let v = Vec2::new(speed, 0.0);
            Scene {
                name: cfg.scene.clone(),
                kind: SceneKind::Confined,
                grid,
                solid: Some(container.to_levelset(&grid)),
                boundary: BoundaryModel::Inflow {
                    velocity: v,
                    inlet: 0.0,
                    // the level set rounds the inlet corners over a cell, and
                    // a uniform stream must stay consistent there
                    tol: 2.0 * cfg.dx,
                },
                velocity: VelocityField::from_fn(grid, |_| v),
                phi: None,
                dye: Some(LevelSet::from_fn(grid, |x| {
                    (x.y - 0.5 * l.y).abs() - 0.05 * l.y
                })),
                particles: ParticleSet::default(),
                hybrid: None,
            }
        }
        "narrow_band_drop" | "dam_break" => {
            let grid = padded(cfg, [2, 2])?;
            let container = cfg.solid.clone().unwrap_or_else(|| tank(l));
            let drop = cfg.scene == "narrow_band_drop";
            let liquid = cfg.fluid.clone().unwrap_or_else(|| {
                if drop {
                    Shape::Union {
                        shapes: vec![
                            Shape::HalfPlane {
                                normal: [0.0, 1.0],
                                offset: 0.3 * l.y,
                            },
                            Shape::Circle {
                                center: [0.5 * l.x, 0.7 * l.y],
                                radius: 0.12 * l.x.min(l.y),
                            },
                        ],
                    }
                } else {
                    Shape::boxed([0.0, 0.0], [0.4 * l.x, 0.6 * l.y])
                }
            });
            let solid = container.to_levelset(&grid);
            let phi = liquid.to_levelset(&grid);
            // the drop keeps particles in a 7-cell band, the dam break everywhere
            let band_cells = if drop {
                7.0
            } else {
                cfg.cells[0].max(cfg.cells[1]) as f64
            };
            let hybrid = cfg.hybrid.enabled.then(|| cfg.hybrid_params(band_cells));
            let particles = match &hybrid {
                Some(h) => seed_band(grid, &phi, Some(&solid), h, cfg.rho, rng),
                None => ParticleSet::default(),
            };
            Scene {
                name: cfg.scene.clone(),
                kind: SceneKind::FreeSurface,
                grid,
                solid: Some(solid),
                boundary: BoundaryModel::Walls,
                velocity: VelocityField::zeros(grid),
                phi: Some(phi),
                dye: None,
                particles,
                hybrid,
            }
        }
        other => {
            return Err(Error::UnknownScene {
                name: other.to_string(),
                available: SCENES.join(", "),
            })
        }
    };
    if let Some(init) = &cfg.initial_velocity {
        scene.velocity = initial_velocity(scene.grid, init);
    }
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn build(name: &str, n: usize) -> Scene {
        let cfg = SceneConfig::new(name, [n, n], 1.0 / n as f64);
        build_scene(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn unknown_scene_lists_the_available_ones() {
        let cfg = SceneConfig::new("lid_driven_cavity", [8, 8], 0.125);
        let err = build_scene(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap_err();
        let msg = err.to_string();
        assert!(SCENES.iter().all(|s| msg.contains(s)), "{msg}");
    }

    #[test]
    fn burgers_scene_has_no_particles_or_projection() {
        let s = build("burgers_convergence", 16);
        assert_eq!(s.kind, SceneKind::Advection);
        assert!(s.particles.is_empty() && s.solid.is_none());
        let x = Vec2::new(0.4, 0.6);
        let exact = QuadraticBurgers::default().initial(x);
        assert!((s.velocity.eval(x).unwrap() - exact).norm() < 1e-14);
    }

    #[test]
    fn standing_pool_starts_at_rest_with_a_flat_surface() {
        let s = build("standing_pool", 32);
        assert_eq!(s.kind, SceneKind::FreeSurface);
        assert!(s.velocity.coeffs.iter().all(|v| *v == Vec2::zeros()));
        let phi = s.phi.unwrap();
        let x = Vec2::new(0.3, 0.6);
        assert!((phi.eval(x).unwrap() + 0.15).abs() < 1e-12);
    }

    #[test]
    fn narrow_band_drop_seeds_only_the_band() {
        let s = build("narrow_band_drop", 32);
        let phi = s.phi.as_ref().unwrap();
        let w = 7.0 / 32.0;
        assert!(!s.particles.is_empty());
        for x in &s.particles.positions {
            let v = phi.eval(*x).unwrap();
            assert!((-w..=0.0).contains(&v), "{v}");
        }
        // deep water below the band has no particles
        assert!(s.particles.positions.iter().all(|x| x.y > 0.3 - w - 1e-12));
    }

    #[test]
    fn dam_break_fills_the_column() {
        let s = build("dam_break", 32);
        let per_cell = 8;
        let cells = (0.4f64 * 32.0 * 0.6 * 32.0).round() as usize;
        assert!(s.particles.len() >= cells * per_cell * 9 / 10);
    }

    #[test]
    fn inflow_model_drives_the_inlet() {
        let b = BoundaryModel::Inflow {
            velocity: Vec2::new(1.5, 0.0),
            inlet: 0.0,
            tol: 0.01,
        };
        assert_eq!(
            b.velocity(Vec2::new(-0.1, 0.5), 0.0),
            Some(Vec2::new(1.5, 0.0))
        );
        assert_eq!(b.velocity(Vec2::new(0.1, 0.5), 0.0), None);
        assert_eq!(
            b.normal_speed(Vec2::new(0.0, 0.5), Vec2::new(-1.0, 0.0)),
            -1.5
        );
        assert_eq!(
            b.normal_speed(Vec2::new(0.5, 0.0), Vec2::new(0.0, -1.0)),
            0.0
        );
    }
}
