//! Scene configuration: one JSON document, sections mirroring the solver
//! parameter types.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::advect::{AdvectionParams, Scheme};
use crate::error::{Error, Result};
use crate::geometry::Shape;
use crate::particles::HybridParams;
use crate::projection::{Preconditioning, SolverParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub scene: String,
    /// Cells across the physical box `[0, cells.x dx] × [0, cells.y dx]`.
    pub cells: [usize; 2],
    pub dx: f64,
    /// CFL number; mutually exclusive with `dt_fixed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_fixed: Option<f64>,
    #[serde(default = "defaults::dt_min")]
    pub dt_min: f64,
    #[serde(default = "defaults::dt_max")]
    pub dt_max: f64,
    #[serde(default = "defaults::end_time")]
    pub end_time: f64,
    /// Optional cap on the number of steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default = "defaults::rho")]
    pub rho: f64,
    #[serde(default = "defaults::gravity")]
    pub gravity: [f64; 2],
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub advection: AdvectionConfig,
    #[serde(default)]
    pub hybrid: HybridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Open region of the container (negative inside); replaces the scene's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solid: Option<Shape>,
    /// Initial liquid region for free-surface scenes; replaces the scene's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluid: Option<Shape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_velocity: Option<InitialVelocity>,
    /// Inflow speed for scenes with an inlet.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_speed: Option<f64>,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Bslqb,
    ExplicitSl,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvectionConfig {
    #[serde(default = "defaults::scheme")]
    pub scheme: SchemeName,
    /// Fixed blend; `lambda_c` sets `λ = 1 - c dx` instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_c: Option<f64>,
    #[serde(default = "defaults::newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "defaults::max_newton_iters")]
    pub max_newton_iters: usize,
    #[serde(default = "defaults::cg_tol")]
    pub cg_tol: f64,
    #[serde(default = "defaults::max_cg_iters")]
    pub max_cg_iters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridConfig {
    /// Use particles where the scene supports them.
    #[serde(default = "defaults::yes")]
    pub enabled: bool,
    /// Mass threshold as a fraction of one particle's mass.
    #[serde(default = "defaults::tau_m")]
    pub tau_m: f64,
    /// Particle band depth in cells; the scene default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_cells: Option<f64>,
    #[serde(default = "defaults::per_cell")]
    pub per_cell: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "defaults::solver_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub preconditioner: Preconditioning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; `--out` overrides it.
    #[serde(default = "defaults::out_dir")]
    pub dir: PathBuf,
    /// Write frames every this many steps; 0 disables frames.
    #[serde(default)]
    pub frame_every: usize,
    /// Fields to dump: `velocity`, `pressure`, `levelset`, `dye`.
    #[serde(default = "defaults::fields")]
    pub fields: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Cells per unit length of each refinement level (`dx = 1 / n`).
    #[serde(default = "defaults::levels")]
    pub levels: Vec<usize>,
    /// `c` in `λ = 1 - c dx` for the stabilized run.
    #[serde(default = "defaults::lambda_c")]
    pub lambda_c: f64,
}

/// Initial velocity replacing the scene's.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialVelocity {
    Zero,
    Uniform {
        value: [f64; 2],
    },
    /// `u = A x + b`.
    Affine {
        matrix: [[f64; 2]; 2],
        #[serde(default)]
        offset: [f64; 2],
    },
    /// Rigid rotation inside a disc, rest outside.
    Spin {
        center: [f64; 2],
        radius: f64,
        omega: f64,
    },
}

mod defaults {
    use super::*;

    pub fn dt_min() -> f64 {
        1e-6
    }
    pub fn dt_max() -> f64 {
        0.01
    }
    pub fn end_time() -> f64 {
        1.0
    }
    pub fn rho() -> f64 {
        1000.0
    }
    pub fn gravity() -> [f64; 2] {
        [0.0, -9.8]
    }
    pub fn scheme() -> SchemeName {
        SchemeName::Bslqb
    }
    pub fn newton_tol() -> f64 {
        AdvectionParams::default().newton_tol
    }
    pub fn max_newton_iters() -> usize {
        AdvectionParams::default().max_newton_iters
    }
    pub fn cg_tol() -> f64 {
        AdvectionParams::default().cg_tol
    }
    pub fn max_cg_iters() -> usize {
        AdvectionParams::default().max_cg_iters
    }
    pub fn yes() -> bool {
        true
    }
    pub fn tau_m() -> f64 {
        1e-7
    }
    pub fn per_cell() -> usize {
        8
    }
    pub fn solver_tol() -> f64 {
        SolverParams::default().tol
    }
    pub fn out_dir() -> PathBuf {
        PathBuf::from("out")
    }
    pub fn fields() -> Vec<String> {
        vec!["velocity".into(), "pressure".into()]
    }
    pub fn levels() -> Vec<usize> {
        vec![32, 64, 128, 256]
    }
    pub fn lambda_c() -> f64 {
        2.95
    }
}

impl Default for AdvectionConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl Default for HybridConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

/// Known field names for frame output.
pub const FRAME_FIELDS: [&str; 4] = ["velocity", "pressure", "levelset", "dye"];

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl SceneConfig {
    /// A configuration with every optional field at its default.
    pub fn new(scene: &str, cells: [usize; 2], dx: f64) -> Self {
        serde_json::from_value(serde_json::json!({ "scene": scene, "cells": cells, "dx": dx }))
            .expect("defaults")
    }

    /// Checks ranges and mutually exclusive settings.
    pub fn validate(&self) -> Result<()> {
        if self.cells.iter().any(|&n| n < 2) {
            return Err(invalid(format!(
                "cells must be at least 2 per axis, got {:?}",
                self.cells
            )));
        }
        positive("dx", self.dx)?;
        if self.cfl.is_some() && self.dt_fixed.is_some() {
            return Err(invalid("cfl and dt_fixed are mutually exclusive"));
        }
        if let Some(c) = self.cfl {
            positive("cfl", c)?;
        }
        if let Some(dt) = self.dt_fixed {
            positive("dt_fixed", dt)?;
        }
        positive("dt_min", self.dt_min)?;
        positive("dt_max", self.dt_max)?;
        if self.dt_min > self.dt_max {
            return Err(invalid(format!(
                "dt_min ({}) must not exceed dt_max ({})",
                self.dt_min, self.dt_max
            )));
        }
        positive("end_time", self.end_time)?;
        positive("rho", self.rho)?;
        if self.gravity.iter().any(|g| !g.is_finite()) {
            return Err(invalid("gravity must be finite"));
        }
        let adv = &self.advection;
        if let Some(l) = adv.lambda {
            if !(0.0..=1.0).contains(&l) {
                return Err(invalid("lambda must be in [0,1]"));
            }
            if adv.lambda_c.is_some() {
                return Err(invalid("lambda and lambda_c are mutually exclusive"));
            }
        }
        if let Some(c) = adv.lambda_c {
            let l = 1.0 - c * self.dx;
            if !(0.0..=1.0).contains(&l) {
                return Err(invalid(format!(
                    "lambda = 1 - lambda_c dx = {l} must be in [0,1]"
                )));
            }
        }
        positive("advection.newton_tol", adv.newton_tol)?;
        positive("advection.cg_tol", adv.cg_tol)?;
        if adv.max_newton_iters == 0 || adv.max_cg_iters == 0 {
            return Err(invalid("iteration limits must be at least 1"));
        }
        positive("hybrid.tau_m", self.hybrid.tau_m)?;
        if let Some(w) = self.hybrid.band_cells {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(invalid(format!(
                    "hybrid.band_cells must be non-negative, got {w}"
                )));
            }
        }
        positive("solver.tol", self.solver.tol)?;
        if let Some(f) = self
            .output
            .fields
            .iter()
            .find(|f| !FRAME_FIELDS.contains(&f.as_str()))
        {
            return Err(invalid(format!(
                "output.fields: unknown field '{f}' (available: {})",
                FRAME_FIELDS.join(", ")
            )));
        }
        if let Some(v) = self.boundary_speed {
            if !v.is_finite() {
                return Err(invalid("boundary_speed must be finite"));
            }
        }
        let conv = &self.convergence;
        if conv.levels.len() < 3 {
            return Err(invalid("convergence.levels needs at least 3 entries"));
        }
        if conv.levels.iter().any(|&n| n < 8) {
            return Err(invalid("convergence.levels must be at least 8 cells"));
        }
        if !conv.lambda_c.is_finite() || conv.lambda_c < 0.0 {
            return Err(invalid("convergence.lambda_c must be non-negative"));
        }
        Ok(())
    }

    /// `λ` for grid spacing `dx`.
    pub fn lambda(&self, dx: f64) -> f64 {
        match (self.advection.lambda, self.advection.lambda_c) {
            (Some(l), _) => l,
            (None, Some(c)) => 1.0 - c * dx,
            (None, None) => 1.0,
        }
    }

    pub fn advection_params(&self) -> AdvectionParams {
        let a = &self.advection;
        AdvectionParams {
            scheme: match a.scheme {
                SchemeName::Bslqb => Scheme::Bslqb,
                SchemeName::ExplicitSl => Scheme::ExplicitSl,
            },
            lambda: self.lambda(self.dx),
            newton_tol: a.newton_tol,
            max_newton_iters: a.max_newton_iters,
            cg_tol: a.cg_tol,
            max_cg_iters: a.max_cg_iters,
        }
    }

    pub fn solver_params(&self) -> SolverParams {
        SolverParams {
            tol: self.solver.tol,
            max_iters: self.solver.max_iters,
            preconditioner: self.solver.preconditioner,
        }
    }

    /// Hybrid parameters with the band depth converted to length.
    pub fn hybrid_params(&self, default_band_cells: f64) -> HybridParams {
        let per_cell = self.hybrid.per_cell;
        let unit = crate::particles::particle_mass(self.rho, self.dx, per_cell.max(1));
        HybridParams {
            tau_m: self.hybrid.tau_m * unit,
            band_width: self.hybrid.band_cells.unwrap_or(default_band_cells) * self.dx,
            per_cell,
        }
    }
}
