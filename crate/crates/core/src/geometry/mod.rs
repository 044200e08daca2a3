//! Level-set domains: fluid-cell classification, cut cells and quadrature.

mod clip;
mod quadrature;
mod shape;

pub use clip::{clip_cell, clip_square, BoundarySegment, CellClip};
pub use quadrature::{
    gauss_legendre, polygon_area, polygon_quadrature, rect_quadrature, segment_quadrature,
    QuadratureRule,
};
pub use shape::Shape;

use rayon::prelude::*;

use crate::grid::{GridDesc, LevelSet};
use crate::particles::ParticleSet;
use crate::Vec2;

/// What marks a cell as containing fluid before the solid is taken into account.
#[derive(Clone, Copy, Debug)]
pub enum FluidMarker<'a> {
    /// Every open cell holds fluid (smoke and closed-tank scenes).
    All,
    /// A cell holds fluid when it contains a particle or one of its nodes has
    /// a non-positive fluid level-set value.
    Free {
        particles: Option<&'a ParticleSet>,
        phi: Option<&'a LevelSet>,
    },
}

/// Fluid mask over cells. The outermost cell layer never holds fluid, and a
/// cell must touch the open side of `solid` (some node with `φ ≤ 0`).
pub fn classify_cells(solid: Option<&LevelSet>, grid: &GridDesc, marker: FluidMarker) -> Vec<bool> {
    let mut mask = vec![false; grid.n_cells()];
    match marker {
        FluidMarker::All => mask.iter_mut().for_each(|m| *m = true),
        FluidMarker::Free { particles, phi } => {
            if let Some(ps) = particles {
                for x in &ps.positions {
                    let (i, j) = grid.cell_of(*x);
                    mask[grid.cell_index(i, j)] = true;
                }
            }
            if let Some(phi) = phi {
                for (c, m) in mask.iter_mut().enumerate() {
                    let (i, j) = grid.cell_coords(c);
                    if phi.cell_corners(i, j).iter().any(|v| *v <= 0.0) {
                        *m = true;
                    }
                }
            }
        }
    }
    for (c, m) in mask.iter_mut().enumerate() {
        let (i, j) = grid.cell_coords(c);
        let open = solid.is_none_or(|s| s.cell_corners(i, j).iter().any(|v| *v <= 0.0));
        *m = *m && open && !grid.is_boundary_cell(i, j);
    }
    mask
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellGeometry {
    Empty,
    Full,
    Cut(CellClip),
}

/// Fluid region as a union of full grid cells and clipped cells, with the
/// solid boundary segments inside the clipped ones.
#[derive(Clone, Debug, PartialEq)]
pub struct CutCellDomain {
    pub grid: GridDesc,
    pub cells: Vec<CellGeometry>,
}

impl CutCellDomain {
    /// Clips every cell of `mask` against `solid` (no clipping without a solid).
    pub fn new(grid: &GridDesc, solid: Option<&LevelSet>, mask: &[bool]) -> Self {
        assert_eq!(mask.len(), grid.n_cells());
        let cells = (0..grid.n_cells())
            .into_par_iter()
            .map(|c| {
                if !mask[c] {
                    return CellGeometry::Empty;
                }
                let Some(solid) = solid else {
                    return CellGeometry::Full;
                };
                let (i, j) = grid.cell_coords(c);
                let phi = solid.cell_corners(i, j);
                if phi.iter().all(|v| *v <= 0.0) {
                    CellGeometry::Full
                } else if phi.iter().all(|v| *v > 0.0) {
                    CellGeometry::Empty
                } else {
                    let clip = clip_cell(solid, i, j);
                    if clip.polygons.is_empty() {
                        CellGeometry::Empty
                    } else {
                        CellGeometry::Cut(clip)
                    }
                }
            })
            .collect();
        Self { grid: *grid, cells }
    }

    pub fn is_fluid(&self, c: usize) -> bool {
        !matches!(self.cells[c], CellGeometry::Empty)
    }

    pub fn fluid_mask(&self) -> Vec<bool> {
        (0..self.cells.len()).map(|c| self.is_fluid(c)).collect()
    }

    pub fn fluid_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cells.len()).filter(|&c| self.is_fluid(c))
    }

    pub fn is_empty(&self) -> bool {
        self.fluid_cells().next().is_none()
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        match &self.cells[c] {
            CellGeometry::Empty => 0.0,
            CellGeometry::Full => self.grid.dx * self.grid.dx,
            CellGeometry::Cut(clip) => clip.area(),
        }
    }

    pub fn area(&self) -> f64 {
        (0..self.cells.len()).map(|c| self.cell_area(c)).sum()
    }

    /// Rule over the fluid part of cell `c`.
    pub fn volume_rule(&self, c: usize, exact_degree: usize) -> QuadratureRule {
        let (i, j) = self.grid.cell_coords(c);
        match &self.cells[c] {
            CellGeometry::Empty => QuadratureRule::default(),
            CellGeometry::Full => rect_quadrature(
                self.grid.node(i, j),
                self.grid.node(i + 1, j + 1),
                exact_degree,
            ),
            CellGeometry::Cut(clip) => {
                let mut rule = QuadratureRule::default();
                for poly in &clip.polygons {
                    let r = polygon_quadrature(poly, exact_degree);
                    rule.points.extend(r.points);
                    rule.weights.extend(r.weights);
                }
                rule
            }
        }
    }

    pub fn segments(&self, c: usize) -> &[BoundarySegment] {
        match &self.cells[c] {
            CellGeometry::Cut(clip) => &clip.segments,
            _ => &[],
        }
    }

    pub fn has_solid_boundary(&self) -> bool {
        (0..self.cells.len()).any(|c| !self.segments(c).is_empty())
    }
}

/// Midpoint of a segment nudged along its normal, for orientation checks.
pub fn probe_outside(seg: &BoundarySegment, eps: f64) -> Vec2 {
    seg.midpoint() + eps * seg.normal
}
