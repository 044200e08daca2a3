//! Narrow-band surface from particles: union of balls, redistancing, and the
//! band reseeding that keeps particles only near the surface.
//!
//! cargo run --release --example narrow_band_levelset

use bslqb::geometry::Shape;
use bslqb::narrowband::{
    particles_to_levelset, redistance, reseed_band, NarrowBandState, PARTICLE_RADIUS,
    REDISTANCE_ITERATIONS,
};
use bslqb::particles::seed_cells;
use bslqb::{GridDesc, Vec2, VelocityField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bslqb::Result<()> {
    let n = 64;
    let grid = GridDesc::new([n, n], 1.0 / n as f64, Vec2::zeros())?;
    let drop = Shape::Circle {
        center: [0.5, 0.55],
        radius: 0.25,
    };
    let exact = drop.to_levelset(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cells: Vec<_> = (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).collect();
    let ps = seed_cells(&grid, cells, 4, 1000.0, &mut rng, |x| {
        exact.eval_clamped(x) <= 0.0
    });
    let band = 4.0 * grid.dx;
    let raw = particles_to_levelset(&ps.positions, &grid, PARTICLE_RADIUS * grid.dx, band);
    let phi = redistance(&raw, REDISTANCE_ITERATIONS)?;
    let surface_err = (0..grid.n_nodes())
        .filter(|&k| exact.values[k].abs() < grid.dx)
        .map(|k| (phi.values[k] - exact.values[k]).abs())
        .fold(0.0, f64::max);
    println!(
        "{} particles, surface offset near the interface {:.3} dx",
        ps.len(),
        surface_err / grid.dx
    );
    let state = NarrowBandState {
        phi,
        particles: ps,
        band_width: band,
    };
    let state = reseed_band(
        state,
        4,
        1000.0,
        &VelocityField::zeros(grid),
        None,
        &mut rng,
    );
    let deepest = state
        .particles
        .positions
        .iter()
        .map(|x| state.phi.eval_clamped(*x))
        .fold(0.0, f64::min);
    println!(
        "after reseeding: {} particles, deepest at phi = {:.3} (band {:.3})",
        state.particles.len(),
        deepest,
        -band
    );
    Ok(())
}
