//! One large advection step of a rigid rotation: Newton iteration counts of
//! the backward characteristic solve as the CFL number grows.
//!
//! cargo run --release --example newton_advection

use bslqb::advect::{advect_field, AdvectionParams, ClampBoundary};
use bslqb::{GridDesc, Mat2, Vec2, VelocityField};

fn main() -> bslqb::Result<()> {
    let n = 64;
    let grid = GridDesc::new([n, n], 1.0 / n as f64, Vec2::zeros())?;
    let center = Vec2::new(0.5, 0.5);
    // rotation plus a little shear so the characteristics are curved
    let a = Mat2::new(0.1, -1.0, 1.0, -0.1);
    let u = VelocityField::from_fn(grid, |x| a * (x - center));
    let speed = u.max_coeff_norm();
    println!(
        "{:>5} {:>12} {:>12} {:>12}",
        "CFL", "mean iters", "fallback", "max |du|"
    );
    for cfl in [0.5, 1.0, 2.0, 4.0, 8.0] {
        let dt = cfl * grid.dx / speed;
        let (next, report) =
            advect_field(&u, dt, 0.0, &AdvectionParams::default(), &ClampBoundary)?;
        let stats = report.newton_stats(&grid, None);
        let max_change = next
            .coeffs
            .iter()
            .zip(&u.coeffs)
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max);
        println!(
            "{cfl:>5.1} {:>12.3} {:>12.2e} {max_change:>12.4e}",
            stats.0, stats.1
        );
    }
    Ok(())
}
