//! Recovers B-spline coefficients from point samples of a smooth field for a
//! range of stabilization weights `λ`, showing the interpolation error and
//! the CG effort.
//!
//! cargo run --release --example coefficient_recovery

use bslqb::advect::{recover_coefficients, AdvectionParams};
use bslqb::{GridDesc, Vec2};

fn main() -> bslqb::Result<()> {
    let n = 48;
    let grid = GridDesc::new([n, n], 1.0 / n as f64, Vec2::zeros())?;
    let f = |x: Vec2| Vec2::new((6.0 * x.y).sin() * x.x, (4.0 * x.x).cos() + x.y * x.y);
    let samples: Vec<Vec2> = (0..grid.n_cells())
        .map(|c| {
            let (i, j) = grid.cell_coords(c);
            f(grid.cell_center(i, j))
        })
        .collect();
    println!("{:>8} {:>14} {:>10}", "lambda", "max error", "CG iters");
    for lambda in [0.0, 0.5, 1.0 - 2.95 * grid.dx, 1.0] {
        let params = AdvectionParams {
            lambda,
            ..AdvectionParams::default()
        };
        let (field, cg) = recover_coefficients(&grid, &samples, &params)?;
        let mut err: f64 = 0.0;
        for j in 2..n - 2 {
            for i in 2..n - 2 {
                let x = grid.cell_center(i, j);
                err = err.max((field.eval(x)? - f(x)).norm());
            }
        }
        println!(
            "{lambda:>8.4} {err:>14.4e} {:>10}",
            cg[0].iterations + cg[1].iterations
        );
    }
    Ok(())
}
