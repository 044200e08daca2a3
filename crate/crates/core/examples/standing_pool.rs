//! Cut-cell pressure projection on a pool at rest over a sinusoidal floor:
//! the velocity stays at round-off and the pressure is hydrostatic.
//!
//! cargo run --release --example standing_pool [steps]

use bslqb::sim::{SceneConfig, Simulation};

fn main() -> bslqb::Result<()> {
    let steps = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(20);
    let mut cfg = SceneConfig::new("standing_pool", [64, 64], 1.0 / 64.0);
    cfg.dt_fixed = Some(0.01);
    cfg.steps = Some(steps);
    cfg.end_time = 10.0;
    cfg.solver.tol = 1e-13;
    let mut sim = Simulation::new(cfg)?;
    let rows = sim.run(|_, row| {
        if row.step % 5 == 0 {
            println!(
                "step {:>3}: max |u| {:.3e}, divergence {:.3e}, CG iterations {}",
                row.step, row.max_speed, row.divergence, row.cg_iterations
            );
        }
        Ok(())
    })?;
    let grid = sim.grid();
    let p = sim.state.pressure.as_ref().expect("projected");
    println!(
        "pressure down the middle column after {} steps:",
        rows.len()
    );
    for j in (8..grid.ny()).step_by(8) {
        let x = grid.node(grid.nx() / 2, j);
        println!("  y {:.4}: p {:.6}", x.y, p.eval(x)?);
    }
    Ok(())
}
