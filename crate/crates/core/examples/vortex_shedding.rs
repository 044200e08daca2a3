//! Flow past a cylinder at CFL 4: Newton iterations, fallbacks and the
//! divergence left after each projection.
//!
//! cargo run --release --example vortex_shedding [steps]

use bslqb::sim::{SceneConfig, Simulation};

fn main() -> bslqb::Result<()> {
    let steps = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(60);
    let mut cfg = SceneConfig::new("vortex_shedding", [128, 64], 1.0 / 64.0);
    cfg.cfl = Some(4.0);
    cfg.dt_max = 1.0;
    cfg.steps = Some(steps);
    cfg.end_time = 100.0;
    cfg.gravity = [0.0, 0.0];
    let mut sim = Simulation::new(cfg)?;
    let rows = sim.run(|_, row| {
        if row.step % 10 == 0 {
            println!(
                "step {:>4} t {:.3}: KE {:.4e}, max |u| {:.3}, Newton {:.2}, fallback {:.1e}, div {:.1e}",
                row.step,
                row.time,
                row.kinetic_energy,
                row.max_speed,
                row.newton_mean_iters,
                row.newton_fallback_fraction,
                row.divergence
            );
        }
        Ok(())
    })?;
    let mean = rows.iter().map(|r| r.newton_mean_iters).sum::<f64>() / rows.len() as f64;
    println!(
        "mean Newton iterations over {} steps: {mean:.3}",
        rows.len()
    );
    Ok(())
}
