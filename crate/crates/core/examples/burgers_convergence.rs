//! Grid refinement on the quadratic Burgers field: explicit semi-Lagrangian
//! against BSLQB with `λ = 1` and `λ = 1 - 2.95 dx`.
//!
//! cargo run --release --example burgers_convergence [levels...]

use bslqb::advect::AdvectionParams;
use bslqb::sim::convergence::convergence_study;

fn main() -> bslqb::Result<()> {
    let mut levels: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    if levels.is_empty() {
        levels = vec![16, 32, 64, 128];
    }
    let study = convergence_study(&levels, 0.25, 2.95, &AdvectionParams::default())?;
    println!(
        "{:>10} {:>12} {:>12} {:>12}",
        "dx", "SL", "BSLQB l=1", "BSLQB l_c"
    );
    for r in &study.rows {
        println!(
            "{:>10.6} {:>12.4e} {:>12.4e} {:>12.4e}",
            r.dx, r.error_sl, r.error_bslqb_l1, r.error_bslqb_lc
        );
    }
    println!(
        "slopes: SL {:.3}, BSLQB l=1 {:.3}, BSLQB l_c {:.3}",
        study.slope_sl, study.slope_bslqb_l1, study.slope_bslqb_lc
    );
    Ok(())
}
