//! Grid-to-particle-to-grid round trip of a rotating field with affine
//! (APIC) particles against plain PIC particles that drop the gradient.
//!
//! cargo run --release --example polypic_transfer

use bslqb::particles::{g2p, p2g_blend, seed_cells, HybridParams};
use bslqb::{GridDesc, Mat2, Vec2, VelocityField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bslqb::Result<()> {
    let grid = GridDesc::new([32, 32], 1.0 / 32.0, Vec2::zeros())?;
    let field = VelocityField::from_fn(grid, |x| Vec2::new(-(x.y - 0.5), x.x - 0.5));
    let params = HybridParams {
        tau_m: 1e-12,
        band_width: 1.0,
        per_cell: 4,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cells: Vec<_> = (0..grid.ny())
        .flat_map(|j| (0..grid.nx()).map(move |i| (i, j)))
        .collect();
    let mut ps = seed_cells(&grid, cells, params.per_cell, 1.0, &mut rng, |x| {
        grid.in_velocity_region(x)
    });
    g2p(&mut ps, &field);
    let (apic, covered) = p2g_blend(&ps, &VelocityField::zeros(grid), &params);
    ps.affine.iter_mut().for_each(|c| *c = Mat2::zeros());
    let (pic, _) = p2g_blend(&ps, &VelocityField::zeros(grid), &params);
    let error = |g: &VelocityField| {
        let mut e: f64 = 0.0;
        for j in 1..grid.ny() - 1 {
            for i in 1..grid.nx() - 1 {
                let x = grid.cell_center(i, j);
                e = e.max((g.eval(x).unwrap() - field.eval(x).unwrap()).norm());
            }
        }
        e
    };
    let ke = |g: &VelocityField| g.coeffs.iter().map(|v| v.norm_squared()).sum::<f64>();
    println!("{} particles cover {covered} coefficients", ps.len());
    println!(
        "APIC: max error {:.3e}, coefficient energy ratio {:.6}",
        error(&apic),
        ke(&apic) / ke(&field)
    );
    println!(
        "PIC:  max error {:.3e}, coefficient energy ratio {:.6}",
        error(&pic),
        ke(&pic) / ke(&field)
    );
    Ok(())
}
