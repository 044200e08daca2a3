//! Runs the dam break briefly through the batch driver, then reads the
//! written frames and diagnostics back.
//!
//! cargo run --release --example frame_output [out_dir]

use std::path::PathBuf;

use bslqb::cli::run_scene;
use bslqb::io::read_frame;
use bslqb::sim::SceneConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("bslqb_frames"));
    let mut cfg = SceneConfig::new("dam_break", [32, 32], 1.0 / 32.0);
    cfg.cfl = Some(2.0);
    cfg.steps = Some(20);
    cfg.end_time = 10.0;
    cfg.output.frame_every = 10;
    cfg.output.fields = vec!["velocity".into(), "pressure".into(), "levelset".into()];
    let summary = run_scene(&cfg, &out)?;
    println!("{summary:?}");
    for frame in 0..summary.frames {
        for field in &cfg.output.fields {
            let path = out.join(format!("{field}_{frame:05}.bin"));
            if let Ok(f) = read_frame(&path) {
                let max = f.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                println!(
                    "{}: {} {:?}x{} at t {:.4}, max |value| {:.4e}",
                    path.display(),
                    f.name,
                    f.extents,
                    f.components,
                    f.time,
                    max
                );
            }
        }
    }
    let csv = std::fs::read_to_string(out.join("diagnostics.csv"))?;
    println!("diagnostics.csv: {} rows", csv.lines().count() - 1);
    Ok(())
}
