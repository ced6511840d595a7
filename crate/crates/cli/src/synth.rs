use std::path::Path;

use pothole_core::synth::{generate_scene, random_spec, write_scene, BatchRanges};
use rayon::prelude::*;

use crate::Outcome;

pub fn run(
    count: usize,
    seed: u64,
    out: &Path,
    width: usize,
    height: usize,
    noise: f64,
) -> anyhow::Result<Outcome> {
    anyhow::ensure!(count >= 1, "count must be ≥ 1");
    let ranges = BatchRanges {
        width,
        height,
        rig: pothole_core::StereoRig {
            cu: (width as f64 - 1.0) / 2.0,
            cv: (height as f64 - 1.0) / 2.0,
            ..BatchRanges::default().rig
        },
        noise_sigma: noise,
        ..BatchRanges::default()
    };
    (0..count)
        .into_par_iter()
        .try_for_each(|i| -> anyhow::Result<()> {
            let scene = generate_scene(&random_spec(seed.wrapping_add(i as u64), &ranges)?)?;
            write_scene(&scene, &out.join(format!("scene_{i:04}")))?;
            Ok(())
        })?;
    println!("wrote {count} scene(s) to {}", out.display());
    Ok(Outcome::Ok)
}
