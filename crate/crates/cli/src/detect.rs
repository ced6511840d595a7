use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use pothole_core::pipeline::{pothole_clouds, run_detection, Detection, StageTime};
use pothole_core::{io, Error, GrayImage, PipelineConfig};
use serde_json::{json, Value};

use crate::Outcome;

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn write_manifest(out: &Path, manifest: &Value) -> anyhow::Result<()> {
    let path = out.join("manifest.json");
    let text = serde_json::to_string(manifest)?;
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Writes every artifact of a successful detection and returns the paths.
fn write_outputs(
    det: &Detection,
    left: &GrayImage,
    cfg: &PipelineConfig,
    out: &Path,
    stages: &mut Vec<StageTime>,
) -> anyhow::Result<Vec<String>> {
    let t = Instant::now();
    let rig = cfg.rig_for(left.width(), left.height());
    let clouds = pothole_clouds(&det.d1, &det.labels, &rig)?;
    stages.push(StageTime {
        stage: "reproject",
        ms: ms_since(t),
    });

    let t = Instant::now();
    let mut written = Vec::new();
    let mut record = |name: String| {
        let p = out.join(name);
        written.push(p.display().to_string());
        p
    };
    io::save_disparity(&det.d1, &record("d1.png".into()))?;
    io::save_disparity(&det.d2, &record("d2.png".into()))?;
    io::save_labels(&det.labels, &record("labels.png".into()))?;
    io::save_overlay(left, &det.labels, &record("overlay.png".into()))?;
    for (k, cloud) in clouds.iter().enumerate() {
        io::write_ply(cloud, &record(format!("potholes_{}.ply", k + 1)))?;
    }
    stages.push(StageTime {
        stage: "write",
        ms: ms_since(t),
    });
    Ok(written)
}

pub fn run(
    left_path: &Path,
    right_path: &Path,
    config_path: Option<&Path>,
    cfg: &PipelineConfig,
    out: &Path,
) -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let t = Instant::now();
    let left = io::load_gray_image(left_path)?;
    let right = io::load_gray_image(right_path)?;
    let mut stages = vec![StageTime {
        stage: "load",
        ms: ms_since(t),
    }];
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut manifest = json!({
        "inputs": {
            "left": left_path.display().to_string(),
            "right": right_path.display().to_string(),
            "config": config_path.map(|p| p.display().to_string()),
        },
        "config": cfg,
    });

    let t = Instant::now();
    let det = match run_detection(&left, &right, cfg) {
        Ok(det) => det,
        Err(Error::DegenerateFit(msg)) => {
            stages.push(StageTime {
                stage: "detection",
                ms: ms_since(t),
            });
            manifest["status"] = json!("degenerate_fit");
            manifest["stages"] = json!(stages);
            manifest["total_ms"] = json!(ms_since(start));
            manifest["outputs"] = json!([out.join("manifest.json").display().to_string()]);
            manifest["warnings"] = json!([format!("degenerate road fit: {msg}")]);
            write_manifest(out, &manifest)?;
            eprintln!("degenerate road fit: {msg}");
            return Ok(Outcome::Degenerate);
        }
        Err(e) => return Err(e.into()),
    };
    stages.extend(det.stages.iter().cloned());
    let mut outputs = write_outputs(&det, &left, cfg, out, &mut stages)?;
    outputs.push(out.join("manifest.json").display().to_string());

    manifest["status"] = json!("ok");
    manifest["stages"] = json!(stages);
    manifest["total_ms"] = json!(ms_since(start));
    manifest["outputs"] = json!(outputs);
    manifest["warnings"] = json!(det.warnings);
    manifest["clamped"] = json!(det.clamped);
    manifest["road_model"] = json!(det.road);
    manifest["threshold"] = json!(det.threshold);
    manifest["superpixels"] = json!(det.superpixels.count());
    manifest["potholes"] = json!(det.potholes);
    write_manifest(out, &manifest)?;
    println!(
        "{} pothole(s); manifest at {}",
        det.potholes,
        out.join("manifest.json").display()
    );
    Ok(Outcome::Ok)
}
