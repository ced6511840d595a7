use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use pothole_core::eval::{evaluate_frame, Aggregate, FrameInput, FrameMetrics};
use pothole_core::{io, DisparityMap};
use serde_json::Value;

use crate::Outcome;

/// Sorted names of the subdirectories of `dir`.
pub(crate) fn frame_dirs(dir: &Path) -> anyhow::Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}

fn first_existing(dir: &Path, names: &[&str]) -> Option<PathBuf> {
    names.iter().map(|n| dir.join(n)).find(|p| p.is_file())
}

fn manifest_runtime(dir: &Path) -> Option<f64> {
    let text = fs::read_to_string(dir.join("manifest.json")).ok()?;
    serde_json::from_str::<Value>(&text).ok()?["total_ms"].as_f64()
}

fn score_frame(
    name: &str,
    pred_dir: &Path,
    gt_dir: &Path,
    eps: &[f64],
    iou_min: f64,
) -> anyhow::Result<FrameMetrics> {
    let gt_mask = io::load_labels(&gt_dir.join("mask_gt.png"))?;
    let pred_mask = match first_existing(pred_dir, &["labels.png", "mask_gt.png"]) {
        Some(p) => io::load_labels(&p)?,
        None => anyhow::bail!("{}: no labels.png or mask_gt.png", pred_dir.display()),
    };
    let gt_disp = first_existing(gt_dir, &["disp_gt.png"])
        .map(|p| io::load_disparity(&p))
        .transpose()?;
    let pred_disp = first_existing(pred_dir, &["d1.png", "disp_gt.png"])
        .map(|p| io::load_disparity(&p))
        .transpose()?;
    let disparity: Option<(&DisparityMap, &DisparityMap)> =
        pred_disp.as_ref().zip(gt_disp.as_ref());
    let input = FrameInput {
        disparity,
        pred: &pred_mask,
        gt: &gt_mask,
        runtime_ms: manifest_runtime(pred_dir),
    };
    Ok(evaluate_frame(name, input, eps, iou_min)?)
}

/// Prints one JSON line per frame and a final aggregate line, mirrored to
/// `out` when given.
pub(crate) fn report(frames: &[FrameMetrics], out: Option<&Path>) -> anyhow::Result<Aggregate> {
    let agg = Aggregate::from_frames(frames);
    let mut lines: Vec<String> = frames.iter().map(|f| f.to_json().to_string()).collect();
    lines.push(agg.to_json().to_string());
    let text = lines.join("\n") + "\n";
    std::io::stdout().write_all(text.as_bytes())?;
    if let Some(path) = out {
        fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(agg)
}

pub fn run(
    pred_dir: &Path,
    gt_dir: &Path,
    eps: &[f64],
    iou_min: f64,
    out: Option<&Path>,
) -> anyhow::Result<Outcome> {
    anyhow::ensure!(
        pred_dir.is_dir(),
        "{}: directory not found",
        pred_dir.display()
    );
    anyhow::ensure!(gt_dir.is_dir(), "{}: directory not found", gt_dir.display());
    let gt_names = frame_dirs(gt_dir)?;
    anyhow::ensure!(!gt_names.is_empty(), "{}: no frames", gt_dir.display());
    let mut frames = Vec::new();
    for name in &gt_names {
        let pred = pred_dir.join(name);
        if !pred.is_dir() {
            eprintln!("warning: no prediction for frame {name}, skipped");
            continue;
        }
        frames.push(score_frame(name, &pred, &gt_dir.join(name), eps, iou_min)?);
    }
    for name in frame_dirs(pred_dir)? {
        if !gt_names.contains(&name) {
            eprintln!("warning: no ground truth for frame {name}, skipped");
        }
    }
    anyhow::ensure!(
        !frames.is_empty(),
        "no frame has both prediction and ground truth"
    );
    report(&frames, out)?;
    Ok(Outcome::Ok)
}
