use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use pothole_core::eval::{evaluate_frame, FrameInput, FrameMetrics};
use pothole_core::pipeline::run_detection;
use pothole_core::{io, DisparityMap, Error, LabelMap, PipelineConfig, INVALID_DISPARITY};
use rayon::prelude::*;

use crate::evaluate::{frame_dirs, report};
use crate::Outcome;

struct BenchFrame {
    metrics: FrameMetrics,
    stages: Vec<(&'static str, f64)>,
    degenerate: bool,
}

fn bench_frame(
    name: &str,
    dir: &Path,
    cfg: &PipelineConfig,
    eps: &[f64],
) -> anyhow::Result<BenchFrame> {
    let left = io::load_gray_image(&dir.join("left.png"))?;
    let right = io::load_gray_image(&dir.join("right.png"))?;
    let gt_mask = io::load_labels(&dir.join("mask_gt.png"))?;
    let gt_disp_path = dir.join("disp_gt.png");
    let gt_disp = if gt_disp_path.is_file() {
        Some(io::load_disparity(&gt_disp_path)?)
    } else {
        None
    };
    let start = Instant::now();
    let (d1, labels, stages, degenerate) = match run_detection(&left, &right, cfg) {
        Ok(det) => {
            let stages = det.stages.iter().map(|s| (s.stage, s.ms)).collect();
            (det.d1, det.labels, stages, false)
        }
        Err(Error::DegenerateFit(msg)) => {
            eprintln!("warning: {name}: degenerate road fit: {msg}");
            let (w, h) = left.dims();
            let d1 = DisparityMap::filled(w, h, INVALID_DISPARITY)?;
            (d1, LabelMap::new(w, h, vec![0; w * h])?, Vec::new(), true)
        }
        Err(e) => return Err(e.into()),
    };
    let input = FrameInput {
        disparity: gt_disp.as_ref().map(|g| (&d1, g)),
        pred: &labels,
        gt: &gt_mask,
        runtime_ms: Some(start.elapsed().as_secs_f64() * 1e3),
    };
    Ok(BenchFrame {
        metrics: evaluate_frame(name, input, eps, cfg.iou_min)?,
        stages,
        degenerate,
    })
}

pub fn run(
    dataset_dir: &Path,
    cfg: &PipelineConfig,
    eps: &[f64],
    out: Option<&Path>,
) -> anyhow::Result<Outcome> {
    anyhow::ensure!(
        dataset_dir.is_dir(),
        "{}: directory not found",
        dataset_dir.display()
    );
    cfg.validate()?;
    let names = frame_dirs(dataset_dir)?;
    anyhow::ensure!(!names.is_empty(), "{}: no frames", dataset_dir.display());
    let frames = names
        .par_iter()
        .map(|n| bench_frame(n, &dataset_dir.join(n), cfg, eps))
        .collect::<anyhow::Result<Vec<_>>>()?;

    let mut stage_sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for f in &frames {
        for &(stage, ms) in &f.stages {
            let e = stage_sums.entry(stage).or_default();
            e.0 += ms;
            e.1 += 1;
        }
    }
    for (stage, (sum, n)) in &stage_sums {
        eprintln!("stage {stage:<10} mean {:>9.1} ms", sum / *n as f64);
    }
    let metrics: Vec<FrameMetrics> = frames.iter().map(|f| f.metrics.clone()).collect();
    report(&metrics, out)?;
    let degenerate = frames.iter().filter(|f| f.degenerate).count();
    if degenerate > 0 {
        eprintln!("{degenerate} frame(s) had a degenerate road fit");
        return Ok(Outcome::Degenerate);
    }
    Ok(Outcome::Ok)
}
