//! End-to-end detection on one stereo pair, with per-stage timings.

use std::time::Instant;

use serde::Serialize;

use crate::config::{PipelineConfig, StereoRig};
use crate::error::{Error, Result};
use crate::eval::{pixel_metrics, ConfusionCounts};
use crate::perspective::RowShiftTable;
use crate::raster::{ensure_same_dims, DisparityMap, GrayImage, LabelMap};
use crate::road::{
    fit_road_model, reproject_where, sample_observations, transform_disparity, PointCloud, RoadFit,
    RoadModel,
};
use crate::segment::{
    build_histogram, detect_below, discard_touching, find_road_threshold, pool_superpixels, slic,
    DetectParams, SuperpixelMap, ThresholdResult,
};
use crate::stereo::{match_pair, match_with_shifts, MatchOptions, SgmParams};

/// Wall-clock time of one named stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTime {
    pub stage: &'static str,
    pub ms: f64,
}

#[derive(Debug, Default)]
struct Stopwatch {
    stages: Vec<StageTime>,
}

impl Stopwatch {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.stages.push(StageTime {
            stage,
            ms: start.elapsed().as_secs_f64() * 1e3,
        });
        out
    }
}

/// Everything the pipeline computes for one frame.
#[derive(Debug, Clone)]
pub struct Detection {
    /// Model from the half-resolution unwarped match.
    pub bootstrap: RoadFit,
    /// Model refitted on the warped-pair disparities.
    pub road: RoadFit,
    pub shifts: RowShiftTable,
    pub d1: DisparityMap,
    pub d2: DisparityMap,
    /// Pixels whose transformed disparity was clamped at zero.
    pub clamped: usize,
    pub superpixels: SuperpixelMap,
    pub d3: DisparityMap,
    pub threshold: ThresholdResult,
    pub detect_params: DetectParams,
    pub labels: LabelMap,
    pub potholes: usize,
    pub stages: Vec<StageTime>,
    pub warnings: Vec<String>,
}

impl Detection {
    pub fn total_ms(&self) -> f64 {
        self.stages.iter().map(|s| s.ms).sum()
    }

    /// Re-runs the final thresholding step with another tolerance between
    /// road level and pothole threshold.
    pub fn relabel(&self, delta_pd: f64) -> Result<LabelMap> {
        let labels = detect_below(
            &self.d3,
            &self.superpixels,
            self.threshold.t_r - delta_pd,
            &self.detect_params,
        )?;
        Ok(outside_overlap(
            &labels,
            &self.road.model,
            self.detect_params.border_margin,
        ))
    }
}

/// Drops regions reaching within `margin` pixels of the left band whose
/// correspondences fall outside the right image, judged by the road model.
fn outside_overlap(labels: &LabelMap, model: &RoadModel, margin: usize) -> LabelMap {
    discard_touching(labels, |u, v| {
        (u as f64) < model.disparity_at(u as f64, v as f64) + margin as f64
    })
}

fn road_fit(d1: &DisparityMap, cfg: &PipelineConfig) -> Result<RoadFit> {
    let obs = sample_observations(d1, None).map_err(|e| match e {
        Error::TooFewValid { found, needed } => Error::DegenerateFit(format!(
            "only {found} valid disparities, at least {needed} needed"
        )),
        other => other,
    })?;
    let b = cfg.roll_bracket_deg.to_radians();
    fit_road_model(&obs, (-b, b), cfg.roll_tol, cfg.trim_factor)
}

/// Road model from an unwarped match of the 2x-downsampled pair.
pub fn bootstrap_road(
    left: &GrayImage,
    right: &GrayImage,
    cfg: &PipelineConfig,
) -> Result<RoadFit> {
    ensure_same_dims(left.dims(), right.dims())?;
    let (l, r) = (left.downsample2()?, right.downsample2()?);
    let d_max = (cfg.bootstrap_d_max / 2)
        .min(l.width().saturating_sub(2))
        .max(1);
    let opts = MatchOptions {
        d_max,
        lr_threshold: Some(cfg.lr_threshold),
        ..MatchOptions::from_config(cfg)
    };
    let m = match_with_shifts(
        &l,
        &r,
        &RowShiftTable::zeros(l.height()),
        &SgmParams::from_config(cfg)?,
        &opts,
    )?;
    let fit = road_fit(&m.d1, cfg)?;
    Ok(RoadFit {
        model: fit.model.upscale2(),
        ..fit
    })
}

/// Runs the full detector on a rectified pair.
pub fn run_detection(
    left: &GrayImage,
    right: &GrayImage,
    cfg: &PipelineConfig,
) -> Result<Detection> {
    cfg.validate()?;
    ensure_same_dims(left.dims(), right.dims())?;
    let mut sw = Stopwatch::default();
    let mut warnings = Vec::new();

    let bootstrap = sw.time("bootstrap", || bootstrap_road(left, right, cfg))?;
    let stereo = sw.time("match", || match_pair(left, right, &bootstrap.model, cfg))?;
    let road = sw.time("road_fit", || road_fit(&stereo.d1, cfg))?;
    let transformed = sw.time("transform", || {
        transform_disparity(&stereo.d1, &road.model, cfg.delta_dt)
    })?;
    if transformed.clamped > 0 {
        warnings.push(format!(
            "{} transformed disparities clamped at 0",
            transformed.clamped
        ));
    }
    let d2 = transformed.map;
    let sp = sw.time("slic", || {
        slic(&d2, cfg.superpixels, cfg.compactness, cfg.slic_iterations)
    })?;
    let d3 = sw.time("pool", || pool_superpixels(&d2, &sp))?;
    let threshold = sw.time("threshold", || {
        build_histogram(&d2, cfg.bin_width)
            .and_then(|h| find_road_threshold(&h, cfg.delta_pd, cfg.diagonal_band))
    })?;
    if threshold.degenerate {
        warnings.push("degenerate threshold: transformed disparities form a single cluster".into());
    }
    let params = DetectParams::for_superpixels(
        &sp,
        cfg.border_margin,
        cfg.min_superpixels,
        cfg.connectivity(),
    );
    let labels = sw.time("detect", || {
        detect_below(&d3, &sp, threshold.t_s, &params)
            .map(|l| outside_overlap(&l, &road.model, cfg.border_margin))
    })?;
    let potholes = labels.max_label() as usize;
    Ok(Detection {
        bootstrap,
        road,
        shifts: stereo.shifts,
        d1: stereo.d1,
        d2,
        clamped: transformed.clamped,
        superpixels: sp,
        d3,
        threshold,
        detect_params: params,
        labels,
        potholes,
        stages: sw.stages,
        warnings,
    })
}

/// One point cloud per detected pothole, from the original-pair disparities.
pub fn pothole_clouds(
    d1: &DisparityMap,
    labels: &LabelMap,
    rig: &StereoRig,
) -> Result<Vec<PointCloud>> {
    ensure_same_dims(d1.dims(), labels.dims())?;
    (1..=labels.max_label())
        .map(|k| reproject_where(d1, rig, |u, v| labels.get(u, v) == k))
        .collect()
}

/// Pixel confusion counts pooled over frames for each candidate tolerance.
pub fn sweep_delta_pd(
    frames: &[(&Detection, &LabelMap)],
    candidates: &[f64],
) -> Result<Vec<(f64, ConfusionCounts)>> {
    candidates
        .iter()
        .map(|&delta| {
            let mut total = ConfusionCounts::default();
            for (det, gt) in frames {
                total.add(&pixel_metrics(&det.relabel(delta)?, gt)?.counts);
            }
            Ok((delta, total))
        })
        .collect()
}

/// Candidate with the highest pooled F-score; the smallest wins ties.
pub fn best_delta_pd(sweep: &[(f64, ConfusionCounts)]) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for (delta, counts) in sweep {
        let f = counts.metrics().fscore;
        if best.is_none_or(|(_, bf)| f > bf) {
            best = Some((*delta, f));
        }
    }
    best.map(|(d, _)| d)
}
