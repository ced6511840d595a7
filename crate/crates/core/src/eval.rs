//! Disparity and detection accuracy metrics.

use std::collections::HashMap;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, DisparityMap, LabelMap};

fn overlap(est: &DisparityMap, gt: &DisparityMap) -> Result<Vec<f64>> {
    ensure_same_dims(gt.dims(), est.dims())?;
    let diffs: Vec<f64> = est
        .values()
        .iter()
        .zip(gt.values())
        .filter(|(e, g)| crate::raster::is_valid(**e) && crate::raster::is_valid(**g))
        .map(|(e, g)| e - g)
        .collect();
    if diffs.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(diffs)
}

/// Percentage of pixels valid in both maps whose error exceeds `eps`.
pub fn pep(est: &DisparityMap, gt: &DisparityMap, eps: f64) -> Result<f64> {
    let diffs = overlap(est, gt)?;
    let bad = diffs.iter().filter(|d| d.abs() > eps).count();
    Ok(100.0 * bad as f64 / diffs.len() as f64)
}

/// Root-mean-square error over pixels valid in both maps.
pub fn rmse(est: &DisparityMap, gt: &DisparityMap) -> Result<f64> {
    let diffs = overlap(est, gt)?;
    Ok((diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt())
}

/// Number of pixels valid in both maps.
pub fn overlap_count(est: &DisparityMap, gt: &DisparityMap) -> Result<usize> {
    overlap(est, gt).map(|d| d.len())
}

/// `2PR / (P + R)`, 0 when both are 0.
pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn add(&mut self, other: &Self) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    pub fn metrics(&self) -> PixelMetrics {
        let (precision, dp) = ratio(self.tp, self.tp + self.fp);
        let (recall, dr) = ratio(self.tp, self.tp + self.fn_);
        let (accuracy, da) = ratio(self.tp + self.tn, self.total());
        PixelMetrics {
            counts: *self,
            precision,
            recall,
            accuracy,
            fscore: f_score(precision, recall),
            degenerate: dp || dr || da,
        }
    }
}

/// Pixel-level scores. Ratios with a zero denominator are 0 and set
/// `degenerate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PixelMetrics {
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub fscore: f64,
    pub degenerate: bool,
}

/// Confusion counts of `pred != 0` against `gt != 0` over all pixels.
pub fn pixel_metrics(pred: &LabelMap, gt: &LabelMap) -> Result<PixelMetrics> {
    ensure_same_dims(gt.dims(), pred.dims())?;
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        match (p != 0, g != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c.metrics())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct InstanceReport {
    /// Predicted instances matched to a ground-truth instance.
    pub correct: usize,
    /// Predicted instances left unmatched.
    pub incorrect: usize,
    /// Ground-truth instances left unmatched.
    pub misdetection: usize,
    /// `(pred, gt, iou)` for every match.
    pub matches: Vec<(u32, u32, f64)>,
    pub unmatched_gt: Vec<u32>,
}

impl InstanceReport {
    pub fn predicted(&self) -> usize {
        self.correct + self.incorrect
    }
}

/// Greedy one-to-one matching by descending IoU among pairs with
/// `IoU >= iou_min`.
pub fn instance_metrics(pred: &LabelMap, gt: &LabelMap, iou_min: f64) -> Result<InstanceReport> {
    ensure_same_dims(gt.dims(), pred.dims())?;
    let mut area_p: HashMap<u32, u64> = HashMap::new();
    let mut area_g: HashMap<u32, u64> = HashMap::new();
    let mut inter: HashMap<(u32, u32), u64> = HashMap::new();
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        if p != 0 {
            *area_p.entry(p).or_default() += 1;
        }
        if g != 0 {
            *area_g.entry(g).or_default() += 1;
        }
        if p != 0 && g != 0 {
            *inter.entry((p, g)).or_default() += 1;
        }
    }
    let mut pairs: Vec<(u32, u32, f64)> = inter
        .iter()
        .map(|(&(p, g), &i)| (p, g, i as f64 / (area_p[&p] + area_g[&g] - i) as f64))
        .filter(|&(_, _, iou)| iou >= iou_min)
        .collect();
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

    let mut used_p = std::collections::HashSet::new();
    let mut used_g = std::collections::HashSet::new();
    let mut matches = Vec::new();
    for (p, g, iou) in pairs {
        if used_p.contains(&p) || used_g.contains(&g) {
            continue;
        }
        used_p.insert(p);
        used_g.insert(g);
        matches.push((p, g, iou));
    }
    let mut unmatched_gt: Vec<u32> = area_g
        .keys()
        .copied()
        .filter(|g| !used_g.contains(g))
        .collect();
    unmatched_gt.sort_unstable();
    Ok(InstanceReport {
        correct: matches.len(),
        incorrect: area_p.len() - matches.len(),
        misdetection: unmatched_gt.len(),
        matches,
        unmatched_gt,
    })
}

/// Metrics of one evaluated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMetrics {
    pub frame: String,
    /// `(eps, pep)` pairs; empty when no disparity pair was evaluated.
    pub pep: Vec<(f64, f64)>,
    pub rmse: Option<f64>,
    /// Pixels entering `pep`/`rmse`.
    pub overlap: usize,
    pub pixel: PixelMetrics,
    pub instances: InstanceReport,
    pub runtime_ms: Option<f64>,
}

/// Inputs of one frame to score.
#[derive(Debug, Clone, Copy)]
pub struct FrameInput<'a> {
    /// Estimated and ground-truth disparities, when both exist.
    pub disparity: Option<(&'a DisparityMap, &'a DisparityMap)>,
    pub pred: &'a LabelMap,
    pub gt: &'a LabelMap,
    pub runtime_ms: Option<f64>,
}

/// Scores one frame at every tolerance in `eps`.
pub fn evaluate_frame(
    frame: &str,
    input: FrameInput<'_>,
    eps: &[f64],
    iou_min: f64,
) -> Result<FrameMetrics> {
    let (pep_values, rmse_value, overlap) = match input.disparity {
        Some((est, gt)) => match overlap_count(est, gt) {
            Ok(overlap) => {
                let pep_values = eps
                    .iter()
                    .map(|&e| Ok((e, pep(est, gt, e)?)))
                    .collect::<Result<Vec<_>>>()?;
                (pep_values, Some(rmse(est, gt)?), overlap)
            }
            Err(Error::NoOverlap) => (Vec::new(), None, 0),
            Err(e) => return Err(e),
        },
        None => (Vec::new(), None, 0),
    };
    Ok(FrameMetrics {
        frame: frame.to_string(),
        pep: pep_values,
        rmse: rmse_value,
        overlap,
        pixel: pixel_metrics(input.pred, input.gt)?,
        instances: instance_metrics(input.pred, input.gt, iou_min)?,
        runtime_ms: input.runtime_ms,
    })
}

/// Key for an error tolerance: `pep_1` for 1, `pep_0.5` for 0.5.
pub fn pep_key(eps: f64) -> String {
    format!("pep_{eps}")
}

impl FrameMetrics {
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("frame".into(), json!(self.frame));
        for &(eps, p) in &self.pep {
            m.insert(pep_key(eps), json!(p));
        }
        m.insert("rmse".into(), json!(self.rmse));
        m.insert("precision".into(), json!(self.pixel.precision));
        m.insert("recall".into(), json!(self.pixel.recall));
        m.insert("accuracy".into(), json!(self.pixel.accuracy));
        m.insert("fscore".into(), json!(self.pixel.fscore));
        m.insert("correct".into(), json!(self.instances.correct));
        m.insert("incorrect".into(), json!(self.instances.incorrect));
        m.insert("misdetection".into(), json!(self.instances.misdetection));
        m.insert("runtime_ms".into(), json!(self.runtime_ms));
        m.insert("degenerate".into(), json!(self.pixel.degenerate));
        Value::Object(m)
    }
}

/// Pooled metrics over frames: confusion counts and instance counts are
/// summed, `pep` is pooled over all overlapping pixels, `rmse` pools squared
/// errors, and runtime is the frame mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub frames: usize,
    pub pep: Vec<(f64, f64)>,
    pub rmse: Option<f64>,
    pub pixel: PixelMetrics,
    pub correct: usize,
    pub incorrect: usize,
    pub misdetection: usize,
    pub runtime_ms: Option<f64>,
}

impl Aggregate {
    pub fn from_frames(frames: &[FrameMetrics]) -> Self {
        let mut counts = ConfusionCounts::default();
        let (mut correct, mut incorrect, mut mis) = (0, 0, 0);
        for f in frames {
            counts.add(&f.pixel.counts);
            correct += f.instances.correct;
            incorrect += f.instances.incorrect;
            mis += f.instances.misdetection;
        }
        let with_disp: Vec<&FrameMetrics> = frames.iter().filter(|f| f.overlap > 0).collect();
        let q: usize = with_disp.iter().map(|f| f.overlap).sum();
        let mut pep = Vec::new();
        if let Some(first) = with_disp.first() {
            for (k, &(eps, _)) in first.pep.iter().enumerate() {
                let bad: f64 = with_disp
                    .iter()
                    .map(|f| f.pep[k].1 * f.overlap as f64)
                    .sum();
                pep.push((eps, bad / q as f64));
            }
        }
        let rmse = (q > 0).then(|| {
            let sq: f64 = with_disp
                .iter()
                .map(|f| f.rmse.unwrap_or(0.0).powi(2) * f.overlap as f64)
                .sum();
            (sq / q as f64).sqrt()
        });
        let times: Vec<f64> = frames.iter().filter_map(|f| f.runtime_ms).collect();
        let runtime_ms =
            (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64);
        Self {
            frames: frames.len(),
            pep,
            rmse,
            pixel: counts.metrics(),
            correct,
            incorrect,
            misdetection: mis,
            runtime_ms,
        }
    }

    /// Correct detections over predicted instances.
    pub fn instance_precision(&self) -> f64 {
        ratio(self.correct as u64, (self.correct + self.incorrect) as u64).0
    }

    /// Correct detections over all outcomes, correct, incorrect and missed.
    pub fn detection_rate(&self) -> f64 {
        ratio(
            self.correct as u64,
            (self.correct + self.incorrect + self.misdetection) as u64,
        )
        .0
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("frame".into(), json!("aggregate"));
        m.insert("frames".into(), json!(self.frames));
        for &(eps, p) in &self.pep {
            m.insert(pep_key(eps), json!(p));
        }
        m.insert("rmse".into(), json!(self.rmse));
        m.insert("precision".into(), json!(self.pixel.precision));
        m.insert("recall".into(), json!(self.pixel.recall));
        m.insert("accuracy".into(), json!(self.pixel.accuracy));
        m.insert("fscore".into(), json!(self.pixel.fscore));
        m.insert("correct".into(), json!(self.correct));
        m.insert("incorrect".into(), json!(self.incorrect));
        m.insert("misdetection".into(), json!(self.misdetection));
        m.insert("detection_rate".into(), json!(self.detection_rate()));
        m.insert("runtime_ms".into(), json!(self.runtime_ms));
        m.insert("degenerate".into(), json!(self.pixel.degenerate));
        Value::Object(m)
    }
}
