//! Pipeline configuration and the flat `key=value` config file format.
//!
//! Keys are exactly the field names of [`PipelineConfig`]. Blank lines and
//! lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Pixel adjacency used by connected-component labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            4 => Some(Self::Four),
            8 => Some(Self::Eight),
            _ => None,
        }
    }

    pub fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Self::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
            Self::Eight => &[
                (-1, -1),
                (0, -1),
                (1, -1),
                (-1, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1),
            ],
        }
    }
}

/// Pinhole stereo rig used for reprojection. Focal length and principal
/// point in pixels, baseline in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StereoRig {
    pub focal: f64,
    pub baseline: f64,
    pub cu: f64,
    pub cv: f64,
}

impl StereoRig {
    pub fn new(focal: f64, baseline: f64, cu: f64, cv: f64) -> Result<Self> {
        let rig = Self {
            focal,
            baseline,
            cu,
            cv,
        };
        rig.validate()?;
        Ok(rig)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal > 0.0 && self.focal.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "focal length {} must be > 0",
                self.focal
            )));
        }
        if !(self.baseline > 0.0 && self.baseline.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "baseline {} must be > 0",
                self.baseline
            )));
        }
        if !(self.cu.is_finite() && self.cv.is_finite()) {
            return Err(Error::InvalidParameter(
                "principal point must be finite".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    /// Residual road disparity left after the perspective warp.
    pub delta_pt: f64,
    /// Offset added by the disparity transformation.
    pub delta_dt: f64,
    /// Tolerance between the road level and the pothole threshold.
    pub delta_pd: f64,
    /// Disparity search range of the warped-pair match.
    pub d_max: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Requested SLIC superpixel count.
    pub superpixels: usize,
    pub compactness: f64,
    pub border_margin: usize,
    /// 4 or 8.
    pub connectivity: u8,

    pub census_window: usize,
    pub slic_iterations: usize,
    /// Left-right consistency tolerance in pixels.
    pub lr_threshold: f64,
    /// Relative margin the best cost must keep over the best non-adjacent
    /// disparity; ties are always rejected.
    pub uniqueness: f64,
    /// Radius of the raw-cost window used to re-estimate subpixel offsets;
    /// 0 keeps the parabola on aggregated costs.
    pub subpixel_radius: usize,
    /// Search range of the unwarped half-resolution match that seeds the road
    /// model, in full-resolution pixels.
    pub bootstrap_d_max: usize,
    /// Roll search bracket is `[-roll_bracket_deg, +roll_bracket_deg]`.
    pub roll_bracket_deg: f64,
    /// Golden-section termination width, radians.
    pub roll_tol: f64,
    /// Observations with residual above `trim_factor` x RMS are dropped before
    /// the refit. Zero disables trimming.
    pub trim_factor: f64,
    /// Half-width of the band around the histogram diagonal kept for
    /// clustering.
    pub diagonal_band: f64,
    pub bin_width: f64,
    pub min_superpixels: usize,
    pub iou_min: f64,

    pub focal: f64,
    pub baseline: f64,
    /// Principal point; the image center when unset.
    pub principal_u: Option<f64>,
    pub principal_v: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            delta_pt: 5.0,
            delta_dt: 30.0,
            delta_pd: 2.36,
            d_max: 24,
            lambda1: 8.0,
            lambda2: 32.0,
            superpixels: 1200,
            compactness: 0.5,
            border_margin: 5,
            connectivity: 8,
            census_window: 5,
            slic_iterations: 10,
            lr_threshold: 1.0,
            uniqueness: 0.0,
            subpixel_radius: 2,
            bootstrap_d_max: 128,
            roll_bracket_deg: 15.0,
            roll_tol: 1e-4,
            trim_factor: 3.0,
            diagonal_band: 3.0,
            bin_width: 0.125,
            min_superpixels: 2,
            iou_min: 0.5,
            focal: 700.0,
            baseline: 0.12,
            principal_u: None,
            principal_v: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse::<T>()
        .map_err(|_| format!("cannot parse value {value:?} for key {key}"))
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.delta_pt >= 0.0) {
            return bad(format!("delta_pt = {} must be >= 0", self.delta_pt));
        }
        if !(self.delta_dt > 0.0) {
            return bad(format!("delta_dt = {} must be > 0", self.delta_dt));
        }
        if !(self.delta_pd > 0.0) {
            return bad(format!("delta_pd = {} must be > 0", self.delta_pd));
        }
        if self.d_max < 1 || self.bootstrap_d_max < 2 {
            return bad("d_max must be >= 1 and bootstrap_d_max >= 2".into());
        }
        if !(self.lambda1 > 0.0 && self.lambda1 <= self.lambda2) {
            return bad(format!(
                "penalties must satisfy 0 < lambda1 <= lambda2, got {} and {}",
                self.lambda1, self.lambda2
            ));
        }
        if self.superpixels < 4 {
            return bad(format!("superpixels = {} must be >= 4", self.superpixels));
        }
        if !(self.compactness > 0.0) {
            return bad("compactness must be > 0".into());
        }
        if Connectivity::from_number(self.connectivity).is_none() {
            return bad(format!(
                "connectivity must be 4 or 8, got {}",
                self.connectivity
            ));
        }
        if ![3, 5, 7].contains(&self.census_window) {
            return bad(format!(
                "census_window must be 3, 5 or 7, got {}",
                self.census_window
            ));
        }
        if !(self.lr_threshold >= 0.0 && self.uniqueness >= 0.0) {
            return bad("lr_threshold and uniqueness must be >= 0".into());
        }
        if !(self.roll_bracket_deg > 0.0 && self.roll_bracket_deg <= 45.0) {
            return bad("roll_bracket_deg must lie in (0, 45]".into());
        }
        if !(self.roll_tol > 0.0) {
            return bad("roll_tol must be > 0".into());
        }
        if !(self.trim_factor >= 0.0) {
            return bad("trim_factor must be >= 0".into());
        }
        if !(self.diagonal_band > 0.0 && self.bin_width > 0.0) {
            return bad("diagonal_band and bin_width must be > 0".into());
        }
        if !(self.iou_min > 0.0 && self.iou_min <= 1.0) {
            return bad("iou_min must lie in (0, 1]".into());
        }
        if !(self.focal > 0.0 && self.baseline > 0.0) {
            return bad("focal and baseline must be > 0".into());
        }
        Ok(())
    }

    pub fn connectivity(&self) -> Connectivity {
        Connectivity::from_number(self.connectivity).unwrap_or(Connectivity::Eight)
    }

    pub fn rig_for(&self, width: usize, height: usize) -> StereoRig {
        StereoRig {
            focal: self.focal,
            baseline: self.baseline,
            cu: self.principal_u.unwrap_or((width as f64 - 1.0) / 2.0),
            cv: self.principal_v.unwrap_or((height as f64 - 1.0) / 2.0),
        }
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let value = value.trim();
        match key.trim() {
            "delta_pt" => self.delta_pt = parse(key, value)?,
            "delta_dt" => self.delta_dt = parse(key, value)?,
            "delta_pd" => self.delta_pd = parse(key, value)?,
            "d_max" => self.d_max = parse(key, value)?,
            "lambda1" => self.lambda1 = parse(key, value)?,
            "lambda2" => self.lambda2 = parse(key, value)?,
            "superpixels" => self.superpixels = parse(key, value)?,
            "compactness" => self.compactness = parse(key, value)?,
            "border_margin" => self.border_margin = parse(key, value)?,
            "connectivity" => self.connectivity = parse(key, value)?,
            "census_window" => self.census_window = parse(key, value)?,
            "slic_iterations" => self.slic_iterations = parse(key, value)?,
            "lr_threshold" => self.lr_threshold = parse(key, value)?,
            "uniqueness" => self.uniqueness = parse(key, value)?,
            "subpixel_radius" => self.subpixel_radius = parse(key, value)?,
            "bootstrap_d_max" => self.bootstrap_d_max = parse(key, value)?,
            "roll_bracket_deg" => self.roll_bracket_deg = parse(key, value)?,
            "roll_tol" => self.roll_tol = parse(key, value)?,
            "trim_factor" => self.trim_factor = parse(key, value)?,
            "diagonal_band" => self.diagonal_band = parse(key, value)?,
            "bin_width" => self.bin_width = parse(key, value)?,
            "min_superpixels" => self.min_superpixels = parse(key, value)?,
            "iou_min" => self.iou_min = parse(key, value)?,
            "focal" => self.focal = parse(key, value)?,
            "baseline" => self.baseline = parse(key, value)?,
            "principal_u" => self.principal_u = Some(parse(key, value)?),
            "principal_v" => self.principal_v = Some(parse(key, value)?),
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Parses a config file body on top of the defaults and validates it.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                message: format!("expected key=value, got {line:?}"),
            })?;
            cfg.set(key, value).map_err(|message| Error::Config {
                line: i + 1,
                message,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let json = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(map) = json {
            // serde_json's map is sorted; emit in declaration order instead.
            for key in FIELD_ORDER {
                match map.get(*key) {
                    Some(serde_json::Value::Null) | None => {}
                    Some(v) => {
                        let _ = writeln!(out, "{key}={v}");
                    }
                }
            }
        }
        out
    }
}

const FIELD_ORDER: &[&str] = &[
    "delta_pt",
    "delta_dt",
    "delta_pd",
    "d_max",
    "lambda1",
    "lambda2",
    "superpixels",
    "compactness",
    "border_margin",
    "connectivity",
    "census_window",
    "slic_iterations",
    "lr_threshold",
    "uniqueness",
    "subpixel_radius",
    "bootstrap_d_max",
    "roll_bracket_deg",
    "roll_tol",
    "trim_factor",
    "diagonal_band",
    "bin_width",
    "min_superpixels",
    "iou_min",
    "focal",
    "baseline",
    "principal_u",
    "principal_v",
];
