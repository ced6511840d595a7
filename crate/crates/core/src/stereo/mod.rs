//! Semi-global matching on a perspective-warped stereo pair.
//!
//! Census/Hamming matching costs, 8-direction path aggregation, winner-takes-
//! all with parabola refinement, and a left-right consistency check that
//! matches the mirrored pair through the same code path.

mod aggregate;
mod census;
mod select;

pub use aggregate::aggregate_costs;
pub use census::{census_cost_volume, census_cost_volume_masked, census_transform, CostVolume};
pub use select::{left_right_check, parabola_offset, refine_with_raw_costs, select_disparity};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::perspective::{
    compute_row_shifts, restore_disparity, warp_left_image, warp_right_image, RowShiftTable,
};
use crate::raster::{ensure_same_dims, is_valid, DisparityMap, GrayImage, INVALID_DISPARITY};
use crate::road::RoadModel;

pub const EIGHT_DIRECTIONS: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (-1, -1),
    (1, -1),
    (-1, 1),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SgmParams {
    /// Penalty for a one-level disparity change between path neighbors.
    pub lambda1: f64,
    /// Penalty for larger jumps.
    pub lambda2: f64,
    /// Scan directions `r`, each component in `{-1, 0, 1}`.
    pub directions: Vec<(isize, isize)>,
    /// Census window side.
    pub window: usize,
}

impl SgmParams {
    /// Eight-direction parameters.
    pub fn new(lambda1: f64, lambda2: f64, window: usize) -> Result<Self> {
        let p = Self {
            lambda1,
            lambda2,
            directions: EIGHT_DIRECTIONS.to_vec(),
            window,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_config(cfg: &PipelineConfig) -> Result<Self> {
        Self::new(cfg.lambda1, cfg.lambda2, cfg.census_window)
    }

    pub fn with_directions(mut self, directions: Vec<(isize, isize)>) -> Result<Self> {
        self.directions = directions;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda1 <= self.lambda2 && self.lambda2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "penalties must satisfy 0 <= lambda1 <= lambda2, got {} and {}",
                self.lambda1, self.lambda2
            )));
        }
        if self.directions.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one scan direction is required".into(),
            ));
        }
        if let Some(r) = self
            .directions
            .iter()
            .find(|&&(dx, dy)| dx.abs() > 1 || dy.abs() > 1 || (dx, dy) == (0, 0))
        {
            return Err(Error::InvalidParameter(format!(
                "scan direction {r:?} is not a unit step"
            )));
        }
        if ![3, 5, 7].contains(&self.window) {
            return Err(Error::InvalidParameter(format!(
                "census window {} must be 3, 5 or 7",
                self.window
            )));
        }
        Ok(())
    }
}

/// Disparities on the warped pair (`d0`) and the original pair (`d1`).
#[derive(Debug, Clone, PartialEq)]
pub struct StereoMatch {
    pub d0: DisparityMap,
    pub d1: DisparityMap,
    pub shifts: RowShiftTable,
}

/// Matching options beyond the SGM parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    pub d_max: usize,
    /// Left-right tolerance in pixels; `None` disables the check.
    pub lr_threshold: Option<f64>,
    pub uniqueness: f64,
    /// Window radius of the raw-cost subpixel re-estimate; `None` keeps the
    /// refinement on aggregated costs.
    pub refine_radius: Option<usize>,
}

impl MatchOptions {
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        Self {
            d_max: cfg.d_max,
            lr_threshold: Some(cfg.lr_threshold),
            uniqueness: cfg.uniqueness,
            refine_radius: (cfg.subpixel_radius > 0).then_some(cfg.subpixel_radius),
        }
    }
}

fn sgm(
    base: &GrayImage,
    other: &GrayImage,
    view: &crate::raster::ViewMask,
    params: &SgmParams,
    opts: &MatchOptions,
) -> Result<DisparityMap> {
    let vol = census_cost_volume_masked(base, other, Some(view), opts.d_max, params.window)?;
    let agg = aggregate_costs(&vol, params);
    let mut d = select_disparity(&agg, opts.uniqueness);
    if let Some(r) = opts.refine_radius {
        d = refine_with_raw_costs(&d, &vol, r)?;
    }
    Ok(invalidate_flat(&d, base, params.window))
}

/// Invalidates pixels whose census window in `img` is constant. Their costs
/// are zero at every disparity, so any winner is imported from the path
/// penalties of distant pixels.
pub fn invalidate_flat(d: &DisparityMap, img: &GrayImage, window: usize) -> DisparityMap {
    let (w, h) = img.dims();
    let r = (window / 2) as isize;
    let values = (0..w * h)
        .map(|i| {
            let (u, v) = ((i % w) as isize, (i / w) as isize);
            let c = img.get(u as usize, v as usize);
            let flat = (-r..=r).all(|dy| {
                (-r..=r).all(|dx| {
                    let x = (u + dx).clamp(0, w as isize - 1) as usize;
                    let y = (v + dy).clamp(0, h as isize - 1) as usize;
                    img.get(x, y) == c
                })
            });
            if flat {
                INVALID_DISPARITY
            } else {
                d.values()[i]
            }
        })
        .collect();
    DisparityMap::from_raw(w, h, values)
}

/// Matches `left` against `right` pre-warped by `shifts`.
pub fn match_with_shifts(
    left: &GrayImage,
    right: &GrayImage,
    shifts: &RowShiftTable,
    params: &SgmParams,
    opts: &MatchOptions,
) -> Result<StereoMatch> {
    ensure_same_dims(left.dims(), right.dims())?;
    params.validate()?;
    let left_ref = || -> Result<DisparityMap> {
        let (warped, view) = warp_right_image(right, shifts)?;
        sgm(left, &warped, &view, params, opts)
    };
    let d0 = match opts.lr_threshold {
        None => left_ref()?,
        Some(thr) => {
            // Right-referenced match: mirroring both views turns "left pixel
            // u - d" into the same "base u, other u - d" geometry.
            let right_ref = || -> Result<DisparityMap> {
                let (warped, view) = warp_left_image(left, shifts)?;
                let d = sgm(
                    &right.flip_horizontal(),
                    &warped.flip_horizontal(),
                    &view.flip_horizontal(),
                    params,
                    opts,
                )?;
                Ok(d.flip_horizontal())
            };
            let (dl, dr) = rayon::join(left_ref, right_ref);
            let (dl, dr) = (dl?, dr?);
            let checked = left_right_check(
                &restore_disparity(&dl, shifts)?,
                &restore_disparity(&dr, shifts)?,
                thr,
            )?;
            let values = dl
                .values()
                .iter()
                .zip(checked.values())
                .map(|(&d, &c)| if is_valid(c) { d } else { INVALID_DISPARITY })
                .collect();
            DisparityMap::from_raw(dl.width(), dl.height(), values)
        }
    };
    let d1 = restore_disparity(&d0, shifts)?;
    Ok(StereoMatch {
        d0,
        d1,
        shifts: shifts.clone(),
    })
}

/// Full warped-pair match: row shifts from `model`, warp, SGM, left-right
/// check, and restoration to original-pair disparities.
pub fn match_pair(
    left: &GrayImage,
    right: &GrayImage,
    model: &RoadModel,
    config: &PipelineConfig,
) -> Result<StereoMatch> {
    ensure_same_dims(left.dims(), right.dims())?;
    let shifts = compute_row_shifts(model, left.width(), left.height(), config.delta_pt)?;
    let params = SgmParams::from_config(config)?;
    match_with_shifts(
        left,
        right,
        &shifts,
        &params,
        &MatchOptions::from_config(config),
    )
}
