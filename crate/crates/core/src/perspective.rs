//! Per-row horizontal pre-warp that aligns the road in the two views.
//!
//! Each row `v` of the right image is shifted by `kappa(v)`, the smallest road
//! disparity on that row minus a margin `delta_pt`. After the warp, road
//! pixels have a small residual disparity near `delta_pt`, so the stereo
//! search range shrinks to a few tens of pixels regardless of distance.
//!
//! Convention: the left pixel `u` corresponds to right pixel `u - d`. The
//! warped right image is `W(u) = R(u - kappa)`, so a residual disparity
//! `d0` on the warped pair means `d1 = d0 + kappa` on the original pair.

use crate::error::{Error, Result};
use crate::raster::{
    ensure_same_dims, is_valid, DisparityMap, GrayImage, ViewMask, INVALID_DISPARITY,
};
use crate::road::RoadModel;

#[derive(Debug, Clone, PartialEq)]
pub struct RowShiftTable {
    shifts: Vec<f64>,
    delta_pt: f64,
}

impl RowShiftTable {
    pub fn new(shifts: Vec<f64>, delta_pt: f64) -> Result<Self> {
        if let Some(s) = shifts.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "row shift {s} is not finite"
            )));
        }
        Ok(Self { shifts, delta_pt })
    }

    /// All-zero shifts: the warp is the identity.
    pub fn zeros(height: usize) -> Self {
        Self {
            shifts: vec![0.0; height],
            delta_pt: 0.0,
        }
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    pub fn delta_pt(&self) -> f64 {
        self.delta_pt
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }
}

/// `kappa(v) = max(0, min(g(v, 0), g(v, W)) - delta_pt)` with
/// `g(v, x) = a0 + a1 (v cos(phi) - x sin(phi))`. `g` is affine in `x`, so
/// the row minimum sits at one of the two endpoints.
pub fn compute_row_shifts(
    model: &RoadModel,
    width: usize,
    height: usize,
    delta_pt: f64,
) -> Result<RowShiftTable> {
    if width < 2 {
        return Err(Error::ImageTooSmall { width, height });
    }
    if !model.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "road model is not finite: {model:?}"
        )));
    }
    let w = width as f64;
    let shifts = (0..height)
        .map(|v| {
            let v = v as f64;
            let lo = model.disparity_at(0.0, v).min(model.disparity_at(w, v));
            (lo - delta_pt).max(0.0)
        })
        .collect();
    RowShiftTable::new(shifts, delta_pt)
}

fn check_table(img: &GrayImage, table: &RowShiftTable) -> Result<()> {
    if table.len() != img.height() {
        return Err(Error::DimensionMismatch {
            expected: (img.width(), img.height()),
            actual: (img.width(), table.len()),
        });
    }
    Ok(())
}

/// Samples `row` at real position `x` by linear interpolation; `None` when
/// `x` falls outside `[0, len - 1]`.
#[inline]
fn sample(row: &[f32], x: f64) -> Option<f32> {
    let last = (row.len() - 1) as f64;
    if !(0.0..=last).contains(&x) {
        return None;
    }
    let x0 = x.floor() as usize;
    let t = x - x0 as f64;
    if t == 0.0 {
        return Some(row[x0]);
    }
    let (a, b) = (row[x0] as f64, row[x0 + 1] as f64);
    Some((a + t * (b - a)) as f32)
}

fn warp_rows(img: &GrayImage, table: &RowShiftTable, sign: f64) -> Result<(GrayImage, ViewMask)> {
    check_table(img, table)?;
    let (w, h) = img.dims();
    let mut pixels = Vec::with_capacity(w * h);
    let mut in_view = Vec::with_capacity(w * h);
    for v in 0..h {
        let row = img.row(v);
        let k = table.shifts[v];
        for u in 0..w {
            match sample(row, u as f64 + sign * k) {
                Some(x) => {
                    pixels.push(x);
                    in_view.push(true);
                }
                None => {
                    pixels.push(0.0);
                    in_view.push(false);
                }
            }
        }
    }
    Ok((
        GrayImage::new(w, h, pixels)?,
        ViewMask::from_raw(w, h, in_view),
    ))
}

/// `out(u, v) = right(u - kappa(v), v)`. Samples left of the image are 0 and
/// flagged out of view.
pub fn warp_right_image(right: &GrayImage, table: &RowShiftTable) -> Result<(GrayImage, ViewMask)> {
    warp_rows(right, table, -1.0)
}

/// `out(u, v) = left(u + kappa(v), v)`, the mirrored warp used when matching
/// right-to-left. Samples right of the image are 0 and flagged out of view.
pub fn warp_left_image(left: &GrayImage, table: &RowShiftTable) -> Result<(GrayImage, ViewMask)> {
    warp_rows(left, table, 1.0)
}

/// `D1(u, v) = D0(u, v) + kappa(v)`; invalid pixels stay invalid.
pub fn restore_disparity(d0: &DisparityMap, table: &RowShiftTable) -> Result<DisparityMap> {
    ensure_same_dims((d0.width(), table.len()), d0.dims())?;
    let w = d0.width();
    let values = d0
        .values()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if is_valid(d) {
                d + table.shifts[i / w]
            } else {
                INVALID_DISPARITY
            }
        })
        .collect();
    Ok(DisparityMap::from_raw(w, d0.height(), values))
}
