use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, GrayImage, ViewMask};

/// Matching costs indexed `(v, u, d)` with `d` in `[0, d_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    width: usize,
    height: usize,
    d_max: usize,
    costs: Vec<f32>,
}

impl CostVolume {
    pub fn new(width: usize, height: usize, d_max: usize, costs: Vec<f32>) -> Result<Self> {
        if costs.len() != width * height * (d_max + 1) {
            return Err(Error::InvalidParameter(format!(
                "cost buffer holds {} entries, {width}x{height}x{} needs {}",
                costs.len(),
                d_max + 1,
                width * height * (d_max + 1)
            )));
        }
        if let Some(c) = costs.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "cost {c} is not finite and >= 0"
            )));
        }
        Ok(Self {
            width,
            height,
            d_max,
            costs,
        })
    }

    pub(crate) fn from_raw(width: usize, height: usize, d_max: usize, costs: Vec<f32>) -> Self {
        debug_assert_eq!(costs.len(), width * height * (d_max + 1));
        Self {
            width,
            height,
            d_max,
            costs,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    /// Number of disparity levels, `d_max + 1`.
    pub fn levels(&self) -> usize {
        self.d_max + 1
    }

    pub fn costs(&self) -> &[f32] {
        &self.costs
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize, d: usize) -> f32 {
        self.costs[(v * self.width + u) * self.levels() + d]
    }

    /// Costs of all disparities at pixel `(u, v)`.
    #[inline]
    pub fn pixel(&self, u: usize, v: usize) -> &[f32] {
        let n = self.levels();
        let i = (v * self.width + u) * n;
        &self.costs[i..i + n]
    }
}

/// Census bit strings: bit set where the neighbor is darker than the center.
/// Window samples beyond the border are clamped to the nearest edge pixel.
pub fn census_transform(img: &GrayImage, window: usize) -> Vec<u64> {
    let (w, h) = img.dims();
    let r = (window / 2) as isize;
    let mut out = vec![0u64; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(v, row)| {
        for (u, bits) in row.iter_mut().enumerate() {
            let center = img.get(u, v);
            let mut b = 0u64;
            for dy in -r..=r {
                let y = (v as isize + dy).clamp(0, h as isize - 1) as usize;
                for dx in -r..=r {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let x = (u as isize + dx).clamp(0, w as isize - 1) as usize;
                    b = (b << 1) | u64::from(img.get(x, y) < center);
                }
            }
            *bits = b;
        }
    });
    out
}

/// Census/Hamming cost volume between `left` and the warped right image.
pub fn census_cost_volume(
    left: &GrayImage,
    right_warped: &GrayImage,
    d_max: usize,
    window: usize,
) -> Result<CostVolume> {
    census_cost_volume_masked(left, right_warped, None, d_max, window)
}

/// As [`census_cost_volume`]; right-image samples whose census window
/// touches a pixel flagged out of view in `view` get the maximum cost
/// `window^2 - 1`, as do samples left of the image.
pub fn census_cost_volume_masked(
    left: &GrayImage,
    right_warped: &GrayImage,
    view: Option<&ViewMask>,
    d_max: usize,
    window: usize,
) -> Result<CostVolume> {
    ensure_same_dims(left.dims(), right_warped.dims())?;
    if let Some(m) = view {
        ensure_same_dims(left.dims(), m.dims())?;
    }
    if window.is_multiple_of(2) || !(3..=7).contains(&window) {
        return Err(Error::InvalidParameter(format!(
            "census window {window} must be 3, 5 or 7"
        )));
    }
    let (w, h) = left.dims();
    if d_max >= w {
        return Err(Error::InvalidParameter(format!(
            "d_max {d_max} must be below the image width {w}"
        )));
    }
    let cl = census_transform(left, window);
    let cr = census_transform(right_warped, window);
    // A sample is usable only if its whole census window is in view.
    let usable: Option<Vec<bool>> = view.map(|m| {
        let r = (window / 2) as isize;
        (0..w * h)
            .map(|i| {
                let (u, v) = ((i % w) as isize, (i / w) as isize);
                (-r..=r).all(|dy| {
                    let y = (v + dy).clamp(0, h as isize - 1) as usize;
                    (-r..=r).all(|dx| m.in_view((u + dx).clamp(0, w as isize - 1) as usize, y))
                })
            })
            .collect()
    });
    let max_cost = (window * window - 1) as f32;
    let n = d_max + 1;
    let mut costs = vec![0f32; w * h * n];
    costs
        .par_chunks_mut(w * n)
        .enumerate()
        .for_each(|(v, row)| {
            for u in 0..w {
                let cell = &mut row[u * n..(u + 1) * n];
                let bl = cl[v * w + u];
                for (d, c) in cell.iter_mut().enumerate() {
                    *c = if d > u || usable.as_ref().is_some_and(|m| !m[v * w + u - d]) {
                        max_cost
                    } else {
                        (bl ^ cr[v * w + u - d]).count_ones() as f32
                    };
                }
            }
        });
    Ok(CostVolume::from_raw(w, h, d_max, costs))
}
