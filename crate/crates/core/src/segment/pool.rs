use super::SuperpixelMap;
use crate::error::Result;
use crate::raster::{ensure_same_dims, is_valid, DisparityMap, INVALID_DISPARITY};

/// Replaces every pixel by the mean of the valid values in its superpixel.
/// Superpixels without a valid pixel become invalid.
pub fn pool_superpixels(d2: &DisparityMap, sp: &SuperpixelMap) -> Result<DisparityMap> {
    ensure_same_dims(d2.dims(), sp.labels.dims())?;
    let n = sp.labels.max_label() as usize;
    let mut sum = vec![0.0; n + 1];
    let mut count = vec![0usize; n + 1];
    for (&l, &d) in sp.labels.labels().iter().zip(d2.values()) {
        if is_valid(d) {
            sum[l as usize] += d;
            count[l as usize] += 1;
        }
    }
    let mean: Vec<f64> = sum
        .iter()
        .zip(&count)
        .map(|(&s, &c)| {
            if c > 0 {
                s / c as f64
            } else {
                INVALID_DISPARITY
            }
        })
        .collect();
    let (w, h) = d2.dims();
    let values = sp
        .labels
        .labels()
        .iter()
        .map(|&l| mean[l as usize])
        .collect();
    Ok(DisparityMap::from_raw(w, h, values))
}
