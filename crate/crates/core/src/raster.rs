//! Row-major rasters shared by every pipeline stage.

use crate::error::{Error, Result};

/// Marker stored in a [`DisparityMap`] for pixels without an estimate.
///
/// Valid disparities are never negative, so any negative sentinel is
/// unambiguous. Always test with [`is_valid`] rather than comparing floats.
pub const INVALID_DISPARITY: f64 = -1.0;

#[inline]
pub fn is_valid(d: f64) -> bool {
    d >= 0.0 && d.is_finite()
}

fn check_size(width: usize, height: usize) -> Result<()> {
    if width < 2 || height < 2 {
        return Err(Error::ImageTooSmall { width, height });
    }
    Ok(())
}

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    if len != width * height {
        return Err(Error::InvalidParameter(format!(
            "buffer holds {len} samples, {width}x{height} raster needs {}",
            width * height
        )));
    }
    Ok(())
}

/// Grayscale intensity image, values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        check_size(width, height)?;
        check_len(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self> {
        check_size(width, height)?;
        let mut pixels = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                pixels.push(f(u, v));
            }
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.pixels[v * self.width + u]
    }

    pub fn row(&self, v: usize) -> &[f32] {
        &self.pixels[v * self.width..(v + 1) * self.width]
    }

    /// Mirror left-right.
    pub fn flip_horizontal(&self) -> Self {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for v in 0..self.height {
            pixels.extend(self.row(v).iter().rev());
        }
        Self {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// 2x2 box-filter decimation. Odd trailing rows/columns are dropped.
    pub fn downsample2(&self) -> Result<Self> {
        let (w, h) = (self.width / 2, self.height / 2);
        Self::from_fn(w, h, |u, v| {
            let (x, y) = (2 * u, 2 * v);
            0.25 * (self.get(x, y)
                + self.get(x + 1, y)
                + self.get(x, y + 1)
                + self.get(x + 1, y + 1))
        })
    }
}

/// Dense disparity raster. Pixels without an estimate hold
/// [`INVALID_DISPARITY`].
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DisparityMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_size(width, height)?;
        check_len(width, height, values.len())?;
        if let Some((i, &d)) = values
            .iter()
            .enumerate()
            .find(|(_, &d)| !is_valid(d) && d != INVALID_DISPARITY)
        {
            return Err(Error::InvalidParameter(format!(
                "disparity {d} at index {i} is neither valid nor the invalid marker"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn invalid(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![INVALID_DISPARITY; width * height])
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                values.push(f(u, v));
            }
        }
        Self::new(width, height, values)
    }

    /// Builds a map without the sentinel check; used by stages that only
    /// ever write valid values or the marker.
    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    /// The disparity at `(u, v)`, or `None` for the invalid marker.
    #[inline]
    pub fn valid_at(&self, u: usize, v: usize) -> Option<f64> {
        let d = self.get(u, v);
        is_valid(d).then_some(d)
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|d| is_valid(**d)).count()
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for v in 0..self.height {
            values.extend(
                self.values[v * self.width..(v + 1) * self.width]
                    .iter()
                    .rev(),
            );
        }
        Self::from_raw(self.width, self.height, values)
    }

    /// Applies `f` to every valid pixel; the invalid marker is preserved.
    pub fn map_valid(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut values = self.values.clone();
        for v in 0..self.height {
            for u in 0..self.width {
                let i = v * self.width + u;
                if is_valid(values[i]) {
                    values[i] = f(u, v, values[i]);
                }
            }
        }
        Self::from_raw(self.width, self.height, values)
    }
}

/// Integer label raster, 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        check_size(width, height)?;
        check_len(width, height, labels.len())?;
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u32,
    ) -> Result<Self> {
        let mut labels = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                labels.push(f(u, v));
            }
        }
        Self::new(width, height, labels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> u32 {
        self.labels[v * self.width + u]
    }

    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }
}

/// Per-pixel flag marking samples that fell inside the source image during
/// a row warp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewMask {
    width: usize,
    height: usize,
    in_view: Vec<bool>,
}

impl ViewMask {
    pub fn all_in_view(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            in_view: vec![true; width * height],
        }
    }

    pub(crate) fn from_raw(width: usize, height: usize, in_view: Vec<bool>) -> Self {
        debug_assert_eq!(in_view.len(), width * height);
        Self {
            width,
            height,
            in_view,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn in_view(&self, u: usize, v: usize) -> bool {
        self.in_view[v * self.width + u]
    }

    pub fn flags(&self) -> &[bool] {
        &self.in_view
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut in_view = Vec::with_capacity(self.in_view.len());
        for v in 0..self.height {
            in_view.extend(
                self.in_view[v * self.width..(v + 1) * self.width]
                    .iter()
                    .rev(),
            );
        }
        Self::from_raw(self.width, self.height, in_view)
    }
}

pub(crate) fn ensure_same_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}
