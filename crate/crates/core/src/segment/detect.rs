use super::ccl::connected_components;
use super::{SuperpixelMap, ThresholdResult};
use crate::config::Connectivity;
use crate::error::Result;
use crate::raster::{ensure_same_dims, DisparityMap, LabelMap};

/// Rules that turn candidate regions into potholes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectParams {
    /// Components reaching within this many pixels of the border are dropped.
    pub border_margin: usize,
    /// Components spanning fewer superpixels are dropped.
    pub min_superpixels: usize,
    /// Components with fewer pixels are dropped.
    pub min_area: usize,
    pub connectivity: Connectivity,
}

impl DetectParams {
    /// Defaults tied to a superpixel map: minimum area `S^2`.
    pub fn for_superpixels(
        sp: &SuperpixelMap,
        border_margin: usize,
        min_superpixels: usize,
        connectivity: Connectivity,
    ) -> Self {
        Self {
            border_margin,
            min_superpixels,
            min_area: (sp.spacing * sp.spacing).ceil() as usize,
            connectivity,
        }
    }
}

/// Pixels of valid pooled value strictly below `t_s`.
pub fn candidate_mask(d3: &DisparityMap, t_s: f64) -> LabelMap {
    let (w, h) = d3.dims();
    let labels = d3
        .values()
        .iter()
        .map(|&d| u32::from(crate::raster::is_valid(d) && d < t_s))
        .collect();
    LabelMap::new(w, h, labels).expect("dimensions come from a valid raster")
}

/// Thresholds pooled disparities at `thr.t_s`, labels the connected
/// candidates and keeps those away from the border that span at least
/// `min_superpixels` superpixels and `min_area` pixels. Survivors are
/// numbered `1..` in raster order.
pub fn detect_potholes(
    d3: &DisparityMap,
    sp: &SuperpixelMap,
    thr: &ThresholdResult,
    params: &DetectParams,
) -> Result<LabelMap> {
    detect_below(d3, sp, thr.t_s, params)
}

/// [`detect_potholes`] with an explicit threshold.
pub fn detect_below(
    d3: &DisparityMap,
    sp: &SuperpixelMap,
    t_s: f64,
    params: &DetectParams,
) -> Result<LabelMap> {
    ensure_same_dims(d3.dims(), sp.labels.dims())?;
    let (w, h) = d3.dims();
    let (cc, n) = connected_components(&candidate_mask(d3, t_s), params.connectivity)?;

    let mut area = vec![0usize; n + 1];
    let mut touches = vec![false; n + 1];
    let mut superpixels: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
    let m = params.border_margin;
    for v in 0..h {
        for u in 0..w {
            let c = cc.get(u, v) as usize;
            if c == 0 {
                continue;
            }
            area[c] += 1;
            if u < m || v < m || u + m >= w || v + m >= h {
                touches[c] = true;
            }
            superpixels[c].push(sp.label(u, v));
        }
    }
    let mut keep = vec![0u32; n + 1];
    let mut next = 0;
    for c in 1..=n {
        let sps = &mut superpixels[c];
        sps.sort_unstable();
        sps.dedup();
        if !touches[c] && sps.len() >= params.min_superpixels && area[c] >= params.min_area {
            next += 1;
            keep[c] = next;
        }
    }
    let labels = cc.labels().iter().map(|&c| keep[c as usize]).collect();
    LabelMap::new(w, h, labels)
}

/// Drops labeled regions that touch any pixel where `keep_out` holds and
/// renumbers the survivors `1..` in label order.
pub fn discard_touching(labels: &LabelMap, keep_out: impl Fn(usize, usize) -> bool) -> LabelMap {
    let (w, h) = labels.dims();
    let n = labels.max_label() as usize;
    let mut hit = vec![false; n + 1];
    for v in 0..h {
        for u in 0..w {
            let l = labels.get(u, v) as usize;
            if l != 0 && !hit[l] && keep_out(u, v) {
                hit[l] = true;
            }
        }
    }
    let mut map = vec![0u32; n + 1];
    let mut next = 0;
    for l in 1..=n {
        if !hit[l] {
            next += 1;
            map[l] = next;
        }
    }
    LabelMap::new(
        w,
        h,
        labels.labels().iter().map(|&l| map[l as usize]).collect(),
    )
    .expect("dimensions come from a valid raster")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::Center;

    /// 12x12 raster of 3x3 superpixels.
    fn blocks() -> SuperpixelMap {
        let labels = LabelMap::from_fn(12, 12, |u, v| (v / 3 * 4 + u / 3 + 1) as u32).unwrap();
        let c = Center {
            u: 0.0,
            v: 0.0,
            value: 0.0,
        };
        SuperpixelMap {
            labels,
            centers: vec![c; 16],
            spacing: 3.0,
        }
    }

    fn params(margin: usize) -> DetectParams {
        DetectParams {
            border_margin: margin,
            min_superpixels: 2,
            min_area: 9,
            connectivity: Connectivity::Eight,
        }
    }

    fn thr(t_s: f64) -> ThresholdResult {
        ThresholdResult {
            t_r: t_s + 2.36,
            t_s,
            mu1: 0.0,
            mu2: t_s + 2.36,
            excluded_fraction: 0.0,
            degenerate: false,
        }
    }

    fn pooled(low: &[u32]) -> DisparityMap {
        let sp = blocks();
        DisparityMap::from_fn(12, 12, |u, v| {
            if low.contains(&sp.label(u, v)) {
                25.0
            } else {
                30.0
            }
        })
        .unwrap()
    }

    #[test]
    fn nothing_below_threshold() {
        let out = detect_potholes(&pooled(&[]), &blocks(), &thr(27.64), &params(1)).unwrap();
        assert_eq!(out.foreground_count(), 0);
    }

    #[test]
    fn interior_blob_of_three() {
        let out =
            detect_potholes(&pooled(&[6, 7, 10]), &blocks(), &thr(27.64), &params(1)).unwrap();
        assert_eq!(out.max_label(), 1);
        assert_eq!(out.foreground_count(), 27);
    }

    #[test]
    fn single_superpixel_is_fake() {
        let out = detect_potholes(&pooled(&[6]), &blocks(), &thr(27.64), &params(1)).unwrap();
        assert_eq!(out.foreground_count(), 0);
    }

    #[test]
    fn border_contact_discards() {
        // Superpixels 1 and 2 touch the image corner.
        let out =
            detect_potholes(&pooled(&[1, 2, 10, 11]), &blocks(), &thr(27.64), &params(1)).unwrap();
        assert_eq!(out.max_label(), 1);
        assert_eq!(out.get(1, 1), 0);
        assert_eq!(out.get(4, 7), 1);
        // A wide margin reaches the second blob as well.
        let out =
            detect_potholes(&pooled(&[1, 2, 6, 7]), &blocks(), &thr(27.64), &params(4)).unwrap();
        assert_eq!(out.foreground_count(), 0);
    }

    #[test]
    fn discard_touching_renumbers() {
        let l = LabelMap::new(4, 2, vec![1, 2, 0, 3, 0, 0, 0, 3]).unwrap();
        let out = discard_touching(&l, |u, _| u == 1);
        assert_eq!(out.labels(), &[1, 0, 0, 2, 0, 0, 0, 2]);
    }
}
