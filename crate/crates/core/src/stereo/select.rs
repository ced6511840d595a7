use super::CostVolume;
use crate::error::Result;
use crate::raster::{ensure_same_dims, DisparityMap, INVALID_DISPARITY};

/// Offset of the vertex of the parabola through `(-1, cm)`, `(0, c0)`,
/// `(1, cp)`, or 0 when the three costs are collinear.
#[inline]
pub fn parabola_offset(cm: f64, c0: f64, cp: f64) -> f64 {
    let den = cm + cp - 2.0 * c0;
    if den > 0.0 {
        (cm - cp) / (2.0 * den)
    } else {
        0.0
    }
}

/// Winner-takes-all with parabola refinement. Refinement is skipped at
/// `d = 0` and `d = d_max`. A pixel is invalid when some disparity more than
/// one level away from the winner costs at most `best * (1 + uniqueness)`;
/// in particular exact ties are rejected.
pub fn select_disparity(volume: &CostVolume, uniqueness: f64) -> DisparityMap {
    let (w, h, n) = (volume.width(), volume.height(), volume.levels());
    let mut out = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let c = volume.pixel(u, v);
            let mut best = 0;
            for d in 1..n {
                if c[d] < c[best] {
                    best = d;
                }
            }
            let cb = f64::from(c[best]);
            let rival = c
                .iter()
                .enumerate()
                .filter(|(d, _)| d.abs_diff(best) > 1)
                .map(|(_, &x)| f64::from(x))
                .fold(f64::INFINITY, f64::min);
            if rival <= cb * (1.0 + uniqueness) {
                out.push(INVALID_DISPARITY);
                continue;
            }
            let d = if best > 0 && best + 1 < n {
                best as f64 + parabola_offset(f64::from(c[best - 1]), cb, f64::from(c[best + 1]))
            } else {
                best as f64
            };
            out.push(d);
        }
    }
    DisparityMap::from_raw(w, h, out)
}

/// Re-estimates the fractional part of each valid disparity from the raw
/// costs box-summed over a `(2 radius + 1)^2` window at the rounded level and
/// its two neighbors. The offset is kept within half a level; levels at the
/// ends of the range keep their value.
pub fn refine_with_raw_costs(
    d: &DisparityMap,
    raw: &CostVolume,
    radius: usize,
) -> Result<DisparityMap> {
    ensure_same_dims(d.dims(), (raw.width(), raw.height()))?;
    let (w, h, n) = (raw.width(), raw.height(), raw.levels());
    let r = radius as isize;
    let values = (0..w * h)
        .map(|i| {
            let x = d.values()[i];
            if !crate::raster::is_valid(x) {
                return x;
            }
            let best = x.round() as usize;
            if best == 0 || best + 1 >= n {
                return x;
            }
            let (u, v) = ((i % w) as isize, (i / w) as isize);
            let mut c = [0.0f64; 3];
            for dy in -r..=r {
                let y = (v + dy).clamp(0, h as isize - 1) as usize;
                for dx in -r..=r {
                    let xx = (u + dx).clamp(0, w as isize - 1) as usize;
                    let px = raw.pixel(xx, y);
                    for (k, ck) in c.iter_mut().enumerate() {
                        *ck += f64::from(px[best + k - 1]);
                    }
                }
            }
            best as f64 + parabola_offset(c[0], c[1], c[2]).clamp(-0.5, 0.5)
        })
        .collect();
    Ok(DisparityMap::from_raw(w, h, values))
}

/// Invalidates left-referenced disparities whose right-referenced
/// counterpart at `round(u - d)` disagrees by more than `threshold` pixels.
/// Both maps are on the original, unwarped pair.
pub fn left_right_check(
    left: &DisparityMap,
    right: &DisparityMap,
    threshold: f64,
) -> Result<DisparityMap> {
    ensure_same_dims(left.dims(), right.dims())?;
    let (w, h) = left.dims();
    let mut out = left.values().to_vec();
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            let Some(dl) = left.valid_at(u, v) else {
                continue;
            };
            let x = (u as f64 - dl).round();
            let ok = x >= 0.0
                && (x as usize) < w
                && right
                    .valid_at(x as usize, v)
                    .is_some_and(|dr| (dl - dr).abs() <= threshold);
            if !ok {
                out[i] = INVALID_DISPARITY;
            }
        }
    }
    Ok(DisparityMap::from_raw(w, h, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single_pixel(costs: Vec<f32>) -> CostVolume {
        // 2x2 raster with identical cost vectors.
        let n = costs.len();
        let all = costs.iter().cycle().take(4 * n).copied().collect();
        CostVolume::new(2, 2, n - 1, all).unwrap()
    }

    #[test]
    fn parabola_examples() {
        let d = select_disparity(&single_pixel(vec![9.0, 9.0, 4.0, 2.0, 4.0, 9.0]), 0.0);
        assert_eq!(d.get(0, 0), 3.0);
        let d = select_disparity(&single_pixel(vec![9.0, 9.0, 4.0, 2.0, 3.0, 9.0]), 0.0);
        assert!((d.get(0, 0) - 3.166_666_666_666_667).abs() < 1e-12);
        let d = select_disparity(&single_pixel(vec![1.0, 3.0, 9.0, 9.0]), 0.0);
        assert_eq!(d.get(0, 0), 0.0);
        let d = select_disparity(&single_pixel(vec![9.0, 9.0, 3.0, 1.0]), 0.0);
        assert_eq!(d.get(0, 0), 3.0);
    }

    #[test]
    fn ties_are_rejected() {
        let d = select_disparity(&single_pixel(vec![2.0, 5.0, 2.0, 5.0]), 0.0);
        assert_eq!(d.valid_count(), 0);
        let d = select_disparity(&single_pixel(vec![0.0; 6]), 0.0);
        assert_eq!(d.valid_count(), 0);
        // Adjacent ties are a flat parabola top, not ambiguity.
        let d = select_disparity(&single_pixel(vec![9.0, 2.0, 2.0, 9.0]), 0.0);
        assert_eq!(d.get(1, 1), 1.5);
        let d = select_disparity(&single_pixel(vec![10.0, 20.0, 10.5, 20.0]), 0.1);
        assert_eq!(d.valid_count(), 0);
    }

    #[test]
    fn lr_check_examples() {
        let left = DisparityMap::new(4, 2, vec![0.0, 1.0, 1.0, 3.0, 1.0, 1.0, 2.0, 1.0]).unwrap();
        let right = DisparityMap::new(
            4,
            2,
            vec![0.0, 1.0, 5.0, 1.0, 2.0, 0.0, INVALID_DISPARITY, 9.0],
        )
        .unwrap();
        let out = left_right_check(&left, &right, 1.0).unwrap();
        // (3,0): d=3 -> x=0, right 0: off by 3.
        assert_eq!(out.values()[..4], [0.0, 1.0, 1.0, INVALID_DISPARITY]);
        // (0,1) maps outside the image, (3,1) onto an invalid right pixel.
        assert_eq!(
            out.values()[4..],
            [INVALID_DISPARITY, 1.0, 2.0, INVALID_DISPARITY]
        );
    }

    #[test]
    fn raw_refinement_uses_box_summed_costs() {
        let raw = single_pixel(vec![9.0, 4.0, 2.0, 3.0, 9.0]);
        let d = DisparityMap::filled(2, 2, 2.3).unwrap();
        let out = refine_with_raw_costs(&d, &raw, 1).unwrap();
        // Sums scale all three costs by 9, leaving the vertex unchanged.
        assert!((out.get(0, 0) - (2.0 + parabola_offset(4.0, 2.0, 3.0))).abs() < 1e-12);
        let edge = DisparityMap::new(2, 2, vec![0.2, 4.0, INVALID_DISPARITY, 2.0]).unwrap();
        let out = refine_with_raw_costs(&edge, &raw, 1).unwrap();
        assert_eq!(out.values()[..3], [0.2, 4.0, INVALID_DISPARITY]);
    }

    proptest! {
        #[test]
        fn refinement_stays_within_half_a_level(
            costs in prop::collection::vec(0u8..50, 3..12),
            bump in 1u8..100,
        ) {
            let costs: Vec<f32> = costs.into_iter().map(f32::from).collect();
            let vol = single_pixel(costs.clone());
            let d = select_disparity(&vol, 0.0);
            if let Some(x) = d.valid_at(0, 0) {
                let best = (0..costs.len()).min_by(|&a, &b| costs[a].total_cmp(&costs[b])).unwrap();
                prop_assert!((x - best as f64).abs() <= 0.5);
            }
            let shifted = single_pixel(costs.iter().map(|c| c + f32::from(bump)).collect());
            let ds = select_disparity(&shifted, 0.0);
            prop_assert_eq!(d.valid_at(0, 0), ds.valid_at(0, 0));
        }
    }
}
