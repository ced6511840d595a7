use rayon::prelude::*;

use super::{CostVolume, SgmParams};

/// Semi-global aggregation: the sum over scan directions `r` of
///
/// ```text
/// L_r(p, d) = C(p, d) + min(L_r(p-r, d), L_r(p-r, d±1) + λ1, min_i L_r(p-r, i) + λ2)
///             - min_i L_r(p-r, i)
/// ```
///
/// with `L_r(p, d) = C(p, d)` where `p - r` lies outside the image.
pub fn aggregate_costs(volume: &CostVolume, params: &SgmParams) -> CostVolume {
    let len = volume.costs().len();
    let sum = params
        .directions
        .par_iter()
        .fold(
            || vec![0f32; len],
            |mut acc, &dir| {
                aggregate_direction(
                    volume,
                    dir,
                    params.lambda1 as f32,
                    params.lambda2 as f32,
                    &mut acc,
                );
                acc
            },
        )
        .reduce_with(|mut a, b| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            a
        })
        .unwrap_or_else(|| vec![0f32; len]);
    CostVolume::from_raw(volume.width(), volume.height(), volume.d_max(), sum)
}

/// Adds the single-direction path costs for `dir = (dx, dy)` into `out`.
/// Rows and columns are visited so that `p - dir` is always finished before
/// `p`; one buffer holds the previous row and one the current row.
fn aggregate_direction(
    vol: &CostVolume,
    (dx, dy): (isize, isize),
    p1: f32,
    p2: f32,
    out: &mut [f32],
) {
    let (w, h, n) = (vol.width(), vol.height(), vol.levels());
    let mut prev = vec![0f32; w * n];
    let mut cur = vec![0f32; w * n];
    let mut prev_min = vec![0f32; w];
    let mut cur_min = vec![0f32; w];
    let mut pred = vec![0f32; n];

    let rows: Box<dyn Iterator<Item = usize>> = if dy >= 0 {
        Box::new(0..h)
    } else {
        Box::new((0..h).rev())
    };
    for (ri, v) in rows.enumerate() {
        for ci in 0..w {
            let u = if dx >= 0 { ci } else { w - 1 - ci };
            let pu = u as isize - dx;
            let has_pred = (0..w as isize).contains(&pu) && (dy == 0 || ri > 0);
            let c = vol.pixel(u, v);
            let mut lmin = f32::INFINITY;
            if has_pred {
                let pu = pu as usize;
                let pmin = if dy == 0 {
                    pred.copy_from_slice(&cur[pu * n..(pu + 1) * n]);
                    cur_min[pu]
                } else {
                    pred.copy_from_slice(&prev[pu * n..(pu + 1) * n]);
                    prev_min[pu]
                };
                let l = &mut cur[u * n..(u + 1) * n];
                for d in 0..n {
                    let mut best = pred[d].min(pmin + p2);
                    if d > 0 {
                        best = best.min(pred[d - 1] + p1);
                    }
                    if d + 1 < n {
                        best = best.min(pred[d + 1] + p1);
                    }
                    let x = c[d] + best - pmin;
                    l[d] = x;
                    lmin = lmin.min(x);
                }
            } else {
                cur[u * n..(u + 1) * n].copy_from_slice(c);
                lmin = c.iter().copied().fold(f32::INFINITY, f32::min);
            }
            cur_min[u] = lmin;
            let base = (v * w + u) * n;
            for (o, x) in out[base..base + n].iter_mut().zip(&cur[u * n..(u + 1) * n]) {
                *o += x;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut prev_min, &mut cur_min);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    /// Path cost by literal recursion along `-r`, memoized per pixel.
    fn oracle_path(
        vol: &CostVolume,
        r: (isize, isize),
        p1: f64,
        p2: f64,
        u: usize,
        v: usize,
        memo: &mut HashMap<(usize, usize), Vec<f64>>,
    ) -> Vec<f64> {
        if let Some(x) = memo.get(&(u, v)) {
            return x.clone();
        }
        let n = vol.levels();
        let c: Vec<f64> = (0..n).map(|d| f64::from(vol.get(u, v, d))).collect();
        let (pu, pv) = (u as isize - r.0, v as isize - r.1);
        let res = if pu < 0 || pv < 0 || pu >= vol.width() as isize || pv >= vol.height() as isize {
            c
        } else {
            let prev = oracle_path(vol, r, p1, p2, pu as usize, pv as usize, memo);
            let m = prev.iter().copied().fold(f64::INFINITY, f64::min);
            (0..n)
                .map(|d| {
                    let mut cands = vec![prev[d], m + p2];
                    if d > 0 {
                        cands.push(prev[d - 1] + p1);
                    }
                    if d + 1 < n {
                        cands.push(prev[d + 1] + p1);
                    }
                    c[d] + cands.into_iter().fold(f64::INFINITY, f64::min) - m
                })
                .collect()
        };
        memo.insert((u, v), res.clone());
        res
    }

    fn oracle(vol: &CostVolume, params: &SgmParams) -> Vec<f64> {
        let n = vol.levels();
        let mut out = vec![0.0; vol.costs().len()];
        for &r in &params.directions {
            let mut memo = HashMap::new();
            for v in 0..vol.height() {
                for u in 0..vol.width() {
                    let l = oracle_path(vol, r, params.lambda1, params.lambda2, u, v, &mut memo);
                    for d in 0..n {
                        out[(v * vol.width() + u) * n + d] += l[d];
                    }
                }
            }
        }
        out
    }

    fn random_volume(rng: &mut ChaCha8Rng, w: usize, h: usize, d_max: usize) -> CostVolume {
        let costs = (0..w * h * (d_max + 1))
            .map(|_| rng.random_range(0..25) as f32)
            .collect();
        CostVolume::new(w, h, d_max, costs).unwrap()
    }

    #[test]
    fn four_by_four_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let vol = random_volume(&mut rng, 4, 4, 3);
        let params = SgmParams::new(8.0, 32.0, 5).unwrap();
        let agg = aggregate_costs(&vol, &params);
        let expect = oracle(&vol, &params);
        for (a, b) in agg.costs().iter().zip(&expect) {
            assert_eq!(f64::from(*a), *b);
        }
    }

    #[test]
    fn single_row_with_huge_penalties_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let vol = random_volume(&mut rng, 9, 1, 4);
        let params = SgmParams::new(1e6, 1e6, 5)
            .unwrap()
            .with_directions(vec![(1, 0)])
            .unwrap();
        let agg = aggregate_costs(&vol, &params);
        let expect = oracle(&vol, &params);
        for (a, b) in agg.costs().iter().zip(&expect) {
            assert_eq!(f64::from(*a), *b);
        }
        // With prohibitive penalties each path keeps its disparity: a running
        // sum minus the running sum of predecessor minima.
        for u in 0..9 {
            for d in 0..5 {
                let run: f32 = (0..=u).map(|x| vol.get(x, 0, d)).sum();
                let min_prev: f32 = (0..u)
                    .map(|x| {
                        (0..5)
                            .map(|e| agg.get(x, 0, e))
                            .fold(f32::INFINITY, f32::min)
                    })
                    .sum();
                assert_eq!(agg.get(u, 0, d), run - min_prev);
            }
        }
    }

    #[test]
    fn zero_penalties_keep_argmin() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let vol = random_volume(&mut rng, 7, 6, 5);
        let mut params = SgmParams::new(1.0, 1.0, 5).unwrap();
        params.lambda1 = 0.0;
        params.lambda2 = 0.0;
        let agg = aggregate_costs(&vol, &params);
        for v in 0..6 {
            for u in 0..7 {
                let raw = vol.pixel(u, v);
                let ag = agg.pixel(u, v);
                // Every direction adds a pixel-independent constant.
                let off = ag[0] - 8.0 * raw[0];
                for d in 0..6 {
                    assert_eq!(ag[d] - 8.0 * raw[d], off);
                }
            }
        }
    }

    #[test]
    fn border_pixels_get_raw_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let vol = random_volume(&mut rng, 5, 4, 3);
        let params = SgmParams::new(8.0, 32.0, 5)
            .unwrap()
            .with_directions(vec![(1, 0)])
            .unwrap();
        let agg = aggregate_costs(&vol, &params);
        for v in 0..4 {
            assert_eq!(agg.pixel(0, v), vol.pixel(0, v));
        }
    }
}
