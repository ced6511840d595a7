use rayon::prelude::*;

use super::ccl::label_regions;
use crate::config::Connectivity;
use crate::error::{Error, Result};
use crate::raster::{is_valid, DisparityMap, LabelMap};

/// Cluster center: position and mean value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Center {
    pub u: f64,
    pub v: f64,
    pub value: f64,
}

/// SLIC partition: labels `1..=count`, one center per label.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelMap {
    pub labels: LabelMap,
    /// `centers[k - 1]` belongs to label `k`.
    pub centers: Vec<Center>,
    /// Grid spacing `S = sqrt(H W / p)`.
    pub spacing: f64,
}

impl SuperpixelMap {
    pub fn count(&self) -> usize {
        self.centers.len()
    }

    pub fn label(&self, u: usize, v: usize) -> u32 {
        self.labels.get(u, v)
    }
}

struct Grid {
    nx: usize,
    ny: usize,
    sx: f64,
    sy: f64,
}

impl Grid {
    fn new(w: usize, h: usize, p: usize, s: f64) -> Self {
        let nx = ((w as f64 / s).round() as usize).clamp(1, w);
        let ny = ((p as f64 / nx as f64).round() as usize).clamp(1, h);
        Self {
            nx,
            ny,
            sx: w as f64 / nx as f64,
            sy: h as f64 / ny as f64,
        }
    }
}

/// Sum of squared forward differences at `(u, v)`; the last row and column
/// use the backward neighbor.
fn gradient(vals: &[f64], w: usize, h: usize, u: usize, v: usize) -> f64 {
    let c = vals[v * w + u];
    let x = if u + 1 < w {
        vals[v * w + u + 1]
    } else {
        vals[v * w + u - 1]
    };
    let y = if v + 1 < h {
        vals[(v + 1) * w + u]
    } else {
        vals[(v - 1) * w + u]
    };
    (x - c).powi(2) + (y - c).powi(2)
}

/// SLIC over a disparity map. Invalid pixels enter as value 0.
///
/// Seeds sit on a regular grid of spacing `S = sqrt(H W / p)`, each moved to
/// the lowest-gradient pixel of its 3x3 neighborhood when that is strictly
/// lower than at the seed. Each iteration assigns pixels within a window of
/// half-width `~S` around every center by `sqrt(dv^2 + (ds / S)^2 m^2)` and
/// moves centers to their cluster means. Fragments smaller than `S^2 / 4`
/// are merged into the neighbor sharing the longest boundary and the labels
/// are renumbered so every superpixel is 8-connected.
pub fn slic(
    d2: &DisparityMap,
    p: usize,
    compactness: f64,
    iterations: usize,
) -> Result<SuperpixelMap> {
    let (w, h) = d2.dims();
    if p < 4 || p > w * h {
        return Err(Error::InvalidParameter(format!(
            "superpixel count {p} must lie in [4, {}]",
            w * h
        )));
    }
    if !(compactness > 0.0 && compactness.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "compactness {compactness} must be > 0"
        )));
    }
    let vals: Vec<f64> = d2
        .values()
        .iter()
        .map(|&d| if is_valid(d) { d } else { 0.0 })
        .collect();
    let s = ((w * h) as f64 / p as f64).sqrt();
    let grid = Grid::new(w, h, p, s);

    let mut centers = Vec::with_capacity(grid.nx * grid.ny);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let cu = (i as f64 + 0.5) * grid.sx - 0.5;
            let cv = (j as f64 + 0.5) * grid.sy - 0.5;
            let (ru, rv) = (cu.round() as usize, cv.round() as usize);
            let mut best = (ru, rv, gradient(&vals, w, h, ru, rv));
            for y in rv.saturating_sub(1)..=(rv + 1).min(h - 1) {
                for x in ru.saturating_sub(1)..=(ru + 1).min(w - 1) {
                    let g = gradient(&vals, w, h, x, y);
                    if g < best.2 {
                        best = (x, y, g);
                    }
                }
            }
            let (u, v) = if (best.0, best.1) == (ru, rv) {
                (cu, cv)
            } else {
                (best.0 as f64, best.1 as f64)
            };
            let value = vals[u.round() as usize + w * v.round() as usize];
            centers.push(Center { u, v, value });
        }
    }

    // Initial labels: spatially nearest seed among the 3x3 neighboring cells.
    let mut labels = vec![0u32; w * h];
    labels.par_chunks_mut(w).enumerate().for_each(|(v, row)| {
        let j = ((v as f64 + 0.5) / grid.sy).floor() as usize;
        for (u, l) in row.iter_mut().enumerate() {
            let i = ((u as f64 + 0.5) / grid.sx).floor() as usize;
            let mut best = (f64::INFINITY, 0usize);
            for jj in j.saturating_sub(1)..=(j + 1).min(grid.ny - 1) {
                for ii in i.saturating_sub(1)..=(i + 1).min(grid.nx - 1) {
                    let k = jj * grid.nx + ii;
                    let c = &centers[k];
                    let d = (u as f64 - c.u).powi(2) + (v as f64 - c.v).powi(2);
                    if d < best.0 {
                        best = (d, k);
                    }
                }
            }
            *l = best.1 as u32;
        }
    });

    let radius = s.max(grid.sx).max(grid.sy);
    let spatial_weight = (compactness / s).powi(2);
    for _ in 0..iterations {
        assign(&vals, w, &centers, radius, spatial_weight, &mut labels);
        update_centers(&vals, w, &labels, &mut centers);
    }

    let min_size = ((s * s / 4.0).floor() as usize).max(1);
    let labels = enforce_connectivity(&labels, w, h, min_size);
    let count = labels.iter().copied().max().unwrap_or(0) as usize;
    let mut final_centers = vec![
        Center {
            u: 0.0,
            v: 0.0,
            value: 0.0
        };
        count
    ];
    let mut n = vec![0usize; count];
    for (i, &l) in labels.iter().enumerate() {
        let c = &mut final_centers[l as usize - 1];
        c.u += (i % w) as f64;
        c.v += (i / w) as f64;
        c.value += vals[i];
        n[l as usize - 1] += 1;
    }
    for (c, &n) in final_centers.iter_mut().zip(&n) {
        let n = n as f64;
        c.u /= n;
        c.v /= n;
        c.value /= n;
    }
    Ok(SuperpixelMap {
        labels: LabelMap::new(w, h, labels)?,
        centers: final_centers,
        spacing: s,
    })
}

/// One assignment pass. Pixels outside every center window keep their
/// previous label.
fn assign(
    vals: &[f64],
    w: usize,
    centers: &[Center],
    radius: f64,
    spatial_weight: f64,
    labels: &mut [u32],
) {
    labels.par_chunks_mut(w).enumerate().for_each(|(v, row)| {
        let vf = v as f64;
        let mut best = vec![f64::INFINITY; w];
        for (k, c) in centers.iter().enumerate() {
            if (vf - c.v).abs() > radius {
                continue;
            }
            let lo = (c.u - radius).ceil().max(0.0) as usize;
            let hi = ((c.u + radius).floor() as isize).min(w as isize - 1);
            if hi < lo as isize {
                continue;
            }
            let dv2 = (vf - c.v).powi(2);
            for u in lo..=hi as usize {
                let ds2 = (u as f64 - c.u).powi(2) + dv2;
                let dval = vals[v * w + u] - c.value;
                let dist = dval * dval + ds2 * spatial_weight;
                if dist < best[u] {
                    best[u] = dist;
                    row[u] = k as u32;
                }
            }
        }
    });
}

fn update_centers(vals: &[f64], w: usize, labels: &[u32], centers: &mut [Center]) {
    let mut acc = vec![(0.0, 0.0, 0.0, 0usize); centers.len()];
    for (i, &l) in labels.iter().enumerate() {
        let a = &mut acc[l as usize];
        a.0 += (i % w) as f64;
        a.1 += (i / w) as f64;
        a.2 += vals[i];
        a.3 += 1;
    }
    for (c, a) in centers.iter_mut().zip(acc) {
        if a.3 > 0 {
            let n = a.3 as f64;
            *c = Center {
                u: a.0 / n,
                v: a.1 / n,
                value: a.2 / n,
            };
        }
    }
}

/// Splits every label into 8-connected regions, repeatedly merges regions
/// below `min_size` pixels into the adjacent region sharing the most
/// neighbor pairs, and renumbers regions `1..=n` in scan order.
fn enforce_connectivity(labels: &[u32], w: usize, h: usize, min_size: usize) -> Vec<u32> {
    let offsets = Connectivity::Eight.offsets();
    let mut region = label_regions(labels, w, h, Connectivity::Eight);
    loop {
        let n = region.iter().copied().max().unwrap_or(0) as usize;
        let mut size = vec![0usize; n + 1];
        for &r in &region {
            size[r as usize] += 1;
        }
        // Boundary pair counts from each small region to its neighbors.
        let mut shared: Vec<std::collections::HashMap<u32, usize>> =
            vec![Default::default(); n + 1];
        for v in 0..h {
            for u in 0..w {
                let a = region[v * w + u];
                if size[a as usize] >= min_size {
                    continue;
                }
                for &(dx, dy) in offsets {
                    let (x, y) = (u as isize + dx, v as isize + dy);
                    if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                        continue;
                    }
                    let b = region[y as usize * w + x as usize];
                    if b != a {
                        *shared[a as usize].entry(b).or_default() += 1;
                    }
                }
            }
        }
        let mut target: Vec<u32> = (0..=n as u32).collect();
        let mut changed = false;
        // Smallest regions first; ties by id for determinism.
        let mut small: Vec<u32> = (1..=n as u32)
            .filter(|&r| size[r as usize] < min_size)
            .collect();
        small.sort_by_key(|&r| (size[r as usize], r));
        for r in small {
            let best = shared[r as usize]
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(&b, _)| b);
            if let Some(b) = best {
                // Follow earlier merges so a chain lands on a surviving region.
                let mut t = b;
                while target[t as usize] != t {
                    t = target[t as usize];
                }
                if t != r {
                    target[r as usize] = t;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        let resolved: Vec<u32> = (0..=n as u32)
            .map(|mut t| {
                while target[t as usize] != t {
                    t = target[t as usize];
                }
                t
            })
            .collect();
        let merged: Vec<u32> = region.iter().map(|&r| resolved[r as usize]).collect();
        region = label_regions(&merged, w, h, Connectivity::Eight);
    }
    region
}
