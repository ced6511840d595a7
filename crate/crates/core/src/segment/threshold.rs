use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::raster::DisparityMap;

/// Occupied cell of a [`Histogram2D`]. Sums are kept so cluster means are
/// exact rather than bin-center approximations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub count: u64,
    pub sum_g1: f64,
    pub sum_g2: f64,
}

impl Bin {
    pub fn mean(&self) -> (f64, f64) {
        let n = self.count as f64;
        (self.sum_g1 / n, self.sum_g2 / n)
    }
}

/// Histogram of `g = (D2(p), mean of the 8 neighbors of p)`. Bin `(i, j)`
/// covers `[i w, (i + 1) w) x [j w, (j + 1) w)` for bin width `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram2D {
    bin_width: f64,
    i0: i64,
    j0: i64,
    nx: usize,
    ny: usize,
    bins: Vec<Bin>,
    total: u64,
}

impl Histogram2D {
    /// Bins arbitrary vectors.
    pub fn from_vectors(vectors: &[(f64, f64)], bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bin width {bin_width} must be > 0"
            )));
        }
        if let Some(v) = vectors
            .iter()
            .find(|(a, b)| !(a.is_finite() && b.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "histogram vector {v:?} is not finite"
            )));
        }
        let idx = |x: f64| (x / bin_width).floor() as i64;
        let empty = Bin {
            count: 0,
            sum_g1: 0.0,
            sum_g2: 0.0,
        };
        if vectors.is_empty() {
            return Ok(Self {
                bin_width,
                i0: 0,
                j0: 0,
                nx: 0,
                ny: 0,
                bins: Vec::new(),
                total: 0,
            });
        }
        let (mut i0, mut i1, mut j0, mut j1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
        for &(a, b) in vectors {
            let (i, j) = (idx(a), idx(b));
            i0 = i0.min(i);
            i1 = i1.max(i);
            j0 = j0.min(j);
            j1 = j1.max(j);
        }
        let (nx, ny) = ((i1 - i0 + 1) as usize, (j1 - j0 + 1) as usize);
        let mut bins = vec![empty; nx * ny];
        for &(a, b) in vectors {
            let k = (idx(b) - j0) as usize * nx + (idx(a) - i0) as usize;
            let bin = &mut bins[k];
            bin.count += 1;
            bin.sum_g1 += a;
            bin.sum_g2 += b;
        }
        Ok(Self {
            bin_width,
            i0,
            j0,
            nx,
            ny,
            bins,
            total: vectors.len() as u64,
        })
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    /// Number of binned vectors.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Bin count along the `g1` and `g2` axes.
    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Occupied bins as `((i, j), bin)` in `(j, i)` order.
    pub fn occupied(&self) -> impl Iterator<Item = ((i64, i64), &Bin)> {
        self.bins
            .iter()
            .enumerate()
            .filter(|(_, b)| b.count > 0)
            .map(move |(k, b)| {
                (
                    (
                        self.i0 + (k % self.nx) as i64,
                        self.j0 + (k / self.nx) as i64,
                    ),
                    b,
                )
            })
    }

    /// Count of the bin holding vector `(g1, g2)`.
    pub fn count_at(&self, g1: f64, g2: f64) -> u64 {
        let i = (g1 / self.bin_width).floor() as i64 - self.i0;
        let j = (g2 / self.bin_width).floor() as i64 - self.j0;
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            return 0;
        }
        self.bins[j as usize * self.nx + i as usize].count
    }
}

/// Neighborhood vectors of every interior pixel whose 3x3 neighborhood is
/// fully valid, in raster order.
pub fn neighborhood_vectors(d2: &DisparityMap) -> Vec<(f64, f64)> {
    let (w, h) = d2.dims();
    (1..h.saturating_sub(1))
        .into_par_iter()
        .flat_map_iter(|v| {
            (1..w - 1).filter_map(move |u| {
                let c = d2.valid_at(u, v)?;
                let mut sum = 0.0;
                for dy in 0..3 {
                    for dx in 0..3 {
                        if dx == 1 && dy == 1 {
                            continue;
                        }
                        sum += d2.valid_at(u + dx - 1, v + dy - 1)?;
                    }
                }
                Some((c, sum / 8.0))
            })
        })
        .collect()
}

/// Histogram of [`neighborhood_vectors`]; border pixels and pixels with an
/// invalid neighbor are skipped.
pub fn build_histogram(d2: &DisparityMap, bin_width: f64) -> Result<Histogram2D> {
    Histogram2D::from_vectors(&neighborhood_vectors(d2), bin_width)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdResult {
    /// Road level, the mean of the upper cluster.
    pub t_r: f64,
    /// Pothole threshold `t_r - delta_pd`.
    pub t_s: f64,
    pub mu1: f64,
    pub mu2: f64,
    /// Fraction of vectors dropped as off-diagonal.
    pub excluded_fraction: f64,
    /// Set when the kept vectors share one diagonal value; `t_r` is then their
    /// mean.
    pub degenerate: bool,
}

/// Optimal split of weighted 1-D points sorted by value into a low and a
/// high cluster, minimizing the within-cluster sum of squares. Returns the
/// size of the low cluster and the two weighted means, or `None` when all
/// values are equal.
pub fn two_means_sorted(points: &[(f64, u64)]) -> Option<(usize, f64, f64)> {
    if points.len() < 2 || points.first()?.0 == points.last()?.0 {
        return None;
    }
    let n_total: f64 = points.iter().map(|p| p.1 as f64).sum();
    let mean = points.iter().map(|p| p.0 * p.1 as f64).sum::<f64>() / n_total;
    // Minimizing the within-cluster sum of squares is maximizing
    // S1^2/N1 + S2^2/N2 over centered sums; S2 = -S1.
    let (mut n1, mut s1) = (0.0, 0.0);
    let mut best: Option<(f64, usize)> = None;
    for k in 1..points.len() {
        let (x, wt) = points[k - 1];
        n1 += wt as f64;
        s1 += (x - mean) * wt as f64;
        if points[k].0 == x {
            continue;
        }
        let n2 = n_total - n1;
        let score = s1 * s1 / n1 + s1 * s1 / n2;
        if best.is_none_or(|(b, _)| score > b) {
            best = Some((score, k));
        }
    }
    let (_, k) = best?;
    let wmean = |ps: &[(f64, u64)]| {
        let n: f64 = ps.iter().map(|p| p.1 as f64).sum();
        ps.iter().map(|p| p.0 * p.1 as f64).sum::<f64>() / n
    };
    Some((k, wmean(&points[..k]), wmean(&points[k..])))
}

/// Adaptive road threshold. Bins whose mean vector lies more than `band`
/// off the diagonal (`|g1 - g2| > band`) are dropped; the rest are projected
/// onto the diagonal as `(g1 + g2) / 2` and split by exact 1-D 2-means.
pub fn find_road_threshold(
    hist: &Histogram2D,
    delta_pd: f64,
    band: f64,
) -> Result<ThresholdResult> {
    let mut points = Vec::new();
    let mut excluded = 0u64;
    for (_, bin) in hist.occupied() {
        let (g1, g2) = bin.mean();
        if (g1 - g2).abs() > band {
            excluded += bin.count;
        } else {
            points.push((
                (bin.sum_g1 + bin.sum_g2) / (2.0 * bin.count as f64),
                bin.count,
            ));
        }
    }
    if points.is_empty() {
        return Err(Error::AllExcluded);
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let excluded_fraction = excluded as f64 / hist.total() as f64;
    let (mu1, mu2, degenerate) = match two_means_sorted(&points) {
        Some((_, m1, m2)) => (m1, m2, false),
        None => {
            let n: f64 = points.iter().map(|p| p.1 as f64).sum();
            let m = points.iter().map(|p| p.0 * p.1 as f64).sum::<f64>() / n;
            (m, m, true)
        }
    };
    Ok(ThresholdResult {
        t_r: mu2,
        t_s: mu2 - delta_pd,
        mu1,
        mu2,
        excluded_fraction,
        degenerate,
    })
}
