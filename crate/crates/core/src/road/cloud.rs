use crate::config::StereoRig;
use crate::error::{Error, Result};
use crate::raster::DisparityMap;

/// 3D points in metres, camera frame of the left view.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Back-projects every valid pixel with positive disparity.
pub fn reproject(d1: &DisparityMap, rig: &StereoRig) -> Result<PointCloud> {
    reproject_where(d1, rig, |_, _| true)
}

/// Back-projects the valid, positive-disparity pixels accepted by `keep`.
pub fn reproject_where(
    d1: &DisparityMap,
    rig: &StereoRig,
    mut keep: impl FnMut(usize, usize) -> bool,
) -> Result<PointCloud> {
    rig.validate()?;
    let fb = rig.focal * rig.baseline;
    let mut points = Vec::new();
    for v in 0..d1.height() {
        for u in 0..d1.width() {
            let Some(d) = d1.valid_at(u, v) else { continue };
            if d <= 0.0 || !keep(u, v) {
                continue;
            }
            let z = fb / d;
            points.push([
                (u as f64 - rig.cu) * z / rig.focal,
                (v as f64 - rig.cv) * z / rig.focal,
                z,
            ]);
        }
    }
    Ok(PointCloud { points })
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Static 3-d tree over a point set, exact nearest-neighbor queries.
#[derive(Debug, Clone)]
pub struct KdTree {
    // Implicit balanced tree: the median of each slice is its root.
    points: Vec<[f64; 3]>,
}

impl KdTree {
    pub fn build(points: &[[f64; 3]]) -> Self {
        let mut points = points.to_vec();
        Self::arrange(&mut points, 0);
        Self { points }
    }

    fn arrange(pts: &mut [[f64; 3]], axis: usize) {
        if pts.len() <= 1 {
            return;
        }
        let mid = pts.len() / 2;
        pts.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
        let (lo, hi) = pts.split_at_mut(mid);
        Self::arrange(lo, (axis + 1) % 3);
        Self::arrange(&mut hi[1..], (axis + 1) % 3);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest stored point and its squared distance, `None` when empty.
    pub fn nearest(&self, q: &[f64; 3]) -> Option<([f64; 3], f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (0, f64::INFINITY);
        Self::search(&self.points, 0, 0, q, &mut best);
        Some((self.points[best.0], best.1))
    }

    fn search(pts: &[[f64; 3]], offset: usize, axis: usize, q: &[f64; 3], best: &mut (usize, f64)) {
        if pts.is_empty() {
            return;
        }
        let mid = pts.len() / 2;
        let p = &pts[mid];
        let d = dist2(p, q);
        if d < best.1 {
            *best = (offset + mid, d);
        }
        let diff = q[axis] - p[axis];
        let next = (axis + 1) % 3;
        let (near, near_off, far, far_off) = if diff < 0.0 {
            (&pts[..mid], offset, &pts[mid + 1..], offset + mid + 1)
        } else {
            (&pts[mid + 1..], offset + mid + 1, &pts[..mid], offset)
        };
        Self::search(near, near_off, next, q, best);
        if diff * diff < best.1 {
            Self::search(far, far_off, next, q, best);
        }
    }
}

/// Root-mean-square distance from each test point to its nearest truth
/// point.
pub fn closest_distance_error(test: &PointCloud, truth: &PointCloud) -> Result<f64> {
    if test.is_empty() || truth.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let tree = KdTree::build(&truth.points);
    let sum: f64 = test
        .points
        .iter()
        .map(|p| tree.nearest(p).map_or(f64::INFINITY, |(_, d)| d))
        .sum();
    Ok((sum / test.len() as f64).sqrt())
}
