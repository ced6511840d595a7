use super::{RoadModel, RoadObservations};
use crate::error::{Error, Result};
use crate::raster::{is_valid, DisparityMap, INVALID_DISPARITY};

/// Upper bound on observations handed to the road fit.
pub const MAX_OBSERVATIONS: usize = 100_000;

/// Axis-aligned pixel rectangle `[u0, u0 + width) x [v0, v0 + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roi {
    pub u0: usize,
    pub v0: usize,
    pub width: usize,
    pub height: usize,
}

impl Roi {
    pub fn new(u0: usize, v0: usize, width: usize, height: usize) -> Self {
        Self {
            u0,
            v0,
            width,
            height,
        }
    }
}

/// Valid pixels of `d1` inside `roi` (whole image when `None`), capped at
/// [`MAX_OBSERVATIONS`].
pub fn sample_observations(d1: &DisparityMap, roi: Option<Roi>) -> Result<RoadObservations> {
    sample_observations_capped(d1, roi, MAX_OBSERVATIONS)
}

/// As [`sample_observations`] with an explicit cap. When more than `cap`
/// pixels are valid, the `i`-th kept observation is valid pixel
/// `floor(i * n / cap)` in scan order.
pub fn sample_observations_capped(
    d1: &DisparityMap,
    roi: Option<Roi>,
    cap: usize,
) -> Result<RoadObservations> {
    let (w, h) = d1.dims();
    let roi = roi.unwrap_or(Roi::new(0, 0, w, h));
    if roi.u0 + roi.width > w || roi.v0 + roi.height > h {
        return Err(Error::InvalidParameter(format!(
            "roi {roi:?} exceeds the {w}x{h} map"
        )));
    }
    let mut valid = Vec::new();
    for v in roi.v0..roi.v0 + roi.height {
        for u in roi.u0..roi.u0 + roi.width {
            if let Some(d) = d1.valid_at(u, v) {
                valid.push((u, v, d));
            }
        }
    }
    let n = valid.len();
    if n < 3 {
        return Err(Error::TooFewValid {
            found: n,
            needed: 3,
        });
    }
    let cap = cap.max(3);
    let mut obs = RoadObservations::default();
    if n <= cap {
        for (u, v, d) in valid {
            obs.push(u as f64, v as f64, d);
        }
    } else {
        for i in 0..cap {
            let (u, v, d) = valid[(i as u128 * n as u128 / cap as u128) as usize];
            obs.push(u as f64, v as f64, d);
        }
    }
    Ok(obs)
}

/// Transformed disparity map and the number of pixels clamped at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Transformed {
    pub map: DisparityMap,
    pub clamped: usize,
}

/// `D2 = D1 - road(u, v) + delta_dt`, negative results clamped to 0.
pub fn transform_disparity(
    d1: &DisparityMap,
    model: &RoadModel,
    delta_dt: f64,
) -> Result<Transformed> {
    if !model.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "road model is not finite: {model:?}"
        )));
    }
    let (w, h) = d1.dims();
    let (s, c) = model.phi.sin_cos();
    let mut clamped = 0;
    let mut out = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let d = d1.get(u, v);
            if !is_valid(d) {
                out.push(INVALID_DISPARITY);
                continue;
            }
            let road = model.a0 + model.a1 * (v as f64 * c - u as f64 * s);
            let t = d - road + delta_dt;
            if t < 0.0 {
                clamped += 1;
                out.push(0.0);
            } else {
                out.push(t);
            }
        }
    }
    Ok(Transformed {
        map: DisparityMap::from_raw(w, h, out),
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_cap() {
        let m = DisparityMap::filled(10, 10, 4.0).unwrap();
        assert_eq!(sample_observations(&m, None).unwrap().len(), 100);

        let mut vals = vec![INVALID_DISPARITY; 100];
        vals[3] = 1.0;
        vals[50] = 2.0;
        let m = DisparityMap::new(10, 10, vals).unwrap();
        assert!(matches!(
            sample_observations(&m, None),
            Err(Error::TooFewValid { found: 2, .. })
        ));

        let m = DisparityMap::filled(1000, 1000, 4.0).unwrap();
        let obs = sample_observations(&m, None).unwrap();
        assert_eq!(obs.len(), 100_000);
        // Stride 10 in scan order.
        assert_eq!((obs.u[1], obs.v[1]), (10.0, 0.0));
        assert_eq!((obs.u[100], obs.v[100]), (0.0, 1.0));
    }

    #[test]
    fn roi_restricts_sampling() {
        let m = DisparityMap::from_fn(8, 8, |u, v| (u + v) as f64).unwrap();
        let obs = sample_observations(&m, Some(Roi::new(2, 3, 3, 2))).unwrap();
        assert_eq!(obs.len(), 6);
        assert!(obs.u.iter().all(|&u| (2.0..5.0).contains(&u)));
        assert!(obs.v.iter().all(|&v| (3.0..5.0).contains(&v)));
        assert!(sample_observations(&m, Some(Roi::new(6, 0, 3, 2))).is_err());
    }

    #[test]
    fn transform_examples() {
        let model = RoadModel::new(12.0, 0.2, 0.01);
        let d1 =
            DisparityMap::from_fn(20, 10, |u, v| model.disparity_at(u as f64, v as f64)).unwrap();
        let t = transform_disparity(&d1, &model, 30.0).unwrap();
        assert!(t.map.values().iter().all(|&d| (d - 30.0).abs() < 1e-12));
        assert_eq!(t.clamped, 0);

        let m0 = RoadModel::new(10.0, 0.5, 0.0);
        let d1 = DisparityMap::from_fn(4, 4, |_, v| m0.disparity_at(0.0, v as f64) - 2.0).unwrap();
        let t = transform_disparity(&d1, &m0, 30.0).unwrap();
        assert!(t.map.values().iter().all(|&d| (d - 28.0).abs() < 1e-12));
    }

    #[test]
    fn invalid_kept_and_negatives_clamped() {
        let model = RoadModel::new(10.0, 0.0, 0.0);
        let d1 = DisparityMap::new(2, 2, vec![INVALID_DISPARITY, 10.0, 1.0, 0.0]).unwrap();
        let t = transform_disparity(&d1, &model, 5.0).unwrap();
        assert_eq!(t.map.values(), &[INVALID_DISPARITY, 5.0, 0.0, 0.0]);
        assert_eq!(t.clamped, 2);
    }
}
