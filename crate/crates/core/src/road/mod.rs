//! Roll-aware road disparity model, disparity transformation and 3D
//! reprojection.
//!
//! A planar road seen by a rectified rig whose cameras are rolled by `phi`
//! about the optical axis projects to disparities
//!
//! ```text
//! d(u, v) = a0 + a1 * (v cos(phi) - u sin(phi))
//! ```
//!
//! For a fixed `phi` the best `(a0, a1)` is a 2x2 linear least-squares
//! problem; the roll itself is found by minimizing the remaining residual
//! energy over `phi`.

mod cloud;
mod fit;
mod transform;

pub use cloud::{closest_distance_error, reproject, reproject_where, KdTree, PointCloud};
pub use fit::{
    estimate_roll, fit_line, fit_road_model, golden_section_minimize, residual_energy, LineFit,
    RoadFit,
};
pub use transform::{
    sample_observations, sample_observations_capped, transform_disparity, Roi, Transformed,
    MAX_OBSERVATIONS,
};

use serde::Serialize;

/// Road disparity projection parameters plus rig roll angle (radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoadModel {
    pub a0: f64,
    pub a1: f64,
    pub phi: f64,
}

impl RoadModel {
    pub fn new(a0: f64, a1: f64, phi: f64) -> Self {
        Self { a0, a1, phi }
    }

    pub fn is_finite(&self) -> bool {
        self.a0.is_finite() && self.a1.is_finite() && self.phi.is_finite()
    }

    /// Rotated vertical coordinate `v cos(phi) - u sin(phi)`.
    #[inline]
    pub fn rotated_row(&self, u: f64, v: f64) -> f64 {
        v * self.phi.cos() - u * self.phi.sin()
    }

    #[inline]
    pub fn disparity_at(&self, u: f64, v: f64) -> f64 {
        self.a0 + self.a1 * self.rotated_row(u, v)
    }

    /// Rescales a model fitted on a 2x2-decimated disparity map to full
    /// resolution. Coarse pixel `x` covers full pixels `2x` and `2x + 1`, and
    /// coarse disparities are half the full ones.
    pub fn upscale2(&self) -> Self {
        let (s, c) = self.phi.sin_cos();
        Self {
            a0: 2.0 * self.a0 - 0.5 * self.a1 * (c - s),
            a1: self.a1,
            phi: self.phi,
        }
    }
}

/// Road disparity at pixel `(u, v)` under `model`.
pub fn road_disparity_at(model: &RoadModel, u: f64, v: f64) -> f64 {
    model.disparity_at(u, v)
}

/// Disparity observations `(u_i, v_i, d_i)` feeding the road fit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoadObservations {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub d: Vec<f64>,
}

impl RoadObservations {
    pub fn new(u: Vec<f64>, v: Vec<f64>, d: Vec<f64>) -> crate::Result<Self> {
        if u.len() != v.len() || u.len() != d.len() {
            return Err(crate::Error::InvalidParameter(format!(
                "observation vectors differ in length: {} / {} / {}",
                u.len(),
                v.len(),
                d.len()
            )));
        }
        if u.len() < 3 {
            return Err(crate::Error::TooFewValid {
                found: u.len(),
                needed: 3,
            });
        }
        if let Some(bad) = d.iter().find(|x| !crate::raster::is_valid(**x)) {
            return Err(crate::Error::InvalidParameter(format!(
                "observation disparity {bad} is not a valid disparity"
            )));
        }
        Ok(Self { u, v, d })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub(crate) fn push(&mut self, u: f64, v: f64, d: f64) {
        self.u.push(u);
        self.v.push(v);
        self.d.push(d);
    }
}
