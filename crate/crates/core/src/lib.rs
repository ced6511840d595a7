//! Stereo road-pothole detection.
//!
//! A rectified stereo pair is matched with semi-global matching after a
//! per-row perspective pre-warp, a roll-aware road disparity model is fitted,
//! and the road is subtracted out. Damaged regions then show up as low values
//! that are segmented with SLIC superpixels and an adaptive threshold found
//! by 2-means on a 2D disparity histogram.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod perspective;
pub mod pipeline;
pub mod raster;
pub mod road;
pub mod segment;
pub mod stereo;
pub mod synth;

pub use config::{Connectivity, PipelineConfig, StereoRig};
pub use error::{Error, Result};
pub use raster::{is_valid, DisparityMap, GrayImage, LabelMap, ViewMask, INVALID_DISPARITY};
pub use road::{road_disparity_at, RoadModel, RoadObservations};
