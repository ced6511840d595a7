//! Superpixel segmentation of the transformed disparity map and pothole
//! extraction.

mod ccl;
mod detect;
mod pool;
mod slic;
mod threshold;

pub use ccl::{connected_components, label_regions};
pub use detect::{candidate_mask, detect_below, detect_potholes, discard_touching, DetectParams};
pub use pool::pool_superpixels;
pub use slic::{slic, Center, SuperpixelMap};
pub use threshold::{
    build_histogram, find_road_threshold, neighborhood_vectors, two_means_sorted, Bin, Histogram2D,
    ThresholdResult,
};
