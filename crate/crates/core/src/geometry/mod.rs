//! Keypoint correspondences, homography estimation and emoji compositing.

mod homography;
mod keypoints;
mod warp;

pub use homography::{
    apply_homography, estimate_homography, estimate_homography_f64, normalize_points,
    reprojection_error, Homography,
};
pub use keypoints::{proportional_landmarks, CoordSpace, Keypoint, KeypointSet, LandmarkRatios};
pub use warp::{warp_composite, warp_composite_in_place, warp_region, Region, Sampling};
