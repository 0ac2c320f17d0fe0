//! HoG + linear SVM face detection over an image pyramid.

mod detector;
mod hog;
mod nms;
mod pyramid;
mod svm;
mod windows;

pub use detector::{detect_faces, DetectorParams};
pub use hog::{block_grid, gradients, hog_descriptor, BlockGrid, GradientField, HogParams};
pub use nms::{nms, FaceBox};
pub use pyramid::{build_pyramid, PyramidLevel};
pub use svm::{train_linear_svm, train_linear_svm_report, LinearSvm, SvmTrainParams, SvmTraining};
pub use windows::{negative_descriptors, positive_descriptors};
