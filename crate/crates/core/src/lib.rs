//! Real-time facial expression masking: HoG/SVM face detection, a VGG-style
//! expression classifier and homography-based emoji compositing.

pub mod emotion;
pub mod error;
pub mod facedetect;
pub mod geometry;
pub mod imagecore;
pub mod nn;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
