use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::hog::{hog_descriptor, HogParams};
use crate::error::Result;
use crate::imagecore::{crop, resize_bilinear, to_grayscale, Image};

/// Descriptors of face crops, each converted to gray and resized to the
/// window.
pub fn positive_descriptors(images: &[Image], hog: &HogParams) -> Result<Vec<Vec<f32>>> {
    images
        .iter()
        .map(|img| {
            let g = resize_bilinear(&to_grayscale(img), hog.window, hog.window)?;
            hog_descriptor(&g, hog)
        })
        .collect()
}

/// Descriptors of background images. Images larger than the window give
/// `per_image` randomly placed windows; smaller ones are resized to one.
pub fn negative_descriptors(
    images: &[Image],
    hog: &HogParams,
    per_image: usize,
    seed: u64,
) -> Result<Vec<Vec<f32>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let win = hog.window;
    let mut out = Vec::new();
    for img in images {
        let g = to_grayscale(img);
        if g.width() <= win || g.height() <= win {
            out.push(hog_descriptor(&resize_bilinear(&g, win, win)?, hog)?);
            continue;
        }
        for _ in 0..per_image.max(1) {
            let x = rng.random_range(0..=g.width() - win) as i64;
            let y = rng.random_range(0..=g.height() - win) as i64;
            out.push(hog_descriptor(&crop(&g, x, y, win, win)?, hog)?);
        }
    }
    Ok(out)
}
