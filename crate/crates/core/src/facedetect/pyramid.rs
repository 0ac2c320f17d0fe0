use crate::error::Result;
use crate::imagecore::{resize_bilinear, Image};

#[derive(Debug, Clone)]
pub struct PyramidLevel {
    /// Frame pixels per level pixel.
    pub scale: f32,
    pub image: Image,
}

/// Downscaled copies of `img` for a `window`-pixel detector. The first level
/// is the scale at which a window covers `min_size` frame pixels (never
/// below 1); each further level shrinks by `scale_step`, stopping once either
/// side would fall below the window.
pub fn build_pyramid(
    img: &Image,
    window: u32,
    scale_step: f32,
    min_size: u32,
) -> Result<Vec<PyramidLevel>> {
    if scale_step.is_nan() || scale_step <= 1.0 {
        return Err(crate::Error::InvalidConfig(format!(
            "pyramid scale step must exceed 1, got {scale_step}"
        )));
    }
    let mut levels = Vec::new();
    let mut scale = (min_size as f32 / window as f32).max(1.0);
    loop {
        let w = (img.width() as f32 / scale).round() as u32;
        let h = (img.height() as f32 / scale).round() as u32;
        if w < window || h < window {
            break;
        }
        let image = resize_bilinear(img, w, h)?;
        levels.push(PyramidLevel { scale, image });
        scale *= scale_step;
    }
    Ok(levels)
}
