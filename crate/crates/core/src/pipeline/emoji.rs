use std::path::Path;

use crate::emotion::EmotionLabel;
use crate::error::{Error, Result};
use crate::geometry::KeypointSet;
use crate::imagecore::{Channels, Image};

/// One RGBA emoji per label plus its unit-space keypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct EmojiSet {
    images: Vec<Image>,
    keypoints: Vec<KeypointSet>,
}

impl EmojiSet {
    /// Images and keypoints in [`EmotionLabel::ALL`] order.
    pub fn new(images: Vec<Image>, keypoints: Vec<KeypointSet>) -> Result<Self> {
        if images.len() != 7 || keypoints.len() != 7 {
            return Err(Error::Config(format!(
                "emoji set needs 7 images and 7 keypoint sets, got {} and {}",
                images.len(),
                keypoints.len()
            )));
        }
        for (img, label) in images.iter().zip(EmotionLabel::ALL) {
            if img.channels() != Channels::Rgba4 {
                return Err(Error::UnsupportedVariant(format!(
                    "emoji `{label}` must be RGBA, got {:?}",
                    img.channels()
                )));
            }
        }
        for k in &keypoints {
            k.validate()?;
        }
        Ok(EmojiSet { images, keypoints })
    }

    /// Reads `<label>.png` and its `<label>.json` sidecar for every label.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut images = Vec::with_capacity(7);
        let mut keypoints = Vec::with_capacity(7);
        for label in EmotionLabel::ALL {
            images.push(Image::load(dir.join(format!("{label}.png")))?);
            keypoints.push(KeypointSet::load_sidecar(
                dir.join(format!("{label}.json")),
            )?);
        }
        Self::new(images, keypoints)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, label) in EmotionLabel::ALL.into_iter().enumerate() {
            self.images[i].save(dir.join(format!("{label}.png")))?;
            self.keypoints[i].save_sidecar(dir.join(format!("{label}.json")))?;
        }
        Ok(())
    }

    pub fn image(&self, label: EmotionLabel) -> &Image {
        &self.images[label.index()]
    }

    pub fn keypoints(&self, label: EmotionLabel) -> &KeypointSet {
        &self.keypoints[label.index()]
    }

    /// Keypoints scaled to the emoji's pixel size, the homography source.
    pub fn pixel_keypoints(&self, label: EmotionLabel) -> KeypointSet {
        let img = self.image(label);
        self.keypoints(label)
            .scaled(img.width() as f64, img.height() as f64)
    }

    /// Procedurally drawn emoji with keypoints matching the default face
    /// landmark ratios.
    pub fn synthetic(size: u32) -> Self {
        EmojiSet {
            images: EmotionLabel::ALL
                .iter()
                .map(|&l| crate::synth::render_emoji(l, size))
                .collect(),
            keypoints: vec![crate::synth::emoji_keypoints(); 7],
        }
    }

    /// Fully transparent emoji; compositing them leaves frames unchanged.
    pub fn transparent(size: u32) -> Self {
        let blank = Image::new(size, size, Channels::Rgba4).expect("positive size");
        EmojiSet {
            images: vec![blank; 7],
            keypoints: vec![KeypointSet::default_emoji(); 7],
        }
    }
}
