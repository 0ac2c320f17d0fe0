use serde::{Deserialize, Serialize};

use super::hog::{block_grid, HogParams};
use super::nms::{nms, sort_by_score, FaceBox};
use super::pyramid::build_pyramid;
use super::svm::{dot, LinearSvm};
use crate::error::{Error, Result};
use crate::imagecore::{to_grayscale, Image};

/// Sliding-window settings. `stride` must be a multiple of the HoG cell size
/// so windows line up with the dense block grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorParams {
    pub stride: u32,
    pub scale_step: f32,
    pub min_size: u32,
    pub nms_iou: f32,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            stride: 8,
            scale_step: 1.2,
            min_size: 80,
            nms_iou: 0.3,
        }
    }
}

/// Scores every window of every pyramid level, keeps margins above the SVM
/// threshold, maps them to frame coordinates and suppresses overlaps.
/// Results are sorted by descending score.
pub fn detect_faces(
    img: &Image,
    svm: &LinearSvm,
    hog: &HogParams,
    params: &DetectorParams,
) -> Result<Vec<FaceBox>> {
    hog.validate()?;
    if svm.weights.len() != hog.descriptor_len() {
        return Err(Error::UntrainedModel {
            expected: hog.descriptor_len(),
            actual: svm.weights.len(),
        });
    }
    if params.stride == 0
        || !params
            .stride
            .is_multiple_of(hog.cell_size * hog.block_stride)
    {
        return Err(Error::InvalidConfig(format!(
            "stride {} is not a multiple of the {} px block step",
            params.stride,
            hog.cell_size * hog.block_stride
        )));
    }
    let step = (params.stride / (hog.cell_size * hog.block_stride)) as usize;
    let per_window = hog.blocks_per_window() as usize;
    let row_len = per_window * hog.block_len();

    let gray = to_grayscale(img);
    let mut raw = Vec::new();
    for level in build_pyramid(&gray, hog.window, params.scale_step, params.min_size)? {
        let grid = block_grid(&level.image, hog)?;
        if grid.blocks_x < per_window || grid.blocks_y < per_window {
            continue;
        }
        let block_px = (hog.cell_size * hog.block_stride) as f32;
        for by in (0..=grid.blocks_y - per_window).step_by(step) {
            for bx in (0..=grid.blocks_x - per_window).step_by(step) {
                // rows of blocks are contiguous in the grid
                let mut score = svm.bias;
                for r in 0..per_window {
                    let start = ((by + r) * grid.blocks_x + bx) * grid.block_len;
                    let w = &svm.weights[r * row_len..(r + 1) * row_len];
                    score += dot(w, &grid.values[start..start + row_len]);
                }
                if score > svm.threshold {
                    let s = level.scale;
                    raw.push(FaceBox::new(
                        bx as f32 * block_px * s,
                        by as f32 * block_px * s,
                        hog.window as f32 * s,
                        hog.window as f32 * s,
                        score,
                    ));
                }
            }
        }
    }
    let mut kept = nms(&raw, params.nms_iou);
    sort_by_score(&mut kept);
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facedetect::hog::hog_descriptor;
    use crate::imagecore::{crop, Channels};

    fn textured(w: u32, h: u32) -> Image {
        Image::from_fn(w, h, Channels::Gray1, |x, y| {
            [((x * 31 + y * 17 + (x * y) % 23) % 256) as u8, 0, 0, 0]
        })
        .unwrap()
    }

    /// Sliding-window scores must equal scoring the cropped window's own
    /// descriptor, up to border gradients (interior-only weights here).
    #[test]
    fn dense_scores_match_window_descriptor() {
        let hog = HogParams::default();
        let img = textured(160, 96);
        let grid = block_grid(&img, &hog).unwrap();
        // weights only on the interior 5x5 blocks, which never touch a window border
        let mut weights = vec![0f32; hog.descriptor_len()];
        for by in 1..6 {
            for bx in 1..6 {
                for k in 0..36 {
                    weights[(by * 7 + bx) * 36 + k] = ((by * 7 + bx + k) % 5) as f32 - 2.0;
                }
            }
        }
        let svm = LinearSvm {
            weights,
            bias: 0.0,
            threshold: 0.0,
        };
        for (cx, cy) in [(0usize, 0usize), (3, 2), (12, 4)] {
            let win = crop(&img, cx as i64 * 8, cy as i64 * 8, 64, 64).unwrap();
            let expect = svm.margin(&hog_descriptor(&win, &hog).unwrap());
            let mut got = 0.0;
            for r in 0..7 {
                let start = ((cy + r) * grid.blocks_x + cx) * 36;
                got += dot(
                    &svm.weights[r * 252..(r + 1) * 252],
                    &grid.values[start..start + 252],
                );
            }
            assert!((got - expect).abs() < 1e-4, "{got} vs {expect}");
        }
    }

    #[test]
    fn wrong_length_svm_is_untrained() {
        let svm = LinearSvm {
            weights: vec![0.0; 10],
            bias: 0.0,
            threshold: 0.0,
        };
        let img = textured(64, 64);
        assert!(matches!(
            detect_faces(
                &img,
                &svm,
                &HogParams::default(),
                &DetectorParams::default()
            ),
            Err(Error::UntrainedModel { .. })
        ));
    }

    #[test]
    fn bad_stride_rejected() {
        let hog = HogParams::default();
        let svm = LinearSvm {
            weights: vec![0.0; hog.descriptor_len()],
            bias: 0.0,
            threshold: 0.0,
        };
        let params = DetectorParams {
            stride: 12,
            ..Default::default()
        };
        assert!(detect_faces(&textured(64, 64), &svm, &hog, &params).is_err());
    }
}
