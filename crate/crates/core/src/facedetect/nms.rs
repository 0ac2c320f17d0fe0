use serde::{Deserialize, Serialize};

/// Axis-aligned face rectangle in frame pixels with its SVM margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceBox {
    pub x: f32,
    pub y: f32,
    pub w: f32,
    pub h: f32,
    pub score: f32,
}

impl FaceBox {
    pub fn new(x: f32, y: f32, w: f32, h: f32, score: f32) -> Self {
        FaceBox { x, y, w, h, score }
    }

    pub fn area(&self) -> f32 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn iou(&self, other: &FaceBox) -> f32 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if ix <= 0.0 || iy <= 0.0 {
            return 0.0;
        }
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// Descending score, then ascending (y, x) for a deterministic order.
pub(crate) fn sort_by_score(boxes: &mut [FaceBox]) {
    boxes.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
    });
}

/// Greedy suppression: walk boxes by descending score and drop any box whose
/// IoU with an already kept box exceeds `iou_threshold`.
pub fn nms(boxes: &[FaceBox], iou_threshold: f32) -> Vec<FaceBox> {
    let mut sorted = boxes.to_vec();
    sort_by_score(&mut sorted);
    let mut kept: Vec<FaceBox> = Vec::new();
    for b in sorted {
        if kept.iter().all(|k| k.iou(&b) <= iou_threshold) {
            kept.push(b);
        }
    }
    kept
}
