use std::fmt;

use serde::{Deserialize, Serialize};

use crate::emotion::EmotionLabel;
use crate::facedetect::FaceBox;

/// One JSONL record per processed frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame: u64,
    pub detect_ms: f32,
    pub classify_ms: f32,
    pub mask_ms: f32,
    pub total_ms: f32,
    pub label: Option<EmotionLabel>,
    /// Classifier output before smoothing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_label: Option<EmotionLabel>,
    #[serde(rename = "box")]
    pub face: Option<FaceBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl FrameMetrics {
    pub fn new(frame: u64) -> Self {
        FrameMetrics {
            frame,
            detect_ms: 0.0,
            classify_ms: 0.0,
            mask_ms: 0.0,
            total_ms: 0.0,
            label: None,
            raw_label: None,
            face: None,
            error: None,
        }
    }
}

/// Mean, minimum and 95th percentile (nearest rank) of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageStats {
    pub samples: usize,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub p95_ms: f64,
}

impl StageStats {
    pub fn from_samples(samples: &[f32]) -> Self {
        if samples.is_empty() {
            return StageStats::default();
        }
        let mut sorted: Vec<f64> = samples.iter().map(|&v| v as f64).collect();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        StageStats {
            samples: n,
            mean_ms: sorted.iter().sum::<f64>() / n as f64,
            min_ms: sorted[0],
            p95_ms: sorted[rank - 1],
        }
    }
}

/// Per-stage timing over a run or benchmark.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub frames: usize,
    pub faces: usize,
    pub errors: usize,
    pub detect: StageStats,
    pub classify: StageStats,
    pub mask: StageStats,
    pub total: StageStats,
    /// `1000 / mean(total_ms)`, zero for an empty run.
    pub fps: f64,
}

impl Summary {
    pub fn from_metrics<'a>(records: impl IntoIterator<Item = &'a FrameMetrics>) -> Self {
        let (mut d, mut c, mut m, mut t) = (vec![], vec![], vec![], vec![]);
        let (mut faces, mut errors) = (0, 0);
        for r in records {
            d.push(r.detect_ms);
            c.push(r.classify_ms);
            m.push(r.mask_ms);
            t.push(r.total_ms);
            faces += r.face.is_some() as usize;
            errors += r.error.is_some() as usize;
        }
        let total = StageStats::from_samples(&t);
        Summary {
            frames: t.len(),
            faces,
            errors,
            detect: StageStats::from_samples(&d),
            classify: StageStats::from_samples(&c),
            mask: StageStats::from_samples(&m),
            fps: if total.mean_ms > 0.0 {
                1000.0 / total.mean_ms
            } else {
                0.0
            },
            total,
        }
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "frames {}  faces {}  errors {}",
            self.frames, self.faces, self.errors
        )?;
        for (name, s) in [
            ("detect", &self.detect),
            ("classify", &self.classify),
            ("mask", &self.mask),
            ("total", &self.total),
        ] {
            writeln!(
                f,
                "{name:<9} mean {:8.2} ms  min {:8.2} ms  p95 {:8.2} ms",
                s.mean_ms, s.min_ms, s.p95_ms
            )?;
        }
        write!(f, "fps {:.2}", self.fps)
    }
}
