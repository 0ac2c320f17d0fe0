use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facedetect::DetectorParams;
use crate::geometry::{LandmarkRatios, Sampling};

fn default_model() -> String {
    "vgg_ba_small".into()
}

fn default_window() -> usize {
    5
}

/// JSON run configuration. Relative paths are resolved against the
/// directory of the config file by [`PipelineConfig::load`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// VGGW weight file.
    pub weights: PathBuf,
    /// Architecture name (`vgg_ba_small`, `vgg11`, ...) or a layer string
    /// such as `64,M,128,M`.
    #[serde(default = "default_model")]
    pub model: String,
    /// Detector weights. Without one, only external boxes locate faces.
    #[serde(default)]
    pub svm: Option<PathBuf>,
    pub emoji_dir: PathBuf,
    #[serde(default)]
    pub smooth: bool,
    #[serde(default = "default_window")]
    pub smooth_window: usize,
    #[serde(default)]
    pub detector: DetectorParams,
    #[serde(default)]
    pub landmarks: LandmarkRatios,
    #[serde(default)]
    pub boxes: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub metrics: Option<PathBuf>,
    #[serde(default)]
    pub sampling: Sampling,
}

impl PipelineConfig {
    /// A config with every optional field at its default.
    pub fn new(weights: impl Into<PathBuf>, emoji_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            weights: weights.into(),
            model: default_model(),
            svm: None,
            emoji_dir: emoji_dir.into(),
            smooth: false,
            smooth_window: default_window(),
            detector: DetectorParams::default(),
            landmarks: LandmarkRatios::default(),
            boxes: None,
            output_dir: None,
            metrics: None,
            sampling: Sampling::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Joins every relative path onto `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.weights);
        fix(&mut self.emoji_dir);
        for p in [
            &mut self.svm,
            &mut self.boxes,
            &mut self.output_dir,
            &mut self.metrics,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// `k ≥ 1` and every input file present.
    pub fn validate(&self) -> Result<()> {
        if self.smooth_window == 0 {
            return Err(Error::Config("smooth_window must be at least 1".into()));
        }
        let inputs = [Some(&self.weights), self.svm.as_ref(), self.boxes.as_ref()];
        for p in inputs.into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::SourceUnavailable(format!(
                    "{} not found",
                    p.display()
                )));
            }
        }
        if !self.emoji_dir.is_dir() {
            return Err(Error::SourceUnavailable(format!(
                "emoji directory {} not found",
                self.emoji_dir.display()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_uses_defaults() {
        let cfg = PipelineConfig::from_json(r#"{"weights":"w.vggw","emoji_dir":"emoji"}"#).unwrap();
        assert_eq!(cfg, PipelineConfig::new("w.vggw", "emoji"));
        assert_eq!(cfg.detector.min_size, 80);
        assert_eq!(cfg.smooth_window, 5);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = PipelineConfig::from_json(r#"{"weights":"w","emoji_dir":"e","smoth":true}"#);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn relative_paths_follow_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = PipelineConfig::new("w.vggw", "/abs/emoji");
        cfg.metrics = Some("out/m.jsonl".into());
        let path = dir.path().join("run.json");
        cfg.save(&path).unwrap();
        let loaded = PipelineConfig::load(&path).unwrap();
        assert_eq!(loaded.weights, dir.path().join("w.vggw"));
        assert_eq!(loaded.emoji_dir, PathBuf::from("/abs/emoji"));
        assert_eq!(loaded.metrics, Some(dir.path().join("out/m.jsonl")));
    }

    #[test]
    fn validation() {
        let dir = tempfile::tempdir().unwrap();
        let w = dir.path().join("w.vggw");
        std::fs::write(&w, b"x").unwrap();
        let mut cfg = PipelineConfig::new(&w, dir.path());
        cfg.validate().unwrap();
        cfg.smooth_window = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.smooth_window = 3;
        cfg.svm = Some(dir.path().join("missing.hsvm"));
        assert!(matches!(cfg.validate(), Err(Error::SourceUnavailable(_))));
    }
}
