//! Detect → classify → mask over frame sequences, with per-stage timing.

mod config;
mod emoji;
mod metrics;
mod source;

use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::PipelineConfig;
pub use emoji::EmojiSet;
pub use metrics::{FrameMetrics, StageStats, Summary};
pub use source::{list_frames, read_pnm_frame, ExternalBoxes};

use crate::emotion::{classify, preprocess_face, EmotionLabel, Smoother};
use crate::error::{Error, Result};
use crate::facedetect::{detect_faces, DetectorParams, FaceBox, HogParams, LinearSvm};
use crate::geometry::{
    estimate_homography, proportional_landmarks, warp_composite_in_place, LandmarkRatios, Sampling,
};
use crate::imagecore::Image;
use crate::nn::{load_weights, LayerString, Model, VggConfig};

/// Resolves a model name or a layer string to a 1-channel, 7-class config.
pub fn model_config(name: &str) -> Result<VggConfig> {
    if let Some(cfg) = VggConfig::by_name(name) {
        return Ok(cfg);
    }
    let layers: LayerString = name
        .parse()
        .map_err(|_| Error::Config(format!("unknown model `{name}`")))?;
    let cfg = VggConfig::new(layers.0, 1, 7);
    cfg.validate()?;
    Ok(cfg)
}

/// HoG detector state.
#[derive(Debug, Clone)]
pub struct Detector {
    pub svm: LinearSvm,
    pub hog: HogParams,
    pub params: DetectorParams,
}

/// One stream's worth of models and state. Frames must be fed in order for
/// the smoother to behave as specified.
#[derive(Debug, Clone)]
pub struct Pipeline {
    model: Model,
    emoji: EmojiSet,
    detector: Option<Detector>,
    boxes: ExternalBoxes,
    landmarks: LandmarkRatios,
    smoother: Option<Smoother>,
    sampling: Sampling,
}

fn ms_since(t: Instant) -> f32 {
    t.elapsed().as_secs_f32() * 1000.0
}

impl Pipeline {
    /// A pipeline with no detector, no smoothing and default landmarks.
    pub fn new(model: Model, emoji: EmojiSet) -> Self {
        Pipeline {
            model,
            emoji,
            detector: None,
            boxes: ExternalBoxes::default(),
            landmarks: LandmarkRatios::default(),
            smoother: None,
            sampling: Sampling::default(),
        }
    }

    pub fn with_detector(mut self, svm: LinearSvm, hog: HogParams, params: DetectorParams) -> Self {
        self.detector = Some(Detector { svm, hog, params });
        self
    }

    pub fn with_smoothing(mut self, k: usize) -> Self {
        self.smoother = Some(Smoother::new(k));
        self
    }

    pub fn with_boxes(mut self, boxes: ExternalBoxes) -> Self {
        self.boxes = boxes;
        self
    }

    pub fn with_landmarks(mut self, ratios: LandmarkRatios) -> Self {
        self.landmarks = ratios;
        self
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    /// Loads every model and asset a config names.
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let model = load_weights(&cfg.weights, &model_config(&cfg.model)?)?;
        let mut p = Pipeline::new(model, EmojiSet::load(&cfg.emoji_dir)?)
            .with_landmarks(cfg.landmarks)
            .with_sampling(cfg.sampling);
        if let Some(path) = &cfg.svm {
            p = p.with_detector(LinearSvm::load(path)?, HogParams::default(), cfg.detector);
        }
        if let Some(path) = &cfg.boxes {
            p = p.with_boxes(ExternalBoxes::load(path)?);
        }
        if cfg.smooth {
            p = p.with_smoothing(cfg.smooth_window);
        }
        Ok(p)
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn emoji(&self) -> &EmojiSet {
        &self.emoji
    }

    pub fn detector(&self) -> Option<&Detector> {
        self.detector.as_ref()
    }

    pub fn boxes_mut(&mut self) -> &mut ExternalBoxes {
        &mut self.boxes
    }

    /// Clears the smoother so a new sequence starts fresh.
    pub fn reset(&mut self) {
        if let Some(s) = &mut self.smoother {
            s.reset();
        }
    }

    /// The box for frame `index`: an external one if supplied, otherwise the
    /// top detection.
    pub fn locate(&self, index: u64, frame: &Image) -> Result<Option<FaceBox>> {
        if let Some(b) = self.boxes.get(index) {
            return Ok(Some(b));
        }
        match &self.detector {
            Some(d) => Ok(detect_faces(frame, &d.svm, &d.hog, &d.params)?
                .first()
                .copied()),
            None => Ok(None),
        }
    }

    /// Masks one frame. Without a face, or on any error, the input comes back
    /// unchanged and the metrics say why.
    pub fn process_frame(&mut self, index: u64, frame: &Image) -> (Image, FrameMetrics) {
        let start = Instant::now();
        let mut m = FrameMetrics::new(index);
        let out = match self.try_process(index, frame, &mut m) {
            Ok(Some(out)) => out,
            Ok(None) => frame.clone(),
            Err(e) => {
                m.error = Some(e.to_string());
                frame.clone()
            }
        };
        m.total_ms = ms_since(start).max(m.detect_ms + m.classify_ms + m.mask_ms);
        (out, m)
    }

    fn try_process(
        &mut self,
        index: u64,
        frame: &Image,
        m: &mut FrameMetrics,
    ) -> Result<Option<Image>> {
        let t = Instant::now();
        let face = self.locate(index, frame);
        m.detect_ms = ms_since(t);
        let Some(face) = face? else {
            return Ok(None);
        };
        m.face = Some(face);

        let t = Instant::now();
        let classified = preprocess_face(frame, &face).and_then(|x| classify(&self.model, &x));
        let label = classified.map(|(_, raw)| {
            m.raw_label = Some(raw);
            match &mut self.smoother {
                Some(s) => s.push(raw),
                None => raw,
            }
        });
        m.classify_ms = ms_since(t);
        let label = label?;
        m.label = Some(label);

        let t = Instant::now();
        let masked = self.mask(frame, &face, label);
        m.mask_ms = ms_since(t);
        masked.map(Some)
    }

    /// Composites the emoji for `label` over `face`; the result is RGB.
    pub fn mask(&self, frame: &Image, face: &FaceBox, label: EmotionLabel) -> Result<Image> {
        let src = self.emoji.pixel_keypoints(label);
        let dst = proportional_landmarks(face, &self.landmarks);
        let h = estimate_homography(&src, &dst)?;
        let mut out = frame.to_rgb();
        warp_composite_in_place(&mut out, self.emoji.image(label), &h, self.sampling)?;
        Ok(out)
    }
}

/// Where [`run_stream`] reads frames from.
pub enum FrameSource {
    /// Numbered image files, see [`list_frames`].
    Dir(PathBuf),
    /// Concatenated binary PPM/PGM frames.
    Stream(Box<dyn BufRead>),
}

/// Where [`run_stream`] writes. Missing entries are skipped.
#[derive(Debug, Clone, Default)]
pub struct RunOutputs {
    pub frames_dir: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
}

struct Sink {
    frames_dir: Option<PathBuf>,
    metrics: Option<BufWriter<std::fs::File>>,
    records: Vec<FrameMetrics>,
}

impl Sink {
    fn open(out: &RunOutputs) -> Result<Self> {
        if let Some(d) = &out.frames_dir {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        let metrics = match &out.metrics {
            Some(p) => {
                if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                Some(BufWriter::new(
                    std::fs::File::create(p).map_err(|e| Error::io(p, e))?,
                ))
            }
            None => None,
        };
        Ok(Sink {
            frames_dir: out.frames_dir.clone(),
            metrics,
            records: Vec::new(),
        })
    }

    fn push(&mut self, name: &str, frame: Option<&Image>, mut m: FrameMetrics) -> Result<()> {
        if let (Some(dir), Some(img)) = (&self.frames_dir, frame) {
            if let Err(e) = img.save(dir.join(format!("{name}.png"))) {
                m.error.get_or_insert_with(|| e.to_string());
            }
        }
        if let Some(w) = &mut self.metrics {
            let line = serde_json::to_string(&m)?;
            writeln!(w, "{line}").map_err(|e| Error::io("<metrics>", e))?;
        }
        self.records.push(m);
        Ok(())
    }

    fn finish(mut self) -> Result<Summary> {
        if let Some(w) = &mut self.metrics {
            w.flush().map_err(|e| Error::io("<metrics>", e))?;
        }
        Ok(Summary::from_metrics(&self.records))
    }
}

/// Processes every frame in order, writing masked frames as PNG and one
/// metrics line per frame. Unreadable files in a directory become error
/// records; a corrupt stream ends the run with an error.
pub fn run_stream(
    pipeline: &mut Pipeline,
    source: FrameSource,
    out: &RunOutputs,
) -> Result<Summary> {
    let mut sink = Sink::open(out)?;
    match source {
        FrameSource::Dir(dir) => {
            for (i, path) in list_frames(&dir)?.iter().enumerate() {
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| format!("frame_{i:06}"));
                match Image::load(path) {
                    Ok(frame) => {
                        let (img, m) = pipeline.process_frame(i as u64, &frame);
                        sink.push(&name, Some(&img), m)?;
                    }
                    Err(e) => {
                        let mut m = FrameMetrics::new(i as u64);
                        m.error = Some(e.to_string());
                        sink.push(&name, None, m)?;
                    }
                }
            }
        }
        FrameSource::Stream(mut reader) => {
            let mut i = 0u64;
            while let Some(frame) = read_pnm_frame(&mut reader)? {
                let (img, m) = pipeline.process_frame(i, &frame);
                sink.push(&format!("frame_{i:06}"), Some(&img), m)?;
                i += 1;
            }
        }
    }
    sink.finish()
}

/// Timing over `repeats` passes of `frames`. Model loading is excluded and
/// the smoother is reset before each pass.
pub fn bench(pipeline: &mut Pipeline, frames: &[Image], repeats: usize) -> Result<Summary> {
    if frames.is_empty() || repeats == 0 {
        return Err(Error::NoFrames);
    }
    let mut records = Vec::with_capacity(frames.len() * repeats);
    for _ in 0..repeats {
        pipeline.reset();
        for (i, f) in frames.iter().enumerate() {
            records.push(pipeline.process_frame(i as u64, f).1);
        }
    }
    Ok(Summary::from_metrics(&records))
}

/// Loads every frame in `dir` for [`bench`].
pub fn load_frames(dir: impl AsRef<Path>) -> Result<Vec<Image>> {
    list_frames(dir)?.iter().map(Image::load).collect()
}
