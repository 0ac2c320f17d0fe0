//! Python bindings for the emomask core: images, the expression model,
//! homographies, the HoG/SVM detector, the smoother and the full pipeline.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use emomask::emotion::{self, EmotionLabel};
use emomask::facedetect::{self as fd, DetectorParams, HogParams};
use emomask::geometry::{self, CoordSpace, KeypointSet};
use emomask::imagecore::{self, Channels};
use emomask::nn::{self, Tensor};
use emomask::pipeline::{self, PipelineConfig};
use emomask::synth;

fn err(e: emomask::Error) -> PyErr {
    match e {
        emomask::Error::Io { .. } | emomask::Error::SourceUnavailable(_) => {
            PyIOError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn label(name: &str) -> PyResult<EmotionLabel> {
    name.parse().map_err(err)
}

/// 8-bit raster with 1, 3 or 4 interleaved channels.
#[pyclass(from_py_object, name = "Image", module = "emomask_py")]
#[derive(Clone)]
struct PyImage(imagecore::Image);

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: u32, height: u32, channels: usize, data: &[u8]) -> PyResult<Self> {
        let c = Channels::from_count(channels).ok_or_else(|| {
            PyValueError::new_err(format!("channels must be 1, 3 or 4, got {channels}"))
        })?;
        imagecore::Image::from_raw(width, height, c, data.to_vec())
            .map(PyImage)
            .map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        imagecore::Image::load(path).map(PyImage).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(path).map_err(err)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }

    #[getter]
    fn channels(&self) -> usize {
        self.0.channels().count()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.0.data())
    }

    fn pixel(&self, x: u32, y: u32) -> PyResult<Vec<u8>> {
        if x >= self.0.width() || y >= self.0.height() {
            return Err(PyValueError::new_err("pixel out of bounds"));
        }
        Ok(self.0.pixel(x, y).to_vec())
    }

    fn resize(&self, width: u32, height: u32) -> PyResult<Self> {
        imagecore::resize_bilinear(&self.0, width, height)
            .map(PyImage)
            .map_err(err)
    }

    fn to_grayscale(&self) -> Self {
        PyImage(imagecore::to_grayscale(&self.0))
    }

    fn to_rgb(&self) -> Self {
        PyImage(self.0.to_rgb())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!(
            "Image({}x{}, {} channels)",
            self.0.width(),
            self.0.height(),
            self.0.channels().count()
        )
    }
}

#[pyclass(from_py_object, name = "FaceBox", module = "emomask_py")]
#[derive(Clone, Copy)]
struct PyFaceBox(fd::FaceBox);

#[pymethods]
impl PyFaceBox {
    #[new]
    #[pyo3(signature = (x, y, w, h, score = 0.0))]
    fn new(x: f32, y: f32, w: f32, h: f32, score: f32) -> Self {
        PyFaceBox(fd::FaceBox::new(x, y, w, h, score))
    }

    #[getter]
    fn x(&self) -> f32 {
        self.0.x
    }

    #[getter]
    fn y(&self) -> f32 {
        self.0.y
    }

    #[getter]
    fn w(&self) -> f32 {
        self.0.w
    }

    #[getter]
    fn h(&self) -> f32 {
        self.0.h
    }

    #[getter]
    fn score(&self) -> f32 {
        self.0.score
    }

    fn iou(&self, other: &Self) -> f32 {
        self.0.iou(&other.0)
    }

    fn __repr__(&self) -> String {
        let b = self.0;
        format!(
            "FaceBox(x={}, y={}, w={}, h={}, score={})",
            b.x, b.y, b.w, b.h, b.score
        )
    }
}

/// VGG-style expression classifier.
#[pyclass(name = "Model", module = "emomask_py")]
struct PyModel(nn::Model);

#[pymethods]
impl PyModel {
    /// Seeded random weights for a named architecture or a layer string.
    #[staticmethod]
    #[pyo3(signature = (seed = 0, model = "vgg_ba_small"))]
    fn random(seed: u64, model: &str) -> PyResult<Self> {
        let cfg = pipeline::model_config(model).map_err(err)?;
        nn::Model::random(&cfg, seed).map(PyModel).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (path, model = "vgg_ba_small"))]
    fn load(path: PathBuf, model: &str) -> PyResult<Self> {
        let cfg = pipeline::model_config(model).map_err(err)?;
        nn::load_weights(path, &cfg).map(PyModel).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        nn::save_weights(&self.0, path).map_err(err)
    }

    /// Trainable parameter count.
    fn param_count(&self) -> usize {
        nn::count_params(&self.0).trainable
    }

    /// Logits for a flat NCHW input of the given shape.
    fn forward(&self, data: Vec<f32>, shape: [usize; 4]) -> PyResult<Vec<Vec<f32>>> {
        let t = Tensor::from_vec(shape, data).map_err(err)?;
        self.0.forward(&t).map_err(err)
    }

    /// Label name and class probabilities for a face region of `image`.
    #[pyo3(signature = (image, face = None))]
    fn classify(&self, image: &PyImage, face: Option<PyFaceBox>) -> PyResult<(String, Vec<f32>)> {
        let img = &image.0;
        let face = face.map_or_else(
            || fd::FaceBox::new(0.0, 0.0, img.width() as f32, img.height() as f32, 0.0),
            |f| f.0,
        );
        let input = emotion::preprocess_face(img, &face).map_err(err)?;
        let (scores, label) = emotion::classify(&self.0, &input).map_err(err)?;
        Ok((label.name().to_string(), scores.probs.to_vec()))
    }

    /// Max |Δlogit| and argmax mismatches against a parity file.
    fn replay_parity(&self, path: PathBuf) -> PyResult<(usize, f32, usize)> {
        let cases = nn::load_parity(path, self.0.config().num_classes).map_err(err)?;
        let r = nn::replay_parity(&self.0, &cases).map_err(err)?;
        Ok((r.cases, r.max_abs_diff, r.argmax_mismatches))
    }
}

/// Trainable and stored parameter counts plus byte size for an architecture.
#[pyfunction]
fn param_counts(model: &str) -> PyResult<(usize, usize, usize)> {
    let cfg = pipeline::model_config(model).map_err(err)?;
    let c = nn::count_config_params(&cfg);
    Ok((c.trainable, c.stored, c.bytes))
}

#[pyfunction]
fn softmax(logits: Vec<f32>) -> Vec<f32> {
    nn::softmax(&logits)
}

/// Row-major 3x3 homography from six source to six destination points.
#[pyfunction]
fn estimate_homography(src: [[f64; 2]; 6], dst: [[f64; 2]; 6]) -> PyResult<[[f64; 3]; 3]> {
    let s = KeypointSet::from_points(src, CoordSpace::FramePixels);
    let d = KeypointSet::from_points(dst, CoordSpace::FramePixels);
    geometry::estimate_homography(&s, &d)
        .map(|h| h.rows())
        .map_err(err)
}

#[pyfunction]
fn apply_homography(h: [[f64; 3]; 3], point: [f64; 2]) -> PyResult<[f64; 2]> {
    geometry::Homography::from_rows(h)
        .and_then(|h| h.apply(point))
        .map_err(err)
}

/// Composites an RGBA emoji onto an RGB frame through `h` (emoji → frame).
#[pyfunction]
#[pyo3(signature = (frame, emoji, h, nearest = false))]
fn warp_composite(
    frame: &PyImage,
    emoji: &PyImage,
    h: [[f64; 3]; 3],
    nearest: bool,
) -> PyResult<PyImage> {
    let h = geometry::Homography::from_rows(h).map_err(err)?;
    let sampling = if nearest {
        geometry::Sampling::Nearest
    } else {
        geometry::Sampling::Bilinear
    };
    geometry::warp_composite(&frame.0, &emoji.0, &h, sampling)
        .map(PyImage)
        .map_err(err)
}

#[pyfunction]
fn hog_descriptor(image: &PyImage) -> PyResult<Vec<f32>> {
    fd::hog_descriptor(&image.0, &HogParams::default()).map_err(err)
}

#[pyclass(from_py_object, name = "LinearSvm", module = "emomask_py")]
#[derive(Clone)]
struct PyLinearSvm(fd::LinearSvm);

#[pymethods]
impl PyLinearSvm {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        fd::LinearSvm::load(path).map(PyLinearSvm).map_err(err)
    }

    /// Pegasos training on precomputed descriptors.
    #[staticmethod]
    #[pyo3(signature = (pos, neg, seed = 0, lam = 1e-4, epochs = 50))]
    fn train(
        pos: Vec<Vec<f32>>,
        neg: Vec<Vec<f32>>,
        seed: u64,
        lam: f32,
        epochs: usize,
    ) -> PyResult<Self> {
        let params = fd::SvmTrainParams {
            lambda: lam,
            epochs,
            seed,
        };
        fd::train_linear_svm(&pos, &neg, &params)
            .map(PyLinearSvm)
            .map_err(err)
    }

    /// The demo detector trained on procedurally drawn faces.
    #[staticmethod]
    #[pyo3(signature = (seed = 0))]
    fn synthetic(seed: u64) -> PyResult<Self> {
        synth::train_synthetic_detector(&HogParams::default(), seed)
            .map(PyLinearSvm)
            .map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(path).map_err(err)
    }

    fn margin(&self, descriptor: Vec<f32>) -> PyResult<f32> {
        if descriptor.len() != self.0.weights.len() {
            return Err(PyValueError::new_err(format!(
                "descriptor has {} values, svm expects {}",
                descriptor.len(),
                self.0.weights.len()
            )));
        }
        Ok(self.0.margin(&descriptor))
    }

    #[pyo3(signature = (image, min_size = 80, stride = 8, scale_step = 1.2, nms_iou = 0.3))]
    fn detect(
        &self,
        image: &PyImage,
        min_size: u32,
        stride: u32,
        scale_step: f32,
        nms_iou: f32,
    ) -> PyResult<Vec<PyFaceBox>> {
        let params = DetectorParams {
            stride,
            scale_step,
            min_size,
            nms_iou,
        };
        fd::detect_faces(&image.0, &self.0, &HogParams::default(), &params)
            .map(|v| v.into_iter().map(PyFaceBox).collect())
            .map_err(err)
    }
}

/// Majority vote over the last `k` labels.
#[pyclass(name = "Smoother", module = "emomask_py")]
struct PySmoother(emotion::Smoother);

#[pymethods]
impl PySmoother {
    #[new]
    #[pyo3(signature = (k = 5))]
    fn new(k: usize) -> PyResult<Self> {
        if k == 0 {
            return Err(PyValueError::new_err("window must be at least 1"));
        }
        Ok(PySmoother(emotion::Smoother::new(k)))
    }

    fn push(&mut self, label_name: &str) -> PyResult<String> {
        Ok(self.0.push(label(label_name)?).name().to_string())
    }

    fn reset(&mut self) {
        self.0.reset();
    }

    #[getter]
    fn current(&self) -> Option<String> {
        self.0.current().map(|l| l.name().to_string())
    }
}

/// Detector, classifier and emoji set driven frame by frame.
#[pyclass(name = "Pipeline", module = "emomask_py")]
struct PyPipeline(pipeline::Pipeline);

#[pymethods]
impl PyPipeline {
    #[staticmethod]
    fn from_config(path: PathBuf) -> PyResult<Self> {
        let cfg = PipelineConfig::load(path).map_err(err)?;
        pipeline::Pipeline::from_config(&cfg)
            .map(PyPipeline)
            .map_err(err)
    }

    /// Random weights plus the synthetic emoji, optionally with a detector.
    #[staticmethod]
    #[pyo3(signature = (seed = 0, svm = None, smooth = 0))]
    fn synthetic(seed: u64, svm: Option<PyLinearSvm>, smooth: usize) -> PyResult<Self> {
        let model = nn::Model::random(&nn::VggConfig::vgg_ba_small(), seed).map_err(err)?;
        let mut p = pipeline::Pipeline::new(model, pipeline::EmojiSet::synthetic(128));
        if let Some(s) = svm {
            p = p.with_detector(s.0, HogParams::default(), DetectorParams::default());
        }
        if smooth > 0 {
            p = p.with_smoothing(smooth);
        }
        Ok(PyPipeline(p))
    }

    /// Uses `face` for frame `index` instead of running the detector.
    fn set_box(&mut self, index: u64, face: PyFaceBox) {
        self.0.boxes_mut().insert(index, face.0);
    }

    /// Masked frame and its metrics record as a JSON string.
    fn process_frame(&mut self, index: u64, frame: &PyImage) -> PyResult<(PyImage, String)> {
        let (out, metrics) = self.0.process_frame(index, &frame.0);
        let json = serde_json_string(&metrics)?;
        Ok((PyImage(out), json))
    }

    fn reset(&mut self) {
        self.0.reset();
    }
}

fn serde_json_string(m: &pipeline::FrameMetrics) -> PyResult<String> {
    serde_json::to_string(m).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Synthetic 720p-style test frame and the planted face box.
#[pyfunction]
fn video_frame(width: u32, height: u32, seed: u64) -> (PyImage, PyFaceBox) {
    let (img, face) = synth::video_frame(width, height, seed);
    (PyImage(img), PyFaceBox(face))
}

#[pyfunction]
fn labels() -> Vec<&'static str> {
    EmotionLabel::ALL.iter().map(|l| l.name()).collect()
}

#[pymodule]
fn emomask_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyFaceBox>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyLinearSvm>()?;
    m.add_class::<PySmoother>()?;
    m.add_class::<PyPipeline>()?;
    m.add_function(wrap_pyfunction!(param_counts, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_homography, m)?)?;
    m.add_function(wrap_pyfunction!(apply_homography, m)?)?;
    m.add_function(wrap_pyfunction!(warp_composite, m)?)?;
    m.add_function(wrap_pyfunction!(hog_descriptor, m)?)?;
    m.add_function(wrap_pyfunction!(video_frame, m)?)?;
    m.add_function(wrap_pyfunction!(labels, m)?)?;
    Ok(())
}
