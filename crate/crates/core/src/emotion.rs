//! Face-crop preprocessing, 7-way expression classification and the
//! majority-vote smoother.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facedetect::FaceBox;
use crate::imagecore::{crop, resize_bilinear, to_grayscale, Image};
use crate::nn::{argmax, softmax, Model, Tensor};

/// Side of the resized face before the center crop.
pub const RESIZE_SIDE: u32 = 48;
/// Network input side.
pub const INPUT_SIDE: u32 = 44;
/// `(x/255 − MEAN) / STD`. The training harness must use the same values.
pub const PIXEL_MEAN: f32 = 0.5;
pub const PIXEL_STD: f32 = 0.5;

/// FER2013 label order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Angry = 0,
    Disgust = 1,
    Fear = 2,
    Happy = 3,
    Sad = 4,
    Surprise = 5,
    Neutral = 6,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 7] = [
        EmotionLabel::Angry,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Happy,
        EmotionLabel::Sad,
        EmotionLabel::Surprise,
        EmotionLabel::Neutral,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Angry => "angry",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Happy => "happy",
            EmotionLabel::Sad => "sad",
            EmotionLabel::Surprise => "surprise",
            EmotionLabel::Neutral => "neutral",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown emotion `{s}`")))
    }
}

/// Class probabilities in [`EmotionLabel`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionScores {
    pub probs: [f32; 7],
}

impl EmotionScores {
    pub fn top(&self) -> EmotionLabel {
        EmotionLabel::from_index(argmax(&self.probs)).expect("7 classes")
    }
}

/// Crop → gray → 48x48 → center 44x44 → normalized `[1, 1, 44, 44]` tensor.
pub fn preprocess_face(frame: &Image, face: &FaceBox) -> Result<Tensor> {
    if !(face.w > 0.0 && face.h > 0.0) || !face.w.is_finite() || !face.h.is_finite() {
        return Err(Error::DegenerateBox {
            w: face.w,
            h: face.h,
        });
    }
    let (w, h) = (
        face.w.round().max(1.0) as u32,
        face.h.round().max(1.0) as u32,
    );
    let patch = crop(frame, face.x.round() as i64, face.y.round() as i64, w, h)?;
    preprocess_patch(&patch)
}

/// The preprocessing chain for an already cropped face image.
pub fn preprocess_patch(patch: &Image) -> Result<Tensor> {
    let gray = to_grayscale(patch);
    let resized = resize_bilinear(&gray, RESIZE_SIDE, RESIZE_SIDE)?;
    let off = (RESIZE_SIDE - INPUT_SIDE) / 2;
    let center = crop(&resized, off as i64, off as i64, INPUT_SIDE, INPUT_SIDE)?;
    let data = center
        .data()
        .iter()
        .map(|&v| (v as f32 / 255.0 - PIXEL_MEAN) / PIXEL_STD)
        .collect();
    Tensor::from_vec([1, 1, INPUT_SIDE as usize, INPUT_SIDE as usize], data)
}

/// Softmax over the model's logits; the label is the argmax, lowest index on ties.
pub fn classify(model: &Model, input: &Tensor) -> Result<(EmotionScores, EmotionLabel)> {
    let cfg = model.config();
    if cfg.num_classes != 7 || cfg.input_channels != 1 {
        return Err(Error::ShapeMismatch(format!(
            "classifier needs 1 input channel and 7 classes, model has {} and {}",
            cfg.input_channels, cfg.num_classes
        )));
    }
    let side = INPUT_SIDE as usize;
    if input.dims() != [1, 1, side, side] {
        return Err(Error::ShapeMismatch(format!(
            "classifier input must be [1, 1, 44, 44], got {:?}",
            input.dims()
        )));
    }
    let logits = model.forward(input)?.remove(0);
    let probs: [f32; 7] = softmax(&logits).try_into().expect("7 logits");
    let scores = EmotionScores { probs };
    let label = scores.top();
    Ok((scores, label))
}

/// Majority vote over the last `k` labels. Ties go to whichever tied label
/// was seen most recently.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoother {
    window: VecDeque<EmotionLabel>,
    k: usize,
    current: Option<EmotionLabel>,
}

impl Default for Smoother {
    fn default() -> Self {
        Self::new(5)
    }
}

impl Smoother {
    pub fn new(k: usize) -> Self {
        let k = k.max(1);
        Smoother {
            window: VecDeque::with_capacity(k),
            k,
            current: None,
        }
    }

    pub fn window(&self) -> impl Iterator<Item = EmotionLabel> + '_ {
        self.window.iter().copied()
    }

    pub fn current(&self) -> Option<EmotionLabel> {
        self.current
    }

    pub fn push(&mut self, label: EmotionLabel) -> EmotionLabel {
        if self.window.len() == self.k {
            self.window.pop_front();
        }
        self.window.push_back(label);
        let out = modal_label(self.window.iter().copied());
        self.current = Some(out);
        out
    }

    pub fn reset(&mut self) {
        self.window.clear();
        self.current = None;
    }
}

pub fn smooth(state: &mut Smoother, label: EmotionLabel) -> EmotionLabel {
    state.push(label)
}

/// Mode of a non-empty oldest-first sequence, ties to the latest occurrence.
fn modal_label(window: impl Iterator<Item = EmotionLabel>) -> EmotionLabel {
    let mut counts = [0usize; 7];
    let mut last_seen = [0usize; 7];
    for (i, l) in window.enumerate() {
        counts[l.index()] += 1;
        last_seen[l.index()] = i;
    }
    let best = (0..7)
        .filter(|&i| counts[i] > 0)
        .max_by_key(|&i| (counts[i], last_seen[i]))
        .expect("window is non-empty");
    EmotionLabel::from_index(best).unwrap()
}
