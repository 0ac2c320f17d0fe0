//! Linear SVM scoring, Pegasos training and the HSVM model file.
//!
//! HSVM layout (little-endian): magic `HSVM`, version `u32` (1), descriptor
//! length `u32`, threshold `f32`, bias `f32`, then the weights as `f32`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::weights::{self as io, Reader};

pub const MAGIC: [u8; 4] = *b"HSVM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub weights: Vec<f32>,
    pub bias: f32,
    /// Windows with margin above this are detections.
    pub threshold: f32,
}

impl LinearSvm {
    pub fn margin(&self, x: &[f32]) -> f32 {
        dot(&self.weights, x) + self.bias
    }

    pub fn predict(&self, x: &[f32]) -> bool {
        self.margin(x) > self.threshold
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.weights.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.threshold.to_le_bytes());
        out.extend_from_slice(&self.bias.to_le_bytes());
        io::put_f32s(&mut out, &self.weights);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::VersionUnsupported(version));
        }
        let len = r.u32()? as usize;
        let threshold = r.f32()?;
        let bias = r.f32()?;
        let weights = r.f32s(len)?;
        if !r.is_empty() {
            return Err(Error::MalformedFile("trailing bytes in svm file".into()));
        }
        if !(threshold.is_finite() && bias.is_finite() && weights.iter().all(|w| w.is_finite())) {
            return Err(Error::NonFiniteWeight("svm".into()));
        }
        Ok(LinearSvm {
            weights,
            bias,
            threshold,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    // 8 partial sums so the loop vectorizes
    let mut acc = [0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f32 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    acc.iter().sum::<f32>() + tail
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmTrainParams {
    pub lambda: f32,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmTrainParams {
    fn default() -> Self {
        SvmTrainParams {
            lambda: 1e-4,
            epochs: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SvmTraining {
    pub svm: LinearSvm,
    /// Lowest primal objective reached by the end of each epoch.
    pub objective: Vec<f64>,
}

/// `λ/2·‖w‖² + mean hinge`, with the bias treated as one more weight.
fn objective(w: &[f64], samples: &[(&[f32], f64)], lambda: f64) -> f64 {
    let (b, w_feat) = w.split_last().unwrap();
    let reg = 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = samples
        .iter()
        .map(|(x, y)| {
            let s: f64 = w_feat
                .iter()
                .zip(x.iter())
                .map(|(a, &v)| a * v as f64)
                .sum::<f64>()
                + b;
            (1.0 - y * s).max(0.0)
        })
        .sum();
    reg + hinge / samples.len() as f64
}

pub fn train_linear_svm(
    positives: &[Vec<f32>],
    negatives: &[Vec<f32>],
    params: &SvmTrainParams,
) -> Result<LinearSvm> {
    train_linear_svm_report(positives, negatives, params).map(|t| t.svm)
}

/// Pegasos subgradient descent on the L2-regularized hinge loss. The bias
/// rides along as a constant feature. The returned model is the epoch-end
/// iterate with the lowest objective.
pub fn train_linear_svm_report(
    positives: &[Vec<f32>],
    negatives: &[Vec<f32>],
    params: &SvmTrainParams,
) -> Result<SvmTraining> {
    if positives.is_empty() {
        return Err(Error::EmptyClass("positives"));
    }
    if negatives.is_empty() {
        return Err(Error::EmptyClass("negatives"));
    }
    let dim = positives[0].len();
    for v in positives.iter().chain(negatives) {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
    }
    if params.lambda.is_nan() || params.lambda <= 0.0 {
        return Err(Error::InvalidConfig("svm lambda must be positive".into()));
    }
    let lambda = params.lambda as f64;
    let samples: Vec<(&[f32], f64)> = positives
        .iter()
        .map(|v| (v.as_slice(), 1.0))
        .chain(negatives.iter().map(|v| (v.as_slice(), -1.0)))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    // w stored as scale·v so the (1 - ηλ) shrink is O(1)
    let mut v = vec![0f64; dim + 1];
    let mut scale = 1.0f64;
    let mut sq_norm = 0.0f64; // ‖scale·v‖²
    let radius_sq = 1.0 / lambda;
    let mut t = 0u64;

    let mut best = vec![0f64; dim + 1];
    let mut best_obj = objective(&best, &samples, lambda);
    let mut curve = Vec::with_capacity(params.epochs);

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let (x, y) = samples[i];
            let eta = 1.0 / (lambda * t as f64);
            let margin = scale
                * (v[..dim]
                    .iter()
                    .zip(x)
                    .map(|(a, &b)| a * b as f64)
                    .sum::<f64>()
                    + v[dim]);
            let shrink = 1.0 - eta * lambda;
            // margin of the shrunk iterate
            let shrunk_margin = if shrink <= 0.0 {
                v.iter_mut().for_each(|a| *a = 0.0);
                scale = 1.0;
                sq_norm = 0.0;
                0.0
            } else {
                scale *= shrink;
                sq_norm *= shrink * shrink;
                margin * shrink
            };
            if y * margin < 1.0 {
                let step = eta * y / scale;
                let mut x_sq = 1.0;
                for (a, &b) in v[..dim].iter_mut().zip(x) {
                    x_sq += (b as f64) * (b as f64);
                    *a += step * b as f64;
                }
                v[dim] += step;
                sq_norm += 2.0 * eta * y * shrunk_margin + eta * eta * x_sq;
            }
            if sq_norm > radius_sq {
                scale *= (radius_sq / sq_norm).sqrt();
                sq_norm = radius_sq;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|a| *a *= scale);
                scale = 1.0;
            }
        }
        let w: Vec<f64> = v.iter().map(|a| a * scale).collect();
        let obj = objective(&w, &samples, lambda);
        if obj < best_obj {
            best_obj = obj;
            best = w;
        }
        curve.push(best_obj);
    }

    let (b, w) = best.split_last().unwrap();
    Ok(SvmTraining {
        svm: LinearSvm {
            weights: w.iter().map(|&a| a as f32).collect(),
            bias: *b as f32,
            threshold: 0.0,
        },
        objective: curve,
    })
}
