//! Parity vectors: (input, expected logits) pairs produced by the training
//! harness and replayed through [`Model::forward`].
//!
//! Layout (little-endian): case count `u32`; per case four `u32` dims
//! (batch, channels, height, width), the input `f32`s, then `batch·classes`
//! logit `f32`s.

use std::path::Path;

use super::ops::argmax;
use super::weights::{put_f32s, Reader};
use super::{Model, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ParityCase {
    pub input: Tensor,
    pub logits: Vec<f32>,
}

pub fn parse_parity(bytes: &[u8], num_classes: usize) -> Result<Vec<ParityCase>> {
    let mut r = Reader::new(bytes);
    let count = r.u32()?;
    let mut cases = Vec::with_capacity(count.min(4096) as usize);
    for _ in 0..count {
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = r.u32()? as usize;
        }
        let n = dims.iter().product();
        let input = Tensor::from_vec(dims, r.f32s(n)?)?;
        let logits = r.f32s(dims[0] * num_classes)?;
        cases.push(ParityCase { input, logits });
    }
    if !r.is_empty() {
        return Err(Error::MalformedFile("trailing bytes in parity file".into()));
    }
    Ok(cases)
}

pub fn serialize_parity(cases: &[ParityCase]) -> Vec<u8> {
    let mut out = (cases.len() as u32).to_le_bytes().to_vec();
    for c in cases {
        for d in c.input.dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        put_f32s(&mut out, c.input.data());
        put_f32s(&mut out, &c.logits);
    }
    out
}

pub fn load_parity(path: impl AsRef<Path>, num_classes: usize) -> Result<Vec<ParityCase>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_parity(&bytes, num_classes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityReport {
    pub cases: usize,
    pub max_abs_diff: f32,
    pub argmax_mismatches: usize,
}

impl ParityReport {
    pub fn passes(&self, tolerance: f32) -> bool {
        self.max_abs_diff <= tolerance && self.argmax_mismatches == 0
    }
}

pub fn replay_parity(model: &Model, cases: &[ParityCase]) -> Result<ParityReport> {
    let classes = model.config().num_classes;
    let mut report = ParityReport {
        cases: cases.len(),
        max_abs_diff: 0.0,
        argmax_mismatches: 0,
    };
    for case in cases {
        let rows = model.forward(&case.input)?;
        for (row, expected) in rows.iter().zip(case.logits.chunks_exact(classes)) {
            for (a, b) in row.iter().zip(expected) {
                report.max_abs_diff = report.max_abs_diff.max((a - b).abs());
            }
            if argmax(row) != argmax(expected) {
                report.argmax_mismatches += 1;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::VggConfig;

    #[test]
    fn self_generated_cases_replay_exactly() {
        let cfg = VggConfig::new("4 M 8 M".parse::<crate::nn::LayerString>().unwrap().0, 1, 7);
        let model = Model::random(&cfg, 11).unwrap();
        let cases: Vec<_> = (0..3)
            .map(|i| {
                let input = Tensor::from_vec(
                    [1, 1, 8, 8],
                    (0..64)
                        .map(|v| ((v * (i + 3)) % 17) as f32 / 17.0)
                        .collect(),
                )
                .unwrap();
                let logits = model.forward(&input).unwrap().remove(0);
                ParityCase { input, logits }
            })
            .collect();
        let parsed = parse_parity(&serialize_parity(&cases), 7).unwrap();
        assert_eq!(parsed, cases);
        let report = replay_parity(&model, &parsed).unwrap();
        assert_eq!(report.max_abs_diff, 0.0);
        assert!(report.passes(1e-4));
    }

    #[test]
    fn zero_model_zero_logits() {
        let model = crate::nn::build_model(&VggConfig::vgg_ba_small()).unwrap();
        let input = Tensor::from_vec([1, 1, 44, 44], vec![0.3; 44 * 44]).unwrap();
        let case = ParityCase {
            input,
            logits: vec![0.0; 7],
        };
        let r = replay_parity(&model, &[case]).unwrap();
        assert_eq!(r.max_abs_diff, 0.0);
    }

    #[test]
    fn truncated_file_rejected() {
        assert!(parse_parity(&[1, 0, 0, 0, 1], 7).is_err());
        assert!(parse_parity(&[0, 0, 0, 0, 9], 7).is_err());
    }
}
