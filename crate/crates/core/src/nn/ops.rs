//! Inference kernels. Convolution lowers to im2col + sgemm; the plain loop
//! versions used as references live in the tests.

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Avg,
}

/// Unfolds a (C, H, W) plane block into a (C·9, H·W) matrix for a 3x3,
/// padding-1, stride-1 convolution.
fn im2col_3x3(src: &[f32], c: usize, h: usize, w: usize, col: &mut [f32]) {
    let hw = h * w;
    for ch in 0..c {
        let plane = &src[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[((ch * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    let dst = &mut row[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src_row = &plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            dst[0] = 0.0;
                            dst[1..].copy_from_slice(&src_row[..w - 1]);
                        }
                        1 => dst.copy_from_slice(src_row),
                        _ => {
                            dst[..w - 1].copy_from_slice(&src_row[1..]);
                            dst[w - 1] = 0.0;
                        }
                    }
                }
            }
        }
    }
}

/// 3x3 cross-correlation, stride 1, zero padding 1.
/// `weight` is laid out (out_channels, in_channels, 3, 3).
pub fn conv2d(input: &Tensor, weight: &Tensor, bias: &[f32]) -> Result<Tensor> {
    let [b, c, h, w] = input.dims();
    let [oc, ic, kh, kw] = weight.dims();
    if ic != c || kh != 3 || kw != 3 {
        return Err(Error::ShapeMismatch(format!(
            "conv weight {:?} incompatible with input {:?}",
            weight.dims(),
            input.dims()
        )));
    }
    if bias.len() != oc {
        return Err(Error::ShapeMismatch(format!(
            "conv bias length {} != {oc}",
            bias.len()
        )));
    }
    let hw = h * w;
    let k = c * 9;
    let mut out = Tensor::zeros([b, oc, h, w])?;
    let mut col = vec![0f32; k * hw];
    for n in 0..b {
        im2col_3x3(input.item(n), c, h, w, &mut col);
        let dst = &mut out.data_mut()[n * oc * hw..(n + 1) * oc * hw];
        for (o, plane) in dst.chunks_exact_mut(hw).enumerate() {
            plane.fill(bias[o]);
        }
        // SAFETY: all three buffers are dense row-major with the strides given
        // and sized m·k, k·n, m·n respectively.
        unsafe {
            matrixmultiply::sgemm(
                oc,
                k,
                hw,
                1.0,
                weight.data().as_ptr(),
                k as isize,
                1,
                col.as_ptr(),
                hw as isize,
                1,
                1.0,
                dst.as_mut_ptr(),
                hw as isize,
                1,
            );
        }
    }
    Ok(out)
}

fn check_channel_vec(name: &str, v: &[f32], c: usize) -> Result<()> {
    if v.len() != c {
        return Err(Error::ShapeMismatch(format!(
            "batchnorm {name} length {} != {c} channels",
            v.len()
        )));
    }
    Ok(())
}

/// Per-channel `scale·x + shift` equivalent of inference-mode batch norm.
pub(crate) fn batchnorm_affine(
    gamma: &[f32],
    beta: &[f32],
    mean: &[f32],
    var: &[f32],
    eps: f32,
) -> Result<(Vec<f32>, Vec<f32>)> {
    let c = gamma.len();
    check_channel_vec("beta", beta, c)?;
    check_channel_vec("mean", mean, c)?;
    check_channel_vec("var", var, c)?;
    if let Some((channel, &value)) = var.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeVariance { channel, value });
    }
    let mut scale = Vec::with_capacity(c);
    let mut shift = Vec::with_capacity(c);
    for i in 0..c {
        let s = gamma[i] / (var[i] + eps).sqrt();
        scale.push(s);
        shift.push(beta[i] - mean[i] * s);
    }
    Ok((scale, shift))
}

/// Inference-mode batch normalization with running statistics.
pub fn batchnorm2d(
    input: &Tensor,
    gamma: &[f32],
    beta: &[f32],
    mean: &[f32],
    var: &[f32],
    eps: f32,
) -> Result<Tensor> {
    check_channel_vec("gamma", gamma, input.channels())?;
    let (scale, shift) = batchnorm_affine(gamma, beta, mean, var, eps)?;
    let mut out = input.clone();
    apply_affine(&mut out, &scale, &shift, false);
    Ok(out)
}

/// `x ← scale[c]·x + shift[c]`, optionally followed by ReLU.
pub(crate) fn apply_affine(t: &mut Tensor, scale: &[f32], shift: &[f32], relu: bool) {
    let [_, c, h, w] = t.dims();
    let hw = h * w;
    for (i, plane) in t.data_mut().chunks_exact_mut(hw).enumerate() {
        let ch = i % c;
        let (s, b) = (scale[ch], shift[ch]);
        if relu {
            plane.iter_mut().for_each(|v| *v = (*v * s + b).max(0.0));
        } else {
            plane.iter_mut().for_each(|v| *v = *v * s + b);
        }
    }
}

pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

/// 2x2 window, stride 2; odd trailing rows/columns are dropped.
pub fn pool2d(input: &Tensor, kind: PoolKind) -> Result<Tensor> {
    let [b, c, h, w] = input.dims();
    let (oh, ow) = (h / 2, w / 2);
    if oh == 0 || ow == 0 {
        return Err(Error::ShapeMismatch(format!(
            "2x2 pool of {h}x{w} input yields empty output"
        )));
    }
    let mut out = Tensor::zeros([b, c, oh, ow])?;
    let src = input.data();
    let dst = out.data_mut();
    for p in 0..b * c {
        let plane = &src[p * h * w..(p + 1) * h * w];
        let oplane = &mut dst[p * oh * ow..(p + 1) * oh * ow];
        for y in 0..oh {
            let r0 = &plane[2 * y * w..];
            let r1 = &plane[(2 * y + 1) * w..];
            for x in 0..ow {
                let (a, bb, cc, d) = (r0[2 * x], r0[2 * x + 1], r1[2 * x], r1[2 * x + 1]);
                oplane[y * ow + x] = match kind {
                    PoolKind::Max => a.max(bb).max(cc.max(d)),
                    PoolKind::Avg => (a + bb + cc + d) * 0.25,
                };
            }
        }
    }
    Ok(out)
}

/// Averages every (h, w) plane down to 1x1.
pub fn global_avg_pool(input: &Tensor) -> Tensor {
    let [b, c, h, w] = input.dims();
    let hw = h * w;
    let data = input
        .data()
        .chunks_exact(hw)
        .map(|p| p.iter().sum::<f32>() / hw as f32)
        .collect();
    Tensor::from_vec([b, c, 1, 1], data).expect("dims are non-zero")
}

/// `weight·input + bias` with `weight` row-major `m x n`.
pub fn dense(input: &[f32], weight: &[f32], bias: &[f32]) -> Result<Vec<f32>> {
    let (n, m) = (input.len(), bias.len());
    if weight.len() != m * n {
        return Err(Error::ShapeMismatch(format!(
            "dense weight has {} values, expected {m}x{n}",
            weight.len()
        )));
    }
    Ok(weight
        .chunks_exact(n)
        .zip(bias)
        .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f32>() + b)
        .collect())
}

pub fn softmax(logits: &[f32]) -> Vec<f32> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f64> = logits.iter().map(|&v| ((v - max) as f64).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| (e / sum) as f32).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(dims: [usize; 4], data: &[f32]) -> Tensor {
        Tensor::from_vec(dims, data.to_vec()).unwrap()
    }

    #[test]
    fn conv_delta_kernel_is_identity() {
        let input = t([1, 1, 3, 3], &[1., 2., 3., 4., 5., 6., 7., 8., 9.]);
        let mut k = [0f32; 9];
        k[4] = 1.0;
        let out = conv2d(&input, &t([1, 1, 3, 3], &k), &[0.0]).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn conv_bias_only() {
        let input = Tensor::zeros([1, 2, 4, 5]).unwrap();
        let w = Tensor::zeros([3, 2, 3, 3]).unwrap();
        let out = conv2d(&input, &w, &[1.5, -2.0, 0.25]).unwrap();
        assert_eq!(out.dims(), [1, 3, 4, 5]);
        for (i, plane) in out.data().chunks(20).enumerate() {
            assert!(plane.iter().all(|&v| v == [1.5, -2.0, 0.25][i]));
        }
    }

    #[test]
    fn conv_shape_errors() {
        let input = Tensor::zeros([1, 2, 4, 4]).unwrap();
        let w = Tensor::zeros([3, 1, 3, 3]).unwrap();
        assert!(matches!(
            conv2d(&input, &w, &[0.; 3]),
            Err(Error::ShapeMismatch(_))
        ));
        let w = Tensor::zeros([3, 2, 3, 3]).unwrap();
        assert!(matches!(
            conv2d(&input, &w, &[0.; 2]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn batchnorm_identity_and_zero_scale() {
        let input = t([1, 2, 1, 2], &[1., -2., 3., 4.5]);
        let id = batchnorm2d(&input, &[1., 1.], &[0., 0.], &[0., 0.], &[1., 1.], 0.0).unwrap();
        assert_eq!(id, input);
        let z = batchnorm2d(&input, &[0., 0.], &[7., -1.], &[3., 3.], &[2., 2.], 1e-5).unwrap();
        assert_eq!(z.data(), &[7., 7., -1., -1.]);
        assert!(matches!(
            batchnorm2d(&input, &[1., 1.], &[0., 0.], &[0., 0.], &[1., -1.], 0.0),
            Err(Error::NegativeVariance { channel: 1, .. })
        ));
        assert!(matches!(
            batchnorm2d(&input, &[1.], &[0.], &[0.], &[1.], 0.0),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn pooling() {
        let input = t([1, 1, 2, 2], &[1., 2., 3., 4.]);
        assert_eq!(pool2d(&input, PoolKind::Max).unwrap().data(), &[4.0]);
        assert_eq!(pool2d(&input, PoolKind::Avg).unwrap().data(), &[2.5]);
        let mut x = Tensor::zeros([1, 1, 44, 44]).unwrap();
        let mut seen = vec![];
        for _ in 0..5 {
            x = pool2d(&x, PoolKind::Max).unwrap();
            seen.push(x.height());
        }
        assert_eq!(seen, vec![22, 11, 5, 2, 1]);
        assert!(matches!(
            pool2d(&x, PoolKind::Max),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn dense_cases() {
        let x = [1.0, -2.0, 3.0];
        let eye = [1., 0., 0., 0., 1., 0., 0., 0., 1.];
        assert_eq!(dense(&x, &eye, &[0.; 3]).unwrap(), x);
        assert_eq!(dense(&x, &[0.; 6], &[4., 4.]).unwrap(), [4., 4.]);
        assert!(dense(&x, &[0.; 5], &[0., 0.]).is_err());
    }

    #[test]
    fn softmax_closed_forms() {
        let u = softmax(&[0.3; 4]);
        assert!(u.iter().all(|p| (p - 0.25).abs() < 1e-7));
        let p = softmax(&[0.0, 3f32.ln()]);
        assert!((p[0] - 0.25).abs() < 1e-6 && (p[1] - 0.75).abs() < 1e-6);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0; 7]), 0);
    }
}
