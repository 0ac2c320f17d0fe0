//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use emomask::emotion::EmotionLabel;
use emomask::nn::Tensor;
use rand::Rng;

pub fn random_tensor(rng: &mut impl Rng, dims: [usize; 4], scale: f32) -> Tensor {
    let n = dims.iter().product();
    Tensor::from_vec(
        dims,
        (0..n).map(|_| rng.random_range(-scale..scale)).collect(),
    )
    .unwrap()
}

/// 3x3, stride 1, zero padding 1, accumulated in f64.
pub fn conv_oracle(input: &Tensor, weight: &Tensor, bias: &[f32]) -> Vec<f64> {
    let [n, c, h, w] = input.dims();
    let oc = weight.dims()[0];
    let mut out = vec![0f64; n * oc * h * w];
    for b in 0..n {
        for o in 0..oc {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = bias[o] as f64;
                    for i in 0..c {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let (sy, sx) = (y as i64 + ky as i64 - 1, x as i64 + kx as i64 - 1);
                                if sy < 0 || sx < 0 || sy >= h as i64 || sx >= w as i64 {
                                    continue;
                                }
                                acc += input.at(b, i, sy as usize, sx as usize) as f64
                                    * weight.at(o, i, ky, kx) as f64;
                            }
                        }
                    }
                    out[((b * oc + o) * h + y) * w + x] = acc;
                }
            }
        }
    }
    out
}

pub fn bn_oracle(
    input: &Tensor,
    gamma: &[f32],
    beta: &[f32],
    mean: &[f32],
    var: &[f32],
    eps: f32,
) -> Vec<f64> {
    let [n, c, h, w] = input.dims();
    let mut out = Vec::with_capacity(input.len());
    for b in 0..n {
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let v = input.at(b, ch, y, x) as f64;
                    let norm = (v - mean[ch] as f64) / (var[ch] as f64 + eps as f64).sqrt();
                    out.push(gamma[ch] as f64 * norm + beta[ch] as f64);
                }
            }
        }
    }
    out
}

/// 2x2 window, stride 2, floor on odd sizes.
pub fn pool_oracle(input: &Tensor, max: bool) -> Vec<f64> {
    let [n, c, h, w] = input.dims();
    let mut out = Vec::new();
    for b in 0..n {
        for ch in 0..c {
            for y in 0..h / 2 {
                for x in 0..w / 2 {
                    let vals = [(0, 0), (0, 1), (1, 0), (1, 1)]
                        .map(|(dy, dx)| input.at(b, ch, 2 * y + dy, 2 * x + dx) as f64);
                    out.push(if max {
                        vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    } else {
                        vals.iter().sum::<f64>() / 4.0
                    });
                }
            }
        }
    }
    out
}

pub fn dense_oracle(x: &[f32], weight: &[f32], bias: &[f32]) -> Vec<f64> {
    let ins = x.len();
    bias.iter()
        .enumerate()
        .map(|(o, &b)| {
            b as f64
                + (0..ins)
                    .map(|i| weight[o * ins + i] as f64 * x[i] as f64)
                    .sum::<f64>()
        })
        .collect()
}

pub fn softmax_oracle(z: &[f32]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
    let e: Vec<f64> = z.iter().map(|&v| (v as f64 - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn max_abs_diff(a: &[f32], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y).abs())
        .fold(0.0, f64::max)
}

/// A random projective map that stays well conditioned over a 200 px
/// square: moderate scale and shear, small perspective terms.
pub fn random_homography(rng: &mut impl Rng) -> [[f64; 3]; 3] {
    let s = rng.random_range(0.5..2.0);
    let theta: f64 = rng.random_range(-0.6..0.6);
    let (c, sn) = (theta.cos(), theta.sin());
    let shear = rng.random_range(-0.2..0.2);
    [
        [s * c + shear, -s * sn, rng.random_range(-120.0..120.0)],
        [
            s * sn,
            s * c * rng.random_range(0.8..1.25),
            rng.random_range(-120.0..120.0),
        ],
        [
            rng.random_range(-8e-4..8e-4),
            rng.random_range(-8e-4..8e-4),
            1.0,
        ],
    ]
}

pub fn project(h: &[[f64; 3]; 3], p: [f64; 2]) -> [f64; 2] {
    let w = h[2][0] * p[0] + h[2][1] * p[1] + h[2][2];
    [
        (h[0][0] * p[0] + h[0][1] * p[1] + h[0][2]) / w,
        (h[1][0] * p[0] + h[1][1] * p[1] + h[1][2]) / w,
    ]
}

/// Six points in general position inside `[0, 200)²`: every triple spans a
/// triangle of area at least `min_area`.
pub fn general_position_points(rng: &mut impl Rng, min_area: f64) -> [[f64; 2]; 6] {
    loop {
        let pts: [[f64; 2]; 6] =
            std::array::from_fn(|_| [rng.random_range(0.0..200.0), rng.random_range(0.0..200.0)]);
        let mut ok = true;
        for i in 0..6 {
            for j in i + 1..6 {
                for k in j + 1..6 {
                    let area = ((pts[j][0] - pts[i][0]) * (pts[k][1] - pts[i][1])
                        - (pts[j][1] - pts[i][1]) * (pts[k][0] - pts[i][0]))
                        .abs()
                        / 2.0;
                    ok &= area >= min_area;
                }
            }
        }
        if ok {
            return pts;
        }
    }
}

pub fn frobenius_rel(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            num += (a[r][c] - b[r][c]).powi(2);
            den += b[r][c].powi(2);
        }
    }
    (num / den).sqrt()
}

/// Mode with ties going to the most recent occurrence.
pub fn modal(window: &[EmotionLabel]) -> EmotionLabel {
    let count = |l: EmotionLabel| window.iter().filter(|&&x| x == l).count();
    let best = window.iter().map(|&l| count(l)).max().unwrap();
    *window.iter().rev().find(|&&l| count(l) == best).unwrap()
}
