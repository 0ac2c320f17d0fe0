//! Dalal–Triggs HoG: [-1, 0, 1] gradients, unsigned orientation histograms
//! per cell with linear interpolation between neighbouring bins, and L2-Hys
//! block normalization.

use crate::error::{Error, Result};
use crate::imagecore::{Channels, Image};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HogParams {
    pub cell_size: u32,
    /// Block side in cells.
    pub block_cells: u32,
    /// Block stride in cells.
    pub block_stride: u32,
    pub bins: usize,
    /// Square detection window side in pixels.
    pub window: u32,
    pub clip: f32,
}

impl Default for HogParams {
    fn default() -> Self {
        HogParams {
            cell_size: 8,
            block_cells: 2,
            block_stride: 1,
            bins: 9,
            window: 64,
            clip: 0.2,
        }
    }
}

/// Regularizer inside the block norms; keeps flat blocks at exactly zero.
const NORM_EPS: f32 = 1e-3;

impl HogParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.cell_size > 0
            && self.block_cells > 0
            && self.block_stride > 0
            && self.bins > 0
            && self.window.is_multiple_of(self.cell_size)
            && self.window / self.cell_size >= self.block_cells
            && (self.window / self.cell_size - self.block_cells).is_multiple_of(self.block_stride);
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "inconsistent hog parameters {self:?}"
            )));
        }
        Ok(())
    }

    pub fn cells_per_window(&self) -> u32 {
        self.window / self.cell_size
    }

    pub fn blocks_per_window(&self) -> u32 {
        (self.cells_per_window() - self.block_cells) / self.block_stride + 1
    }

    pub fn block_len(&self) -> usize {
        (self.block_cells * self.block_cells) as usize * self.bins
    }

    pub fn descriptor_len(&self) -> usize {
        let b = self.blocks_per_window() as usize;
        b * b * self.block_len()
    }
}

/// Per-pixel gradient magnitude and unsigned orientation in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: u32,
    pub height: u32,
    pub magnitude: Vec<f32>,
    pub orientation: Vec<f32>,
}

/// atan2 in degrees folded into [0, 180). Polynomial core, |error| < 1e-3°.
#[inline]
pub(crate) fn orientation_deg(dy: f32, dx: f32) -> f32 {
    let (ax, ay) = (dx.abs(), dy.abs());
    if ax == 0.0 && ay == 0.0 {
        return 0.0;
    }
    let (num, den, swap) = if ay > ax {
        (ax, ay, true)
    } else {
        (ay, ax, false)
    };
    let a = num / den;
    let s = a * a;
    let mut r = a
        * (0.999_977_26
            + s * (-0.332_623_47
                + s * (0.193_543_46
                    + s * (-0.116_432_87 + s * (0.052_653_32 + s * -0.011_721_2)))));
    if swap {
        r = std::f32::consts::FRAC_PI_2 - r;
    }
    let mut deg = r.to_degrees();
    // fold: quadrants where dx and dy differ in sign map to 180 - θ
    if (dx < 0.0) != (dy < 0.0) && deg != 0.0 {
        deg = 180.0 - deg;
    }
    if deg >= 180.0 {
        deg -= 180.0;
    }
    deg
}

#[inline]
fn central(prev: u8, next: u8) -> f32 {
    next as f32 - prev as f32
}

/// Gradient at (x, y): central differences, one-sided at the border.
#[inline]
fn gradient_at(data: &[u8], w: usize, h: usize, x: usize, y: usize) -> (f32, f32) {
    let row = y * w;
    let dx = if x == 0 {
        central(data[row], data[row + 1])
    } else if x == w - 1 {
        central(data[row + x - 1], data[row + x])
    } else {
        central(data[row + x - 1], data[row + x + 1])
    };
    let dy = if y == 0 {
        central(data[x], data[w + x])
    } else if y == h - 1 {
        central(data[(y - 1) * w + x], data[row + x])
    } else {
        central(data[(y - 1) * w + x], data[(y + 1) * w + x])
    };
    (dx, dy)
}

fn require_gray(img: &Image) -> Result<()> {
    if img.channels() != Channels::Gray1 {
        return Err(Error::UnsupportedVariant(format!(
            "expected Gray1 image, got {:?}",
            img.channels()
        )));
    }
    Ok(())
}

pub fn gradients(img: &Image) -> Result<GradientField> {
    require_gray(img)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min: 3,
        });
    }
    let mut magnitude = Vec::with_capacity(w * h);
    let mut orientation = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = gradient_at(img.data(), w, h, x, y);
            magnitude.push((dx * dx + dy * dy).sqrt());
            orientation.push(orientation_deg(dy, dx));
        }
    }
    Ok(GradientField {
        width: img.width(),
        height: img.height(),
        magnitude,
        orientation,
    })
}

/// Block-normalized HoG features for every block position of an image,
/// stored row-major by block with `block_len` values each.
#[derive(Debug, Clone)]
pub struct BlockGrid {
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub block_len: usize,
    pub values: Vec<f32>,
}

impl BlockGrid {
    pub fn block(&self, bx: usize, by: usize) -> &[f32] {
        let i = (by * self.blocks_x + bx) * self.block_len;
        &self.values[i..i + self.block_len]
    }
}

/// One pixel's contribution: magnitude split between two adjacent bins.
#[derive(Debug, Clone, Copy, Default)]
struct Vote {
    lo: u16,
    hi: u16,
    w_lo: f32,
    w_hi: f32,
}

fn vote(dx: f32, dy: f32, bins: usize) -> Vote {
    let mag = (dx * dx + dy * dy).sqrt();
    if mag == 0.0 {
        return Vote::default();
    }
    let pos = orientation_deg(dy, dx) / (180.0 / bins as f32) - 0.5;
    let lo = pos.floor();
    let frac = pos - lo;
    let lo = if lo < 0.0 {
        bins - 1
    } else {
        lo as usize % bins
    };
    Vote {
        lo: lo as u16,
        hi: ((lo + 1) % bins) as u16,
        w_lo: mag * (1.0 - frac),
        w_hi: mag * frac,
    }
}

/// 8-bit images only produce integer gradients in [-255, 255], so votes for
/// the default bin count are tabulated once.
const SPAN: usize = 511;
fn vote_table(bins: usize) -> Option<&'static [Vote]> {
    static TABLE: std::sync::OnceLock<Vec<Vote>> = std::sync::OnceLock::new();
    (bins == 9).then(|| {
        TABLE
            .get_or_init(|| {
                let mut t = Vec::with_capacity(SPAN * SPAN);
                for dy in -255..=255 {
                    for dx in -255..=255 {
                        t.push(vote(dx as f32, dy as f32, 9));
                    }
                }
                t
            })
            .as_slice()
    })
}

/// Orientation histograms of all complete cells, row-major, `bins` each.
/// Border pixels use one-sided differences, i.e. clamped neighbours.
fn cell_histograms(img: &Image, p: &HogParams) -> (usize, usize, Vec<f32>) {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let cs = p.cell_size as usize;
    let (cx, cy) = (w / cs, h / cs);
    let bins = p.bins;
    let mut hist = vec![0f32; cx * cy * bins];
    let table = vote_table(bins);
    let data = img.data();
    for y in 0..cy * cs {
        let row = &data[y * w..][..w];
        let up = &data[y.saturating_sub(1) * w..][..w];
        let down = &data[(y + 1).min(h - 1) * w..][..w];
        let hrow = &mut hist[(y / cs) * cx * bins..][..cx * bins];
        for x in 0..cx * cs {
            let dx = row[(x + 1).min(w - 1)] as i32 - row[x.saturating_sub(1)] as i32;
            let dy = down[x] as i32 - up[x] as i32;
            let v = match table {
                Some(t) => t[(dy + 255) as usize * SPAN + (dx + 255) as usize],
                None => vote(dx as f32, dy as f32, bins),
            };
            let cell = &mut hrow[(x / cs) * bins..][..bins];
            cell[v.lo as usize] += v.w_lo;
            cell[v.hi as usize] += v.w_hi;
        }
    }
    (cx, cy, hist)
}

fn l2_hys(v: &mut [f32], clip: f32) {
    let norm = |v: &[f32]| (v.iter().map(|x| x * x).sum::<f32>() + NORM_EPS * NORM_EPS).sqrt();
    let n = norm(v);
    v.iter_mut().for_each(|x| *x = (*x / n).min(clip));
    let n = norm(v);
    v.iter_mut().for_each(|x| *x /= n);
}

/// Dense block features over a whole gray image. Images smaller than one
/// block give an empty grid.
pub fn block_grid(img: &Image, p: &HogParams) -> Result<BlockGrid> {
    require_gray(img)?;
    p.validate()?;
    let (cx, cy, hist) = cell_histograms(img, p);
    let bc = p.block_cells as usize;
    let stride = p.block_stride as usize;
    let block_len = p.block_len();
    let blocks = |cells: usize| {
        if cells < bc {
            0
        } else {
            (cells - bc) / stride + 1
        }
    };
    let (bx_n, by_n) = (blocks(cx), blocks(cy));
    let mut values = Vec::with_capacity(bx_n * by_n * block_len);
    for by in 0..by_n {
        for bx in 0..bx_n {
            let start = values.len();
            for j in 0..bc {
                for i in 0..bc {
                    let cell = (by * stride + j) * cx + bx * stride + i;
                    values.extend_from_slice(&hist[cell * p.bins..(cell + 1) * p.bins]);
                }
            }
            l2_hys(&mut values[start..], p.clip);
        }
    }
    Ok(BlockGrid {
        blocks_x: bx_n,
        blocks_y: by_n,
        block_len,
        values,
    })
}

/// Descriptor of one window-sized gray image: blocks in row-major order,
/// cells row-major within each block.
pub fn hog_descriptor(img: &Image, p: &HogParams) -> Result<Vec<f32>> {
    if (img.width(), img.height()) != (p.window, p.window) {
        return Err(Error::SizeMismatch {
            expected: (p.window, p.window),
            actual: (img.width(), img.height()),
        });
    }
    let grid = block_grid(img, p)?;
    debug_assert_eq!(grid.values.len(), p.descriptor_len());
    Ok(grid.values)
}
