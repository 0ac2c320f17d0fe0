use serde::{Deserialize, Serialize};

use super::homography::Homography;
use crate::error::{Error, Result};
use crate::imagecore::{Channels, Image};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    #[default]
    Bilinear,
    Nearest,
}

/// Frame pixels a warp may touch, as half-open ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Region {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        (self.x0..self.x1).contains(&x) && (self.y0..self.y1).contains(&y)
    }

    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }
}

/// Bounding box of the emoji's footprint (one pixel of bilinear fringe
/// included), clipped to the frame. If the emoji straddles the horizon the
/// whole frame is returned.
pub fn warp_region(
    h: &Homography,
    emoji_w: u32,
    emoji_h: u32,
    frame_w: u32,
    frame_h: u32,
) -> Region {
    let full = Region {
        x0: 0,
        y0: 0,
        x1: frame_w,
        y1: frame_h,
    };
    let (ew, eh) = (emoji_w as f64, emoji_h as f64);
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for (u, v) in [(-1.0, -1.0), (ew, -1.0), (ew, eh), (-1.0, eh)] {
        let (x, y, w) = h.project(u, v);
        if w <= 1e-12 {
            return full;
        }
        let (x, y) = (x / w, y / w);
        min = [min[0].min(x), min[1].min(y)];
        max = [max[0].max(x), max[1].max(y)];
    }
    let clip = |v: f64, hi: u32| v.clamp(0.0, hi as f64) as u32;
    Region {
        x0: clip(min[0].floor(), frame_w),
        y0: clip(min[1].floor(), frame_h),
        x1: clip(max[0].ceil() + 1.0, frame_w),
        y1: clip(max[1].ceil() + 1.0, frame_h),
    }
}

/// Premultiplied RGB and coverage of the emoji at `(u, v)`; samples outside
/// the emoji are transparent.
#[inline]
fn sample(emoji: &Image, u: f64, v: f64, sampling: Sampling) -> ([f32; 3], f32) {
    let (w, h) = (emoji.width() as i64, emoji.height() as i64);
    let data = emoji.data();
    let mut acc = ([0f32; 3], 0f32);
    let mut tap = |x: i64, y: i64, weight: f32| {
        if weight == 0.0 || x < 0 || y < 0 || x >= w || y >= h {
            return;
        }
        let i = ((y * w + x) * 4) as usize;
        let a = weight * data[i + 3] as f32 / 255.0;
        for c in 0..3 {
            acc.0[c] += a * data[i + c] as f32;
        }
        acc.1 += a;
    };
    match sampling {
        Sampling::Nearest => tap(u.round() as i64, v.round() as i64, 1.0),
        Sampling::Bilinear => {
            let (fu, fv) = (u.floor(), v.floor());
            let (x0, y0) = (fu as i64, fv as i64);
            let (ax, ay) = ((u - fu) as f32, (v - fv) as f32);
            tap(x0, y0, (1.0 - ax) * (1.0 - ay));
            tap(x0 + 1, y0, ax * (1.0 - ay));
            tap(x0, y0 + 1, (1.0 - ax) * ay);
            tap(x0 + 1, y0 + 1, ax * ay);
        }
    }
    acc
}

/// Composites `emoji` (RGBA) onto `frame` (RGB) in place, where `h` maps
/// emoji pixel coordinates to frame pixel coordinates. Each destination pixel
/// is inverse-mapped and blended as `α·emoji + (1−α)·frame`. Returns the
/// region that was visited; pixels outside it are untouched.
pub fn warp_composite_in_place(
    frame: &mut Image,
    emoji: &Image,
    h: &Homography,
    sampling: Sampling,
) -> Result<Region> {
    if frame.channels() != Channels::Rgb3 {
        return Err(Error::UnsupportedVariant(format!(
            "frame must be RGB, got {:?}",
            frame.channels()
        )));
    }
    if emoji.channels() != Channels::Rgba4 {
        return Err(Error::UnsupportedVariant(format!(
            "emoji must be RGBA, got {:?}",
            emoji.channels()
        )));
    }
    let inv = h.inverse()?;
    let region = warp_region(
        h,
        emoji.width(),
        emoji.height(),
        frame.width(),
        frame.height(),
    );
    for y in region.y0..region.y1 {
        for x in region.x0..region.x1 {
            let (u, v, w) = inv.project(x as f64, y as f64);
            if w.abs() <= 1e-12 {
                continue;
            }
            let (premul, alpha) = sample(emoji, u / w, v / w, sampling);
            if alpha <= 0.0 {
                continue;
            }
            let alpha = alpha.min(1.0);
            let px = frame.pixel_mut(x, y);
            for c in 0..3 {
                let out = premul[c] + (1.0 - alpha) * px[c] as f32;
                px[c] = out.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok(region)
}

pub fn warp_composite(
    frame: &Image,
    emoji: &Image,
    h: &Homography,
    sampling: Sampling,
) -> Result<Image> {
    let mut out = frame.clone();
    warp_composite_in_place(&mut out, emoji, h, sampling)?;
    Ok(out)
}
