//! 8-bit raster images: decode/encode, grayscale conversion, bilinear resize
//! and zero-padded cropping.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};

/// BT.601 luma weights. Training-side preprocessing must use the same values.
pub const GRAY_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channels {
    Gray1,
    Rgb3,
    Rgba4,
}

impl Channels {
    pub fn count(self) -> usize {
        match self {
            Channels::Gray1 => 1,
            Channels::Rgb3 => 3,
            Channels::Rgba4 => 4,
        }
    }

    pub fn from_count(n: usize) -> Option<Self> {
        match n {
            1 => Some(Channels::Gray1),
            3 => Some(Channels::Rgb3),
            4 => Some(Channels::Rgba4),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Pgm,
    Ppm,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(ImageFormat::Png),
            "pgm" => Some(ImageFormat::Pgm),
            "ppm" => Some(ImageFormat::Ppm),
            _ => None,
        }
    }
}

/// Row-major, top-left origin, interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    channels: Channels,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32, channels: Channels) -> Result<Self> {
        Self::filled(width, height, channels, 0)
    }

    pub fn filled(width: u32, height: u32, channels: Channels, value: u8) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension { width, height });
        }
        let len = width as usize * height as usize * channels.count();
        Ok(Image {
            width,
            height,
            channels,
            data: vec![value; len],
        })
    }

    pub fn from_raw(width: u32, height: u32, channels: Channels, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension { width, height });
        }
        let expected = width as usize * height as usize * channels.count();
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height}x{} image needs {expected} bytes, got {}",
                channels.count(),
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn<F>(width: u32, height: u32, channels: Channels, mut f: F) -> Result<Self>
    where
        F: FnMut(u32, u32) -> [u8; 4],
    {
        let mut img = Self::new(width, height, channels)?;
        let c = channels.count();
        for y in 0..height {
            for x in 0..width {
                let px = f(x, y);
                let i = img.index(x, y);
                img.data[i..i + c].copy_from_slice(&px[..c]);
            }
        }
        Ok(img)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> Channels {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels.count()
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let i = self.index(x, y);
        &self.data[i..i + self.channels.count()]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: u32, y: u32) -> &mut [u8] {
        let i = self.index(x, y);
        let c = self.channels.count();
        &mut self.data[i..i + c]
    }

    /// Converts to RGB, replicating gray and dropping alpha.
    pub fn to_rgb(&self) -> Image {
        match self.channels {
            Channels::Rgb3 => self.clone(),
            Channels::Gray1 => Image {
                width: self.width,
                height: self.height,
                channels: Channels::Rgb3,
                data: self.data.iter().flat_map(|&g| [g, g, g]).collect(),
            },
            Channels::Rgba4 => Image {
                width: self.width,
                height: self.height,
                channels: Channels::Rgb3,
                data: self
                    .data
                    .chunks_exact(4)
                    .flat_map(|p| [p[0], p[1], p[2]])
                    .collect(),
            },
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let format = ImageFormat::from_path(path).ok_or_else(|| {
            Error::UnsupportedVariant(format!("unknown image extension: {}", path.display()))
        })?;
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        decode_image(&bytes, format)
    }

    /// Writes in the format implied by the extension. PGM requires a gray
    /// image and PPM an RGB one.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let format = ImageFormat::from_path(path).ok_or_else(|| {
            Error::UnsupportedVariant(format!("unknown image extension: {}", path.display()))
        })?;
        let bytes = encode_image(self, format)?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

pub fn decode_image(bytes: &[u8], format: ImageFormat) -> Result<Image> {
    match format {
        ImageFormat::Png => decode_png(bytes),
        ImageFormat::Pgm => decode_pnm(bytes, b"P5", Channels::Gray1),
        ImageFormat::Ppm => decode_pnm(bytes, b"P6", Channels::Rgb3),
    }
}

pub fn encode_image(img: &Image, format: ImageFormat) -> Result<Vec<u8>> {
    match format {
        ImageFormat::Png => encode_png(img),
        ImageFormat::Pgm => encode_pnm(img, "P5", Channels::Gray1),
        ImageFormat::Ppm => encode_pnm(img, "P6", Channels::Rgb3),
    }
}

fn decode_png(bytes: &[u8]) -> Result<Image> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::MalformedFile(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::MalformedFile("png too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::MalformedFile(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedVariant(format!(
            "{:?}-bit png samples",
            info.bit_depth
        )));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => Channels::Gray1,
        png::ColorType::Rgb => Channels::Rgb3,
        png::ColorType::Rgba => Channels::Rgba4,
        other => {
            return Err(Error::UnsupportedVariant(format!(
                "png color type {other:?}"
            )))
        }
    };
    buf.truncate(info.buffer_size());
    Image::from_raw(info.width, info.height, channels, buf)
}

fn encode_png(img: &Image) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, img.width, img.height);
        encoder.set_color(match img.channels {
            Channels::Gray1 => png::ColorType::Grayscale,
            Channels::Rgb3 => png::ColorType::Rgb,
            Channels::Rgba4 => png::ColorType::Rgba,
        });
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::MalformedFile(e.to_string()))?;
        writer
            .write_image_data(&img.data)
            .map_err(|e| Error::MalformedFile(e.to_string()))?;
    }
    Ok(out)
}

/// Cursor over a netpbm header: whitespace-separated ASCII fields with `#`
/// comments.
struct PnmHeader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PnmHeader<'a> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Result<u32> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedFile("expected number in pnm header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedFile("pnm header number out of range".into()))
    }
}

/// Parses one binary PGM/PPM image from the front of `bytes`, returning it
/// with the number of bytes consumed.
pub(crate) fn decode_pnm_prefix(
    bytes: &[u8],
    magic: &[u8; 2],
    channels: Channels,
) -> Result<(Image, usize)> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::MalformedFile(format!(
            "bad magic, expected {}",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut hdr = PnmHeader { bytes, pos: 2 };
    let width = hdr.number()?;
    let height = hdr.number()?;
    let maxval = hdr.number()?;
    if maxval == 0 {
        return Err(Error::MalformedFile("maxval 0".into()));
    }
    if maxval > 255 {
        return Err(Error::UnsupportedVariant(format!(
            "maxval {maxval} (16-bit)"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    if hdr.pos >= bytes.len() || !bytes[hdr.pos].is_ascii_whitespace() {
        return Err(Error::MalformedFile("missing raster separator".into()));
    }
    let start = hdr.pos + 1;
    let len = width as usize * height as usize * channels.count();
    if bytes.len() < start + len {
        return Err(Error::MalformedFile(format!(
            "truncated raster: need {len} bytes, have {}",
            bytes.len().saturating_sub(start)
        )));
    }
    let mut data = bytes[start..start + len].to_vec();
    if maxval != 255 {
        for v in &mut data {
            *v = ((*v as u32 * 255 + maxval / 2) / maxval).min(255) as u8;
        }
    }
    Ok((Image::from_raw(width, height, channels, data)?, start + len))
}

fn decode_pnm(bytes: &[u8], magic: &[u8; 2], channels: Channels) -> Result<Image> {
    decode_pnm_prefix(bytes, magic, channels).map(|(img, _)| img)
}

fn encode_pnm(img: &Image, magic: &str, channels: Channels) -> Result<Vec<u8>> {
    if img.channels != channels {
        return Err(Error::UnsupportedVariant(format!(
            "{magic} requires {channels:?}, image is {:?}",
            img.channels
        )));
    }
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    Ok(out)
}

#[inline]
pub(crate) fn luma(r: u8, g: u8, b: u8) -> u8 {
    let v = GRAY_WEIGHTS[0] * r as f32 + GRAY_WEIGHTS[1] * g as f32 + GRAY_WEIGHTS[2] * b as f32;
    v.round().clamp(0.0, 255.0) as u8
}

pub fn to_grayscale(img: &Image) -> Image {
    let data = match img.channels {
        Channels::Gray1 => return img.clone(),
        Channels::Rgb3 => img
            .data
            .chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect(),
        Channels::Rgba4 => img
            .data
            .chunks_exact(4)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect(),
    };
    Image {
        width: img.width,
        height: img.height,
        channels: Channels::Gray1,
        data,
    }
}

/// Per-axis source taps for center-aligned bilinear resampling.
struct Taps {
    lo: Vec<usize>,
    hi: Vec<usize>,
    frac: Vec<f32>,
}

fn taps(src: u32, dst: u32) -> Taps {
    let scale = src as f64 / dst as f64;
    let last = src as usize - 1;
    let mut t = Taps {
        lo: Vec::with_capacity(dst as usize),
        hi: Vec::with_capacity(dst as usize),
        frac: Vec::with_capacity(dst as usize),
    };
    for d in 0..dst {
        let s = ((d as f64 + 0.5) * scale - 0.5).max(0.0);
        let lo = (s.floor() as usize).min(last);
        let hi = (lo + 1).min(last);
        t.lo.push(lo);
        t.hi.push(hi);
        t.frac.push((s - lo as f64).clamp(0.0, 1.0) as f32);
    }
    t
}

pub fn resize_bilinear(img: &Image, out_w: u32, out_h: u32) -> Result<Image> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::ZeroDimension {
            width: out_w,
            height: out_h,
        });
    }
    if out_w == img.width && out_h == img.height {
        return Ok(img.clone());
    }
    match img.channels.count() {
        1 => Ok(resize_impl::<1>(img, out_w, out_h)),
        3 => Ok(resize_impl::<3>(img, out_w, out_h)),
        _ => Ok(resize_impl::<4>(img, out_w, out_h)),
    }
}

fn resize_impl<const C: usize>(img: &Image, out_w: u32, out_h: u32) -> Image {
    let xt = taps(img.width, out_w);
    let yt = taps(img.height, out_h);
    let stride = img.width as usize * C;
    let row_len = out_w as usize * C;
    let mut data = vec![0u8; row_len * out_h as usize];
    // horizontal pass for the two source rows of each output row
    let mut row_lo = vec![0f32; row_len];
    let mut row_hi = vec![0f32; row_len];
    let hpass = |src_row: &[u8], dst: &mut [f32]| {
        for (d, ((&lo, &hi), &f)) in dst
            .chunks_exact_mut(C)
            .zip(xt.lo.iter().zip(&xt.hi).zip(&xt.frac))
        {
            let (a, b) = (&src_row[lo * C..lo * C + C], &src_row[hi * C..hi * C + C]);
            for ch in 0..C {
                let (a, b) = (a[ch] as f32, b[ch] as f32);
                d[ch] = a + (b - a) * f;
            }
        }
    };
    let mut cached: (usize, usize) = (usize::MAX, usize::MAX);
    for (oy, dst) in data.chunks_exact_mut(row_len).enumerate() {
        let (lo, hi, f) = (yt.lo[oy], yt.hi[oy], yt.frac[oy]);
        if cached != (lo, hi) {
            if lo == cached.1 {
                std::mem::swap(&mut row_lo, &mut row_hi);
            } else {
                hpass(&img.data[lo * stride..(lo + 1) * stride], &mut row_lo);
            }
            hpass(&img.data[hi * stride..(hi + 1) * stride], &mut row_hi);
            cached = (lo, hi);
        }
        for ((d, &a), &b) in dst.iter_mut().zip(&row_lo).zip(&row_hi) {
            // both taps lie in [0, 255], so adding 0.5 and truncating rounds
            *d = (a + (b - a) * f + 0.5) as u8;
        }
    }
    Image {
        width: out_w,
        height: out_h,
        channels: img.channels,
        data,
    }
}

/// Crops a `w`x`h` region at (`x`, `y`). Parts outside the source are black.
pub fn crop(img: &Image, x: i64, y: i64, w: u32, h: u32) -> Result<Image> {
    let mut out = Image::new(w, h, img.channels)?;
    let c = img.channels.count();
    let x0 = x.max(0);
    let x1 = (x + w as i64).min(img.width as i64);
    let y0 = y.max(0);
    let y1 = (y + h as i64).min(img.height as i64);
    if x0 >= x1 || y0 >= y1 {
        return Ok(out);
    }
    let span = (x1 - x0) as usize * c;
    for sy in y0..y1 {
        let src = img.index(x0 as u32, sy as u32);
        let dst = out.index((x0 - x) as u32, (sy - y) as u32);
        out.data[dst..dst + span].copy_from_slice(&img.data[src..src + span]);
    }
    Ok(out)
}
