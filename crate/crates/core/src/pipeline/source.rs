use std::collections::HashMap;
use std::io::{BufRead, ErrorKind, Read};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::facedetect::FaceBox;
use crate::imagecore::{Channels, Image, ImageFormat};

/// Externally supplied face boxes keyed by frame index, parsed from lines of
/// `frame_index x y w h`. Blank lines and `#` comments are skipped; the first
/// box listed for a frame wins.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExternalBoxes {
    boxes: HashMap<u64, FaceBox>,
}

impl ExternalBoxes {
    pub fn parse(text: &str) -> Result<Self> {
        let mut boxes = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Config(format!("boxes line {}: expected `frame x y w h`", n + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(bad());
            }
            let frame: u64 = fields[0].parse().map_err(|_| bad())?;
            let mut v = [0f32; 4];
            for (slot, f) in v.iter_mut().zip(&fields[1..]) {
                *slot = f.parse().map_err(|_| bad())?;
            }
            boxes
                .entry(frame)
                .or_insert(FaceBox::new(v[0], v[1], v[2], v[3], f32::INFINITY));
        }
        Ok(ExternalBoxes { boxes })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn insert(&mut self, frame: u64, b: FaceBox) {
        self.boxes.insert(frame, b);
    }

    pub fn get(&self, frame: u64) -> Option<FaceBox> {
        self.boxes.get(&frame).copied()
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

/// Image files in `dir`, ordered by the last run of digits in the file stem
/// and then by name. Files with other extensions are ignored.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| Error::SourceUnavailable(format!("{}: {e}", dir.display())))?;
    let mut frames = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && ImageFormat::from_path(&path).is_some() {
            frames.push(path);
        }
    }
    frames.sort_by_cached_key(|p| {
        let stem = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        (frame_number(&stem), stem)
    });
    Ok(frames)
}

fn frame_number(stem: &str) -> Option<u64> {
    let end = stem.rfind(|c: char| c.is_ascii_digit())? + 1;
    let start = stem[..end]
        .rfind(|c: char| !c.is_ascii_digit())
        .map_or(0, |i| i + 1);
    stem[start..end].parse().ok()
}

/// Reads one binary PGM or PPM frame, or `None` at a clean end of stream.
pub fn read_pnm_frame(reader: &mut impl BufRead) -> Result<Option<Image>> {
    let mut magic = [0u8; 2];
    match reader.read_exact(&mut magic[..1]) {
        Ok(()) => {}
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(Error::io("<stream>", e)),
    }
    reader
        .read_exact(&mut magic[1..])
        .map_err(|_| Error::MalformedFile("stream ends inside a header".into()))?;
    let channels = match &magic {
        b"P5" => Channels::Gray1,
        b"P6" => Channels::Rgb3,
        _ => {
            return Err(Error::MalformedFile(format!(
                "unexpected frame magic {:?}",
                String::from_utf8_lossy(&magic)
            )))
        }
    };
    let width = header_number(reader)?;
    let height = header_number(reader)?;
    let maxval = header_number(reader)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedVariant(format!("maxval {maxval}")));
    }
    let mut data = vec![0u8; width as usize * height as usize * channels.count()];
    reader
        .read_exact(&mut data)
        .map_err(|_| Error::MalformedFile("truncated frame raster".into()))?;
    if maxval != 255 {
        for v in &mut data {
            *v = ((*v as u32 * 255 + maxval / 2) / maxval).min(255) as u8;
        }
    }
    Image::from_raw(width, height, channels, data).map(Some)
}

/// Skips whitespace and comments, reads a decimal number and consumes the
/// single delimiter after it.
fn header_number(reader: &mut impl BufRead) -> Result<u32> {
    let mut byte = [0u8; 1];
    let mut next = |r: &mut dyn Read| -> Result<u8> {
        r.read_exact(&mut byte)
            .map_err(|_| Error::MalformedFile("stream ends inside a header".into()))?;
        Ok(byte[0])
    };
    let mut b = next(reader)?;
    loop {
        if b == b'#' {
            while b != b'\n' {
                b = next(reader)?;
            }
        } else if !b.is_ascii_whitespace() {
            break;
        }
        b = next(reader)?;
    }
    let mut value: u64 = 0;
    let mut digits = 0;
    while b.is_ascii_digit() {
        value = value * 10 + (b - b'0') as u64;
        digits += 1;
        if value > u32::MAX as u64 {
            return Err(Error::MalformedFile(
                "pnm header number out of range".into(),
            ));
        }
        b = next(reader)?;
    }
    if digits == 0 || !b.is_ascii_whitespace() {
        return Err(Error::MalformedFile("expected number in pnm header".into()));
    }
    Ok(value as u32)
}
