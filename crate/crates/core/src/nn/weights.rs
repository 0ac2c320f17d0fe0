//! VGGW weight files.
//!
//! Little-endian layout: magic `VGGW`, version `u32` (1), tensor count `u32`,
//! then per tensor: name length `u16`, UTF-8 name, rank `u8`, `rank` dims as
//! `u32`, and the raw `f32` data.

use std::collections::HashMap;
use std::path::Path;

use super::vgg::{build_model, Model, VggConfig};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"VGGW";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::MalformedFile(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::MalformedFile("tensor size overflows".into()))?,
        )?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let got = self.take(4).map_err(|_| Error::BadMagic {
            expected,
            found: [0; 4],
        })?;
        if got != expected {
            return Err(Error::BadMagic {
                expected,
                found: got.try_into().unwrap(),
            });
        }
        Ok(())
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, data: &[f32]) {
    out.reserve(data.len() * 4);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn parse_tensors(bytes: &[u8]) -> Result<Vec<RawTensor>> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let count = r.u32()?;
    let mut out = Vec::with_capacity(count.min(1024) as usize);
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::MalformedFile("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u8()? as usize;
        let dims = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let n = n.ok_or_else(|| Error::MalformedFile(format!("`{name}` too large")))?;
        let data = r.f32s(n)?;
        out.push(RawTensor { name, dims, data });
    }
    Ok(out)
}

pub fn serialize_tensors<'a, I>(tensors: I) -> Vec<u8>
where
    I: IntoIterator<Item = (&'a str, &'a [usize], &'a [f32])>,
{
    let items: Vec<_> = tensors.into_iter().collect();
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(items.len() as u32).to_le_bytes());
    for (name, dims, data) in items {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(dims.len() as u8);
        for &d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        put_f32s(&mut out, data);
    }
    out
}

pub fn model_to_bytes(model: &Model) -> Vec<u8> {
    let params = model.named_params();
    serialize_tensors(
        params
            .iter()
            .map(|p| (p.name.as_str(), p.dims.as_slice(), p.data)),
    )
}

/// Fills a model for `config` from VGGW bytes. Every expected tensor must be
/// present with its exact shape and finite values; extra tensors are ignored.
pub fn model_from_bytes(bytes: &[u8], config: &VggConfig) -> Result<Model> {
    let mut by_name: HashMap<String, RawTensor> = parse_tensors(bytes)?
        .into_iter()
        .map(|t| (t.name.clone(), t))
        .collect();
    let mut model = build_model(config)?;
    let names: Vec<String> = model.named_params().into_iter().map(|p| p.name).collect();
    for name in names {
        let t = by_name
            .remove(&name)
            .ok_or_else(|| Error::MissingTensor(name.clone()))?;
        let (dims, slot) = model.param_mut(&name).expect("name from named_params");
        if t.dims != dims {
            return Err(Error::ShapeMismatch(format!(
                "`{name}` has dims {:?}, expected {dims:?}",
                t.dims
            )));
        }
        if t.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteWeight(name));
        }
        slot.copy_from_slice(&t.data);
    }
    Ok(model)
}

pub fn save_weights(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>, config: &VggConfig) -> Result<Model> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes, config)
}
