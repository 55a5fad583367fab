//! Binary greyscale PGM (`P5`) reading and writing.
//!
//! Fields map linearly between `[0, 1]` and `0..=maxval`; masks must contain
//! only `0` and `maxval`. 16-bit samples are big-endian as the format requires.

use std::path::Path;

use crate::field::{BinaryMask, ScalarField2D};
use crate::{Error, Result};

/// Raw decoded samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

impl Pgm {
    pub fn to_field(&self) -> Result<ScalarField2D> {
        let scale = 1.0 / f64::from(self.maxval);
        ScalarField2D::new(
            self.width,
            self.height,
            self.samples.iter().map(|&s| f64::from(s) * scale).collect(),
        )
    }

    pub fn to_mask(&self) -> Result<BinaryMask> {
        let mut values = Vec::with_capacity(self.samples.len());
        for (index, &s) in self.samples.iter().enumerate() {
            if s == 0 {
                values.push(0);
            } else if s == self.maxval {
                values.push(1);
            } else {
                return Err(Error::NotBinary {
                    index,
                    value: f64::from(s),
                });
            }
        }
        BinaryMask::new(self.width, self.height, values)
    }

    /// Quantizes a field with `round(v * maxval)`, clamping to `[0, maxval]`.
    pub fn from_field(field: &ScalarField2D, maxval: u16) -> Self {
        let m = f64::from(maxval.max(1));
        Self {
            width: field.width(),
            height: field.height(),
            maxval: maxval.max(1),
            samples: field.values().iter().map(|&v| (v * m).round().clamp(0.0, m) as u16).collect(),
        }
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            maxval: 255,
            samples: mask.values().iter().map(|&v| u16::from(v) * 255).collect(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let header = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval);
        let wide = self.maxval > 255;
        let mut out = Vec::with_capacity(header.len() + self.samples.len() * if wide { 2 } else { 1 });
        out.extend_from_slice(header.as_bytes());
        for &s in &self.samples {
            if wide {
                out.extend_from_slice(&s.to_be_bytes());
            } else {
                out.push(s as u8);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        decode(bytes).map_err(|reason| Error::Image {
            path: Default::default(),
            reason,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        decode(&bytes).map_err(|reason| Error::Image {
            path: path.to_path_buf(),
            reason,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }
}

fn decode(bytes: &[u8]) -> std::result::Result<Pgm, String> {
    match bytes.get(..2) {
        Some(b"P5") => {}
        Some(b"P2") => return Err("ASCII PGM (P2) is not supported; convert to binary P5".into()),
        Some(m) if m[0] == b'P' => {
            return Err(format!("unsupported netpbm variant {}; expected binary greyscale P5", String::from_utf8_lossy(m)))
        }
        _ => return Err("not a PGM file (missing P5 magic)".into()),
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (slot, name) in fields.iter_mut().zip(["width", "height", "maxval"]) {
        skip_space_and_comments(bytes, &mut pos);
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(format!("malformed header: expected {name}"));
        }
        *slot = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("malformed header: {name} out of range"))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err("image has zero size".into());
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err("malformed header: missing whitespace before raster".into()),
    }
    let n = width.checked_mul(height).ok_or("image dimensions overflow")?;
    let bps = if maxval > 255 { 2 } else { 1 };
    let raster = &bytes[pos..];
    if raster.len() < n * bps {
        return Err(format!("truncated raster: expected {} bytes, found {}", n * bps, raster.len()));
    }
    let samples: Vec<u16> = if bps == 2 {
        raster[..2 * n].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        raster[..n].iter().map(|&b| u16::from(b)).collect()
    };
    if let Some(i) = samples.iter().position(|&s| usize::from(s) > maxval) {
        return Err(format!("sample {} at index {i} exceeds maxval {maxval}", samples[i]));
    }
    Ok(Pgm {
        width,
        height,
        maxval: maxval as u16,
        samples,
    })
}

fn skip_space_and_comments(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        if bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        } else if bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ScalarField2D> {
    Pgm::read(path)?.to_field()
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    Pgm::read(path)?.to_mask()
}

/// Writes with 8-bit samples unless `maxval` exceeds 255.
pub fn write_field(path: impl AsRef<Path>, field: &ScalarField2D, maxval: u16) -> Result<()> {
    Pgm::from_field(field, maxval).write(path)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    Pgm::from_mask(mask).write(path)
}
