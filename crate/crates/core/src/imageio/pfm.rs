use super::Image;
use glam::DVec3;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PfmError {
    #[error("not a PFM file (magic {0:?})")]
    BadMagic(String),
    #[error("malformed PFM header: {0}")]
    Header(&'static str),
    #[error("PFM dimensions {width}x{height} are invalid")]
    Dimensions { width: usize, height: usize },
    #[error("PFM payload holds {actual} bytes, expected {expected}")]
    Payload { expected: usize, actual: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Largest accepted side length; guards allocations on hostile headers.
const MAX_SIDE: usize = 1 << 15;

/// Encode as colour PFM: little-endian (`-1.0` scale), bottom row first.
pub fn encode_pfm(img: &Image) -> Vec<u8> {
    let header = format!("PF\n{} {}\n-1.0\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.pixels().len() * 12);
    out.extend_from_slice(header.as_bytes());
    for y in (0..img.height()).rev() {
        for x in 0..img.width() {
            let c = img.get(x, y);
            for v in [c.x, c.y, c.z] {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    out
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (*pos > start).then(|| &bytes[start..*pos])
}

fn parse<T: std::str::FromStr>(tok: Option<&[u8]>, what: &'static str) -> Result<T, PfmError> {
    tok.and_then(|t| std::str::from_utf8(t).ok())
        .and_then(|s| s.parse().ok())
        .ok_or(PfmError::Header(what))
}

/// Decode a colour (`PF`) or greyscale (`Pf`) PFM. Greyscale is expanded to
/// RGB. Either byte order is accepted.
pub fn decode_pfm(bytes: &[u8]) -> Result<Image, PfmError> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos).ok_or(PfmError::Header("missing magic"))?;
    let channels = match magic {
        b"PF" => 3,
        b"Pf" => 1,
        other => return Err(PfmError::BadMagic(String::from_utf8_lossy(other).into_owned())),
    };
    let width: usize = parse(next_token(bytes, &mut pos), "width")?;
    let height: usize = parse(next_token(bytes, &mut pos), "height")?;
    let scale: f64 = parse(next_token(bytes, &mut pos), "scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(PfmError::Header("scale must be finite and non-zero"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(PfmError::Header("missing separator after scale"));
    }
    pos += 1;
    if width == 0 || height == 0 || width > MAX_SIDE || height > MAX_SIDE {
        return Err(PfmError::Dimensions { width, height });
    }
    let expected = width * height * channels * 4;
    let raster = &bytes[pos..];
    if raster.len() != expected {
        return Err(PfmError::Payload { expected, actual: raster.len() });
    }
    let little = scale < 0.0;
    let read = |i: usize| {
        let b: [u8; 4] = raster[i * 4..i * 4 + 4].try_into().unwrap();
        f64::from(if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) })
    };
    let mut img = Image::new(width, height);
    for row in 0..height {
        let y = height - 1 - row;
        for x in 0..width {
            let base = (row * width + x) * channels;
            let c = if channels == 3 {
                DVec3::new(read(base), read(base + 1), read(base + 2))
            } else {
                DVec3::splat(read(base))
            };
            img.set(x, y, c);
        }
    }
    Ok(img)
}

pub fn write_pfm(path: impl AsRef<Path>, img: &Image) -> Result<(), PfmError> {
    std::fs::write(path, encode_pfm(img))?;
    Ok(())
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<Image, PfmError> {
    decode_pfm(&std::fs::read(path)?)
}
