use crate::imageio::{decode_png, encode_png_rgb8, tonemap_rgb8, Image};
use crate::render::Eye;
use thiserror::Error;

pub const MAGIC: [u8; 2] = *b"VB";
pub const VERSION: u8 = 1;
/// Magic, version, frame id, eye, width, height, encoding.
pub const HEADER_LEN: usize = 13;

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Encoding {
    /// Tone-mapped 8-bit RGB, row-major, top row first.
    RawRgb8 = 0,
    Png = 1,
}

#[derive(Debug, Error, PartialEq)]
pub enum PacketError {
    #[error("packet holds {actual} bytes, shorter than the {HEADER_LEN}-byte header")]
    ShortHeader { actual: usize },
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 2]),
    #[error("unsupported version {0}")]
    Version(u8),
    #[error("invalid eye {0}")]
    Eye(u8),
    #[error("unknown encoding {0}")]
    Encoding(u8),
    #[error("payload length {actual} does not match expected {expected}")]
    PayloadLength { expected: usize, actual: usize },
    #[error("image {width}x{height} does not fit the header")]
    Dimensions { width: usize, height: usize },
    #[error("PNG payload: {0}")]
    Png(String),
}

/// A decoded frame packet. The payload is kept encoded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePacket {
    pub frame: u32,
    pub eye: Eye,
    pub width: u16,
    pub height: u16,
    pub encoding: Encoding,
    pub payload: Vec<u8>,
}

impl FramePacket {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&self.frame.to_le_bytes());
        out.push(self.eye as u8);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.push(self.encoding as u8);
        out.extend_from_slice(&self.payload);
        out
    }

    /// Tone-mapped RGB8 pixels regardless of encoding.
    pub fn rgb8(&self) -> Result<Vec<u8>, PacketError> {
        match self.encoding {
            Encoding::RawRgb8 => Ok(self.payload.clone()),
            Encoding::Png => {
                let img = decode_png(&self.payload).map_err(|e| PacketError::Png(e.to_string()))?;
                if img.width() != self.width as usize || img.height() != self.height as usize {
                    return Err(PacketError::Dimensions { width: img.width(), height: img.height() });
                }
                Ok(img.pixels().iter().flat_map(|p| p.to_array().map(|c| (c * 255.0).round() as u8)).collect())
            }
        }
    }
}

/// Tone-map `img` and wrap it in a packet.
pub fn encode_packet(img: &Image, frame: u32, eye: Eye, encoding: Encoding) -> Result<Vec<u8>, PacketError> {
    let (w, h) = (img.width(), img.height());
    let (Ok(width), Ok(height)) = (u16::try_from(w), u16::try_from(h)) else {
        return Err(PacketError::Dimensions { width: w, height: h });
    };
    let rgb = tonemap_rgb8(img);
    let payload = match encoding {
        Encoding::RawRgb8 => rgb,
        Encoding::Png => encode_png_rgb8(w, h, &rgb).map_err(|e| PacketError::Png(e.to_string()))?,
    };
    Ok(FramePacket { frame, eye, width, height, encoding, payload }.to_bytes())
}

/// Parse and validate a packet. PNG payloads are checked for their
/// signature and header dimensions but not decoded.
pub fn decode_packet(bytes: &[u8]) -> Result<FramePacket, PacketError> {
    if bytes.len() < HEADER_LEN {
        return Err(PacketError::ShortHeader { actual: bytes.len() });
    }
    let magic = [bytes[0], bytes[1]];
    if magic != MAGIC {
        return Err(PacketError::BadMagic(magic));
    }
    if bytes[2] != VERSION {
        return Err(PacketError::Version(bytes[2]));
    }
    let frame = u32::from_le_bytes([bytes[3], bytes[4], bytes[5], bytes[6]]);
    let eye = match bytes[7] {
        0 => Eye::Left,
        1 => Eye::Right,
        e => return Err(PacketError::Eye(e)),
    };
    let width = u16::from_le_bytes([bytes[8], bytes[9]]);
    let height = u16::from_le_bytes([bytes[10], bytes[11]]);
    let payload = &bytes[HEADER_LEN..];
    let encoding = match bytes[12] {
        0 => {
            let expected = width as usize * height as usize * 3;
            if payload.len() != expected {
                return Err(PacketError::PayloadLength { expected, actual: payload.len() });
            }
            Encoding::RawRgb8
        }
        1 => {
            check_png_header(payload, width, height)?;
            Encoding::Png
        }
        e => return Err(PacketError::Encoding(e)),
    };
    Ok(FramePacket { frame, eye, width, height, encoding, payload: payload.to_vec() })
}

fn check_png_header(payload: &[u8], width: u16, height: u16) -> Result<(), PacketError> {
    // Signature, IHDR length and tag, then big-endian width and height.
    if payload.len() < 24 {
        return Err(PacketError::Png(format!("payload of {} bytes is too short", payload.len())));
    }
    if payload[..8] != PNG_SIGNATURE || &payload[12..16] != b"IHDR" {
        return Err(PacketError::Png("missing PNG signature or IHDR".into()));
    }
    let w = u32::from_be_bytes([payload[16], payload[17], payload[18], payload[19]]) as usize;
    let h = u32::from_be_bytes([payload[20], payload[21], payload[22], payload[23]]) as usize;
    if w != width as usize || h != height as usize {
        return Err(PacketError::Dimensions { width: w, height: h });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rgb;
    use proptest::prelude::*;

    #[test]
    fn golden_header() {
        let p = FramePacket { frame: 0x0102_0304, eye: Eye::Right, width: 640, height: 480, encoding: Encoding::Png, payload: vec![] };
        let expected: [u8; 13] = [b'V', b'B', 1, 0x04, 0x03, 0x02, 0x01, 1, 0x80, 0x02, 0xe0, 0x01, 1];
        assert_eq!(p.to_bytes(), expected);
    }

    #[test]
    fn truncated_payload_names_lengths() {
        let img = Image::filled(4, 3, Rgb::splat(0.5));
        let bytes = encode_packet(&img, 9, Eye::Left, Encoding::RawRgb8).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 36);
        let err = decode_packet(&bytes[..bytes.len() - 5]).unwrap_err();
        assert_eq!(err, PacketError::PayloadLength { expected: 36, actual: 31 });
        assert!(err.to_string().contains("36") && err.to_string().contains("31"));
        assert_eq!(decode_packet(&bytes[..5]).unwrap_err(), PacketError::ShortHeader { actual: 5 });
    }

    #[test]
    fn header_field_rejections() {
        let img = Image::filled(2, 2, Rgb::ONE);
        let good = encode_packet(&img, 1, Eye::Left, Encoding::RawRgb8).unwrap();
        let mut b = good.clone();
        b[0] = b'X';
        assert!(matches!(decode_packet(&b), Err(PacketError::BadMagic(_))));
        let mut b = good.clone();
        b[2] = 2;
        assert_eq!(decode_packet(&b), Err(PacketError::Version(2)));
        let mut b = good.clone();
        b[7] = 2;
        assert_eq!(decode_packet(&b), Err(PacketError::Eye(2)));
        let mut b = good;
        b[12] = 7;
        assert_eq!(decode_packet(&b), Err(PacketError::Encoding(7)));
    }

    #[test]
    fn png_payload_is_checked() {
        let img = Image::from_fn(5, 4, |x, y| Rgb::new(x as f64 * 0.2, y as f64 * 0.3, 0.1));
        let bytes = encode_packet(&img, 2, Eye::Right, Encoding::Png).unwrap();
        let p = decode_packet(&bytes).unwrap();
        assert_eq!(p.rgb8().unwrap(), tonemap_rgb8(&img));
        let mut wrong = bytes.clone();
        wrong[8] = 6;
        assert!(matches!(decode_packet(&wrong), Err(PacketError::Dimensions { width: 5, height: 4 })));
        let mut broken = bytes;
        broken[HEADER_LEN + 1] = b'X';
        assert!(matches!(decode_packet(&broken), Err(PacketError::Png(_))));
    }

    proptest! {
        #[test]
        fn round_trip(w in 1usize..12, h in 1usize..12, frame: u32, right: bool, png: bool, seed: u64) {
            let mut rng = crate::rng::SampleRng::from_seed(seed);
            let img = Image::from_fn(w, h, |_, _| Rgb::new(rng.uniform(), rng.uniform() * 4.0, rng.uniform()));
            let eye = if right { Eye::Right } else { Eye::Left };
            let enc = if png { Encoding::Png } else { Encoding::RawRgb8 };
            let bytes = encode_packet(&img, frame, eye, enc).unwrap();
            let p = decode_packet(&bytes).unwrap();
            prop_assert_eq!((p.frame, p.eye, p.width as usize, p.height as usize, p.encoding), (frame, eye, w, h, enc));
            prop_assert_eq!(p.rgb8().unwrap(), tonemap_rgb8(&img));
            prop_assert_eq!(p.to_bytes(), bytes);
        }
    }
}
