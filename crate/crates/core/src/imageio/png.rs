use super::{tonemap_rgb8, Image};
use glam::DVec3;
use image::{ImageFormat, RgbImage};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PngError {
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Decode any 8/16-bit PNG to RGB values in `[0, 1]` (display encoded).
pub fn decode_png(bytes: &[u8]) -> Result<Image, PngError> {
    let rgb = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb
        .pixels()
        .map(|p| DVec3::new(p[0] as f64, p[1] as f64, p[2] as f64) / 255.0)
        .collect();
    Ok(Image::from_vec(w as usize, h as usize, data))
}

pub fn read_png(path: impl AsRef<Path>) -> Result<Image, PngError> {
    decode_png(&std::fs::read(path)?)
}

pub fn encode_png_rgb8(width: usize, height: usize, rgb: &[u8]) -> Result<Vec<u8>, PngError> {
    let buf = RgbImage::from_raw(width as u32, height as u32, rgb.to_vec())
        .expect("RGB8 buffer does not match dimensions");
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Store display-encoded values in `[0, 1]` as 8-bit PNG without tone mapping.
pub fn write_png_ldr(path: impl AsRef<Path>, img: &Image) -> Result<(), PngError> {
    let rgb: Vec<u8> = img
        .pixels()
        .iter()
        .flat_map(|c| [c.x, c.y, c.z])
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    std::fs::write(path, encode_png_rgb8(img.width(), img.height(), &rgb)?)?;
    Ok(())
}

pub fn write_png_tonemapped(path: impl AsRef<Path>, img: &Image) -> Result<(), PngError> {
    let rgb = tonemap_rgb8(img);
    std::fs::write(path, encode_png_rgb8(img.width(), img.height(), &rgb)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ldr_round_trip_is_exact_on_8bit_values() {
        let img = Image::from_fn(5, 3, |x, y| DVec3::new(x as f64 * 51.0, y as f64 * 17.0, 255.0) / 255.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        write_png_ldr(&path, &img).unwrap();
        let back = read_png(&path).unwrap();
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert!((*a - *b).abs().max_element() < 1e-12);
        }
    }
}
