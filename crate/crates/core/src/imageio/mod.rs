//! Linear RGB images and their on-disk encodings.
//!
//! Everything inside the renderer is linear light in `f64`. PFM carries
//! linear data bit-exactly (as `f32`); PNG is either an LDR input or a
//! tone-mapped export.

mod pfm;
mod png;
mod tonemap;

pub use self::pfm::{decode_pfm, encode_pfm, read_pfm, write_pfm, PfmError};
pub use self::png::{decode_png, encode_png_rgb8, read_png, write_png_ldr, write_png_tonemapped, PngError};
pub use self::tonemap::{tonemap_rgb8, tonemap_value, GAMMA};

use crate::math::Rgb;
use glam::DVec3;

/// Row-major RGB image, first row at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<Rgb>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, DVec3::ZERO)
    }

    pub fn filled(width: usize, height: usize, value: Rgb) -> Self {
        Image { width, height, data: vec![value; width * height] }
    }

    /// # Panics
    /// If `data.len() != width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<Rgb>) -> Self {
        assert_eq!(data.len(), width * height, "image buffer size mismatch");
        Image { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Image { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixels(&self) -> &[Rgb] {
        &self.data
    }

    #[inline]
    pub fn pixels_mut(&mut self) -> &mut [Rgb] {
        &mut self.data
    }

    pub fn into_pixels(self) -> Vec<Rgb> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: Rgb) {
        self.data[y * self.width + x] = v;
    }

    pub fn same_size(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map(&self, f: impl Fn(Rgb) -> Rgb) -> Image {
        Image { width: self.width, height: self.height, data: self.data.iter().map(|&c| f(c)).collect() }
    }
}

/// Mean squared error over all channels of all pixels.
pub fn mse(a: &Image, b: &Image) -> f64 {
    assert!(a.same_size(b), "mse of differently sized images");
    let sum: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(p, q)| (*p - *q).length_squared())
        .sum();
    sum / (3 * a.pixels().len()) as f64
}

/// Peak signal-to-noise ratio for images with a peak value of 1.
pub fn psnr(a: &Image, b: &Image) -> f64 {
    -10.0 * mse(a, b).log10()
}
