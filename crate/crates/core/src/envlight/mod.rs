//! Environment illumination: from dual-fisheye captures to a calibrated,
//! volume-centred HDR radiance map, plus the per-frame illumination
//! difference that gates temporal reuse in the denoiser.
//!
//! Panoramas are equirectangular with +Y up. Column `i` of a `W`-wide map
//! spans azimuth `[-π, π)` measured from −Z towards +X; row `j` of an
//! `H`-tall map spans polar angle `[0, π]` measured from +Y.

mod calibrate;
mod hdr;
mod illum;
mod prefilter;
mod sampler;
mod stitch;

pub use self::calibrate::{calibrate, warp_direction, warp_to_center, DEFAULT_SPHERE_RADIUS};
pub use self::hdr::{estimate_hdr, estimate_hdr_with_regions, HdrParams, LightRegion};
pub use self::illum::{illumination_difference, patch_bounds, ssim, Extremal, IllumParams, IlluminationDiff, T_EPSILON};
pub use self::prefilter::{gaussian_kernel, prefilter};
pub use self::sampler::{EnvSample, EnvSampler};
pub use self::stitch::{stitch, stitch_with, synthesize_fisheye, FisheyeLens, FisheyePair, DEFAULT_FOV_DEG, DEFAULT_PANO_HEIGHT, DEFAULT_PANO_WIDTH};

use crate::imageio::Image;
use crate::math::Rgb;
use glam::DVec3;
use std::f64::consts::{PI, TAU};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("equirectangular map must be 2:1, got {width}x{height}")]
    Aspect { width: usize, height: usize },
    #[error("{0} radiance map contains an out-of-range pixel at ({1}, {2})")]
    PixelRange(&'static str, usize, usize),
    #[error("expected a {expected:?} map, got {actual:?}")]
    WrongFrame { expected: MapFrame, actual: MapFrame },
    #[error("expected a {expected:?} map, got {actual:?}")]
    WrongKind { expected: MapKind, actual: MapKind },
    #[error("map sizes differ: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error(transparent)]
    Quaternion(#[from] crate::math::NonUnitQuaternion),
    #[error("offset length {offset} must be smaller than the environment radius {radius}")]
    OffsetOutsideSphere { offset: f64, radius: f64 },
    #[error("invalid fisheye pair: {0}")]
    Fisheye(String),
    #[error("direction {0} is outside both fisheye fields of view")]
    Uncovered(DVec3),
    #[error("patch grid {grid_n} must be in 1..={max}")]
    PatchGrid { grid_n: usize, max: usize },
    #[error("prefilter levels {levels} must be in 1..={max}")]
    Levels { levels: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Ldr,
    Hdr,
}

/// Coordinate frame a panorama is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFrame {
    /// As captured, rigidly attached to the viewer.
    Camera,
    /// Rotated into world orientation.
    World,
    /// Re-centred on the volume.
    Warped,
}

/// How a panorama is read at a continuous direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    Nearest,
    #[default]
    Bilinear,
}

/// Direction for azimuth `phi` and polar angle `theta`.
#[inline]
pub fn direction(phi: f64, theta: f64) -> DVec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    DVec3::new(st * sp, ct, -st * cp)
}

/// `(phi, theta)` of a unit direction.
#[inline]
pub fn angles(d: DVec3) -> (f64, f64) {
    (d.x.atan2(-d.z), d.y.clamp(-1.0, 1.0).acos())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadianceMap {
    image: Image,
    kind: MapKind,
    frame: MapFrame,
}

impl RadianceMap {
    pub fn new(image: Image, kind: MapKind, frame: MapFrame) -> Result<Self, EnvError> {
        let (w, h) = (image.width(), image.height());
        if h == 0 || w != 2 * h {
            return Err(EnvError::Aspect { width: w, height: h });
        }
        for (idx, c) in image.pixels().iter().enumerate() {
            let ok = match kind {
                MapKind::Ldr => c.cmpge(DVec3::ZERO).all() && c.cmple(DVec3::ONE).all(),
                MapKind::Hdr => c.is_finite() && c.cmpge(DVec3::ZERO).all(),
            };
            if !ok {
                let label = if kind == MapKind::Ldr { "LDR" } else { "HDR" };
                return Err(EnvError::PixelRange(label, idx % w, idx / w));
            }
        }
        Ok(RadianceMap { image, kind, frame })
    }

    pub fn constant(height: usize, value: Rgb, kind: MapKind, frame: MapFrame) -> Result<Self, EnvError> {
        Self::new(Image::filled(2 * height, height, value), kind, frame)
    }

    /// Evaluate `f` at every texel centre direction.
    pub fn from_fn(height: usize, kind: MapKind, frame: MapFrame, f: impl Fn(DVec3) -> Rgb) -> Result<Self, EnvError> {
        let w = 2 * height;
        let img = Image::from_fn(w, height, |i, j| f(texel_direction(w, height, i, j)));
        Self::new(img, kind, frame)
    }

    pub(crate) fn with_image(&self, image: Image, frame: MapFrame) -> RadianceMap {
        RadianceMap { image, kind: self.kind, frame }
    }

    /// Reinterpret the frame tag; used when a file is already in world space.
    pub fn relabel(mut self, frame: MapFrame) -> Self {
        self.frame = frame;
        self
    }

    pub fn image(&self) -> &Image {
        &self.image
    }

    pub fn into_image(self) -> Image {
        self.image
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn frame(&self) -> MapFrame {
        self.frame
    }

    pub fn texel_direction(&self, i: usize, j: usize) -> DVec3 {
        texel_direction(self.width(), self.height(), i, j)
    }

    /// Texel containing direction `d`.
    pub fn texel_of(&self, d: DVec3) -> (usize, usize) {
        let (w, h) = (self.width(), self.height());
        let (u, v) = continuous_coords(w, h, d);
        let i = (u.floor() as i64).rem_euclid(w as i64) as usize;
        let j = (v.floor() as usize).min(h - 1);
        (i, j)
    }

    /// Solid angle of a texel in row `j`.
    pub fn texel_solid_angle(&self, j: usize) -> f64 {
        let h = self.height() as f64;
        let (ta, tb) = (j as f64 * PI / h, (j + 1) as f64 * PI / h);
        TAU / self.width() as f64 * (ta.cos() - tb.cos())
    }

    #[inline]
    pub fn lookup(&self, d: DVec3, sampling: Sampling) -> Rgb {
        match sampling {
            Sampling::Nearest => {
                let (i, j) = self.texel_of(d);
                self.image.get(i, j)
            }
            Sampling::Bilinear => self.bilinear(d),
        }
    }

    fn bilinear(&self, d: DVec3) -> Rgb {
        let (w, h) = (self.width(), self.height());
        let (u, v) = continuous_coords(w, h, d);
        let x = u - 0.5;
        let y = (v - 0.5).clamp(0.0, (h - 1) as f64);
        let x0 = x.floor();
        let fx = x - x0;
        let y0 = y.floor().min((h.max(2) - 2) as f64).max(0.0);
        let fy = if h > 1 { y - y0 } else { 0.0 };
        let xi = (x0 as i64).rem_euclid(w as i64) as usize;
        let xi1 = (xi + 1) % w;
        let yi = y0 as usize;
        let yi1 = (yi + 1).min(h - 1);
        let img = &self.image;
        let top = img.get(xi, yi).lerp(img.get(xi1, yi), fx);
        let bottom = img.get(xi, yi1).lerp(img.get(xi1, yi1), fx);
        top.lerp(bottom, fy)
    }
}

/// Direction through the centre of texel `(i, j)`.
pub fn texel_direction(width: usize, height: usize, i: usize, j: usize) -> DVec3 {
    let phi = (i as f64 + 0.5) / width as f64 * TAU - PI;
    let theta = (j as f64 + 0.5) / height as f64 * PI;
    direction(phi, theta)
}

/// Continuous texel coordinates of `d`: `u ∈ [0, W]`, `v ∈ [0, H]`.
#[inline]
fn continuous_coords(w: usize, h: usize, d: DVec3) -> (f64, f64) {
    let (phi, theta) = angles(d.normalize());
    ((phi + PI) / TAU * w as f64, theta / PI * h as f64)
}
