use super::{EnvError, MapFrame, MapKind, RadianceMap, Sampling};
use crate::imageio::Image;
use crate::math::Rgb;
use glam::{DQuat, DVec3};
use std::f64::consts::PI;

pub const DEFAULT_PANO_WIDTH: usize = 512;
pub const DEFAULT_PANO_HEIGHT: usize = 256;
pub const DEFAULT_FOV_DEG: f64 = 200.0;

/// Equidistant fisheye lens (`r = f·θ`) looking down its local −Z axis,
/// with the image circle inscribed in a square image of side `size`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisheyeLens {
    pub size: usize,
    pub fov: f64,
}

impl FisheyeLens {
    fn focal(&self) -> f64 {
        0.5 * self.size as f64 / (0.5 * self.fov)
    }

    /// Angle between `d` (lens frame) and the optical axis.
    #[inline]
    pub fn off_axis(d: DVec3) -> f64 {
        (-d.z).clamp(-1.0, 1.0).acos()
    }

    /// Continuous image coordinates of lens-frame direction `d`; pixel
    /// centres sit at half-integers, y grows downwards.
    pub fn project(&self, d: DVec3) -> (f64, f64) {
        let d = d.normalize();
        let r = self.focal() * Self::off_axis(d);
        let psi = d.y.atan2(d.x);
        let c = 0.5 * self.size as f64;
        (c + r * psi.cos(), c - r * psi.sin())
    }

    /// Inverse of [`project`](Self::project); `None` past θ = π.
    pub fn unproject(&self, px: f64, py: f64) -> Option<DVec3> {
        let c = 0.5 * self.size as f64;
        let (dx, dy) = (px - c, c - py);
        let theta = dx.hypot(dy) / self.focal();
        if theta > PI {
            return None;
        }
        let psi = dy.atan2(dx);
        let st = theta.sin();
        Some(DVec3::new(st * psi.cos(), st * psi.sin(), -theta.cos()))
    }
}

/// Front and back captures of a dual-fisheye camera.
///
/// The front lens frame is the camera frame. `rotation` takes back-lens
/// directions into the camera frame.
#[derive(Debug, Clone)]
pub struct FisheyePair {
    front: Image,
    back: Image,
    fov_deg: f64,
    rotation: DQuat,
}

impl FisheyePair {
    pub fn new(front: Image, back: Image, fov_deg: f64, rotation: DQuat) -> Result<Self, EnvError> {
        if !(fov_deg > 180.0 && fov_deg < 250.0) {
            return Err(EnvError::Fisheye(format!("fov {fov_deg} must lie in (180, 250)")));
        }
        if front.width() != front.height() || front.width() == 0 {
            return Err(EnvError::Fisheye("images must be square".into()));
        }
        if !front.same_size(&back) {
            return Err(EnvError::Fisheye("front and back sizes differ".into()));
        }
        let rotation = crate::math::checked_unit_quat(rotation)?;
        Ok(FisheyePair { front, back, fov_deg, rotation })
    }

    /// Back lens facing +Z, i.e. rotated half a turn about +Y.
    pub fn back_to_back_rotation() -> DQuat {
        DQuat::from_rotation_y(PI)
    }

    pub fn lens(&self) -> FisheyeLens {
        FisheyeLens { size: self.front.width(), fov: self.fov_deg.to_radians() }
    }

    pub fn front(&self) -> &Image {
        &self.front
    }

    pub fn back(&self) -> &Image {
        &self.back
    }

    /// Weight of the front lens for camera-frame direction `d`: 1 outside
    /// the back lens' view, 0 outside the front lens' view, and linear
    /// feathering across the overlap band.
    pub fn front_weight(&self, d: DVec3) -> Result<f64, EnvError> {
        let half = 0.5 * self.fov_deg.to_radians();
        let m_front = half - FisheyeLens::off_axis(d);
        let m_back = half - FisheyeLens::off_axis(self.rotation.inverse() * d);
        match (m_front >= 0.0, m_back >= 0.0) {
            (false, false) => Err(EnvError::Uncovered(d)),
            (true, false) => Ok(1.0),
            (false, true) => Ok(0.0),
            (true, true) => Ok(if m_front + m_back > 0.0 { m_front / (m_front + m_back) } else { 0.5 }),
        }
    }
}

fn sample_bilinear_clamped(img: &Image, px: f64, py: f64) -> Rgb {
    let (w, h) = (img.width() as f64, img.height() as f64);
    let x = (px - 0.5).clamp(0.0, w - 1.0);
    let y = (py - 0.5).clamp(0.0, h - 1.0);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as usize, y0 as usize);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let top = img.get(x0, y0).lerp(img.get(x1, y0), fx);
    let bottom = img.get(x0, y1).lerp(img.get(x1, y1), fx);
    top.lerp(bottom, fy)
}

/// Stitch into the default 512×256 panorama.
pub fn stitch(pair: &FisheyePair) -> Result<RadianceMap, EnvError> {
    stitch_with(pair, DEFAULT_PANO_HEIGHT)
}

/// Stitch into a `2·height × height` LDR panorama in the camera frame.
pub fn stitch_with(pair: &FisheyePair, height: usize) -> Result<RadianceMap, EnvError> {
    let lens = pair.lens();
    let width = 2 * height;
    let inv = pair.rotation.inverse();
    let mut img = Image::new(width, height);
    for j in 0..height {
        for i in 0..width {
            let d = super::texel_direction(width, height, i, j);
            let wf = pair.front_weight(d)?;
            let mut c = Rgb::ZERO;
            if wf > 0.0 {
                let (px, py) = lens.project(d);
                c += wf * sample_bilinear_clamped(&pair.front, px, py);
            }
            if wf < 1.0 {
                let (px, py) = lens.project(inv * d);
                c += (1.0 - wf) * sample_bilinear_clamped(&pair.back, px, py);
            }
            img.set(i, j, c.clamp(Rgb::ZERO, Rgb::ONE));
        }
    }
    RadianceMap::new(img, MapKind::Ldr, MapFrame::Camera)
}

/// Render what a fisheye pair would capture of a camera-frame panorama.
/// Pixels beyond θ = π are black.
pub fn synthesize_fisheye(pano: &RadianceMap, size: usize, fov_deg: f64, rotation: DQuat) -> Result<FisheyePair, EnvError> {
    let lens = FisheyeLens { size, fov: fov_deg.to_radians() };
    let render = |rot: DQuat| {
        Image::from_fn(size, size, |x, y| {
            lens.unproject(x as f64 + 0.5, y as f64 + 0.5)
                .map_or(Rgb::ZERO, |d| pano.lookup(rot * d, Sampling::Bilinear))
        })
    };
    FisheyePair::new(render(DQuat::IDENTITY), render(rotation), fov_deg, rotation)
}
