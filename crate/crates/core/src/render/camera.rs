use crate::math::checked_unit_quat;
use crate::math::NonUnitQuaternion;
use glam::{DQuat, DVec3};
use serde::{Deserialize, Serialize};

/// Pinhole camera. Pixel `(i, j)` covers `[i, i+1) × [j, j+1)` with row 0 at
/// the top; depth is measured along `forward`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub position: DVec3,
    forward: DVec3,
    up: DVec3,
    right: DVec3,
    pub vfov: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eye {
    Left = 0,
    Right = 1,
}

impl Eye {
    pub const BOTH: [Eye; 2] = [Eye::Left, Eye::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn partner(self) -> Eye {
        match self {
            Eye::Left => Eye::Right,
            Eye::Right => Eye::Left,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Eye::Left => 'L',
            Eye::Right => 'R',
        }
    }
}

impl Camera {
    /// `up` is re-orthogonalised against `forward`.
    ///
    /// # Panics
    /// If `forward` is zero or parallel to `up`, `vfov ∉ (0, π)`, the image
    /// is empty, or `near <= 0`.
    pub fn new(position: DVec3, forward: DVec3, up: DVec3, vfov: f64, width: usize, height: usize, near: f64) -> Self {
        assert!(vfov > 0.0 && vfov < std::f64::consts::PI, "vfov must lie in (0, π)");
        assert!(width > 0 && height > 0, "empty image");
        assert!(near > 0.0, "near plane must be positive");
        let forward = forward.normalize();
        let right = forward.cross(up).normalize();
        assert!(forward.is_finite() && right.is_finite(), "degenerate camera basis");
        let up = right.cross(forward);
        Camera { position, forward, up, right, vfov, width, height, near }
    }

    /// Camera looking down the local −Z axis of `orientation`.
    pub fn from_pose(position: DVec3, orientation: DQuat, vfov: f64, width: usize, height: usize, near: f64) -> Self {
        Self::new(position, orientation * DVec3::NEG_Z, orientation * DVec3::Y, vfov, width, height, near)
    }

    pub fn forward(&self) -> DVec3 {
        self.forward
    }

    pub fn up(&self) -> DVec3 {
        self.up
    }

    pub fn right(&self) -> DVec3 {
        self.right
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        self.height as f64 / (2.0 * (self.vfov / 2.0).tan())
    }

    /// Unnormalised ray direction through continuous pixel coordinates,
    /// scaled so that its `forward` component is 1.
    fn view_vector(&self, px: f64, py: f64) -> DVec3 {
        let f = self.focal_px();
        let u = (px - self.width as f64 / 2.0) / f;
        let v = (self.height as f64 / 2.0 - py) / f;
        self.forward + u * self.right + v * self.up
    }

    /// Unit direction through the centre of pixel `(i, j)`.
    pub fn pixel_ray(&self, i: usize, j: usize) -> DVec3 {
        self.view_vector(i as f64 + 0.5, j as f64 + 0.5).normalize()
    }

    /// Continuous pixel coordinates and depth of `x`, or `None` when `x` is
    /// in front of the near plane or outside the viewport.
    pub fn project(&self, x: DVec3) -> Option<(f64, f64, f64)> {
        let rel = x - self.position;
        let z = rel.dot(self.forward);
        if !(z >= self.near) {
            return None;
        }
        let f = self.focal_px();
        let px = self.width as f64 / 2.0 + f * rel.dot(self.right) / z;
        let py = self.height as f64 / 2.0 - f * rel.dot(self.up) / z;
        let inside = (0.0..self.width as f64).contains(&px) && (0.0..self.height as f64).contains(&py);
        inside.then_some((px, py, z))
    }

    /// World point at depth `z` behind continuous pixel coordinates.
    pub fn unproject(&self, px: f64, py: f64, z: f64) -> DVec3 {
        self.position + z * self.view_vector(px, py)
    }

    /// Depth of the point at parameter `t` along the unit direction `dir`.
    pub fn depth_along(&self, dir: DVec3, t: f64) -> f64 {
        t * dir.dot(self.forward)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CameraFileError {
    #[error("malformed camera file: {0}")]
    Syntax(String),
    #[error("invalid camera: {0}")]
    Invalid(&'static str),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraFile {
    position: [f64; 3],
    forward: [f64; 3],
    up: [f64; 3],
    right: [f64; 3],
    vfov: f64,
    width: usize,
    height: usize,
    near: f64,
}

/// Largest image side accepted from a camera file.
const MAX_CAMERA_SIDE: usize = 1 << 15;

impl Camera {
    /// TOML form that restores the camera bit-exactly.
    pub fn to_toml(&self) -> String {
        let f = CameraFile {
            position: self.position.to_array(),
            forward: self.forward.to_array(),
            up: self.up.to_array(),
            right: self.right.to_array(),
            vfov: self.vfov,
            width: self.width,
            height: self.height,
            near: self.near,
        };
        toml::to_string(&f).expect("camera serialises")
    }

    /// Parse [`to_toml`](Self::to_toml) output. The basis must be
    /// orthonormal and right-handed within 1e-9.
    pub fn parse_toml(text: &str) -> Result<Camera, CameraFileError> {
        let f: CameraFile = toml::from_str(text).map_err(|e| CameraFileError::Syntax(e.message().to_string()))?;
        let [position, forward, up, right] = [f.position, f.forward, f.up, f.right].map(DVec3::from_array);
        if !(position.is_finite() && forward.is_finite() && up.is_finite() && right.is_finite()) {
            return Err(CameraFileError::Invalid("non-finite vector"));
        }
        let tol = 1e-9;
        let unit = |v: DVec3| (v.length() - 1.0).abs() < tol;
        if !(unit(forward) && unit(up) && unit(right)) {
            return Err(CameraFileError::Invalid("basis vectors must be unit length"));
        }
        if forward.dot(up).abs() > tol || forward.dot(right).abs() > tol || up.dot(right).abs() > tol {
            return Err(CameraFileError::Invalid("basis must be orthogonal"));
        }
        if (forward.cross(up) - right).length() > tol {
            return Err(CameraFileError::Invalid("basis must be right-handed"));
        }
        if !(f.vfov > 0.0 && f.vfov < std::f64::consts::PI) {
            return Err(CameraFileError::Invalid("vfov must lie in (0, π)"));
        }
        if f.width == 0 || f.height == 0 || f.width > MAX_CAMERA_SIDE || f.height > MAX_CAMERA_SIDE {
            return Err(CameraFileError::Invalid("image size out of range"));
        }
        if !(f.near > 0.0 && f.near.is_finite()) {
            return Err(CameraFileError::Invalid("near plane must be positive"));
        }
        Ok(Camera { position, forward, up, right, vfov: f.vfov, width: f.width, height: f.height, near: f.near })
    }
}

/// Head pose plus the optics shared by both eyes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoRig {
    pub position: DVec3,
    pub orientation: DQuat,
    pub ipd: f64,
    pub vfov: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
}

impl StereoRig {
    pub const DEFAULT_IPD: f64 = 0.064;
    pub const DEFAULT_VFOV_DEG: f64 = 45.0;
    pub const DEFAULT_NEAR: f64 = 0.01;

    pub fn new(position: DVec3, orientation: DQuat, width: usize, height: usize) -> Result<Self, NonUnitQuaternion> {
        Ok(StereoRig {
            position,
            orientation: checked_unit_quat(orientation)?,
            ipd: Self::DEFAULT_IPD,
            vfov: Self::DEFAULT_VFOV_DEG.to_radians(),
            width,
            height,
            near: Self::DEFAULT_NEAR,
        })
    }

    /// Rig at `position` looking at `target` with +Y up.
    pub fn looking_at(position: DVec3, target: DVec3, width: usize, height: usize) -> Self {
        let orientation = look_rotation(target - position, DVec3::Y);
        Self::new(position, orientation, width, height).expect("look rotation is unit")
    }

    pub fn with_ipd(mut self, ipd: f64) -> Self {
        self.ipd = ipd;
        self
    }

    pub fn with_vfov(mut self, vfov: f64) -> Self {
        self.vfov = vfov;
        self
    }

    pub fn right(&self) -> DVec3 {
        self.orientation * DVec3::X
    }

    /// Parallel-axis eye camera offset by ∓ipd/2 along the rig's right vector.
    pub fn eye(&self, eye: Eye) -> Camera {
        let sign = match eye {
            Eye::Left => -0.5,
            Eye::Right => 0.5,
        };
        let position = self.position + sign * self.ipd * self.right();
        Camera::from_pose(position, self.orientation, self.vfov, self.width, self.height, self.near)
    }
}

/// Rotation taking local −Z to `forward` and local +Y towards `up`.
pub fn look_rotation(forward: DVec3, up: DVec3) -> DQuat {
    let f = forward.normalize();
    let r = f.cross(up).normalize();
    let u = r.cross(f);
    DQuat::from_mat3(&glam::DMat3::from_cols(r, u, -f)).normalize()
}
