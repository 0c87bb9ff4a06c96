use super::{EnvError, MapFrame, RadianceMap, Sampling};
use crate::imageio::Image;
use glam::{DQuat, DVec3};

/// Radius of the proxy sphere the environment is projected onto when the
/// panorama is re-centred (room scale, world units).
pub const DEFAULT_SPHERE_RADIUS: f64 = 3.0;

fn require_frame(pano: &RadianceMap, expected: MapFrame) -> Result<(), EnvError> {
    if pano.frame() != expected {
        return Err(EnvError::WrongFrame { expected, actual: pano.frame() });
    }
    Ok(())
}

/// Rotate a camera-frame panorama into world orientation. `pose` maps
/// camera directions to world directions; each world direction `d` reads
/// the input at `pose⁻¹·d`.
pub fn calibrate(pano: &RadianceMap, pose: DQuat, sampling: Sampling) -> Result<RadianceMap, EnvError> {
    require_frame(pano, MapFrame::Camera)?;
    let inv = crate::math::checked_unit_quat(pose)?.inverse();
    let (w, h) = (pano.width(), pano.height());
    let img = Image::from_fn(w, h, |i, j| pano.lookup(inv * pano.texel_direction(i, j), sampling));
    Ok(pano.with_image(img, MapFrame::World))
}

/// Direction, as seen from the original viewpoint, of the point on the
/// environment sphere hit from `offset` along `d`.
pub fn warp_direction(offset: DVec3, radius: f64, d: DVec3) -> DVec3 {
    let d = d.normalize();
    let b = offset.dot(d);
    let c = offset.length_squared() - radius * radius;
    let t = -b + (b * b - c).sqrt();
    (offset + t * d).normalize()
}

/// Re-centre a world panorama at `offset` from the capture point, treating
/// the environment as a sphere of `radius` around the capture point.
pub fn warp_to_center(pano: &RadianceMap, offset: DVec3, radius: f64, sampling: Sampling) -> Result<RadianceMap, EnvError> {
    require_frame(pano, MapFrame::World)?;
    let len = offset.length();
    if !(len < radius) || !radius.is_finite() {
        return Err(EnvError::OffsetOutsideSphere { offset: len, radius });
    }
    if offset == DVec3::ZERO {
        return Ok(pano.clone().relabel(MapFrame::Warped));
    }
    let (w, h) = (pano.width(), pano.height());
    let img = Image::from_fn(w, h, |i, j| {
        pano.lookup(warp_direction(offset, radius, pano.texel_direction(i, j)), sampling)
    });
    Ok(pano.with_image(img, MapFrame::Warped))
}
