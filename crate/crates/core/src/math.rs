//! Small numeric helpers shared across modules.

use glam::{DQuat, DVec3};
use thiserror::Error;

/// Linear RGB triple. Components are unbounded unless a type says otherwise.
pub type Rgb = DVec3;

/// Rec. 709 luminance of a linear RGB value.
#[inline]
pub fn luminance(c: Rgb) -> f64 {
    0.2126 * c.x + 0.7152 * c.y + 0.0722 * c.z
}

#[inline]
pub fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Unit quaternions within this distance of norm 1 are renormalised
/// silently; anything further off is rejected.
pub const QUAT_NORM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
#[error("quaternion norm {norm} deviates from 1 by more than {QUAT_NORM_TOLERANCE}")]
pub struct NonUnitQuaternion {
    pub norm: f64,
}

/// Normalise a quaternion that is expected to be unit length.
pub fn checked_unit_quat(q: DQuat) -> Result<DQuat, NonUnitQuaternion> {
    let norm = q.length();
    if !norm.is_finite() || (norm - 1.0).abs() > QUAT_NORM_TOLERANCE {
        return Err(NonUnitQuaternion { norm });
    }
    if (norm - 1.0).abs() > 1e-12 {
        log::warn!("renormalising quaternion with norm {norm}");
    }
    Ok(q / norm)
}

/// Axis-aligned box used to clip rays against the volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: DVec3,
    pub max: DVec3,
}

impl Aabb {
    /// Parametric overlap `[t0, t1]` of `origin + t·dir` with the box,
    /// restricted to `t >= 0`. `None` when the ray misses.
    pub fn intersect(&self, origin: DVec3, dir: DVec3) -> Option<(f64, f64)> {
        let inv = dir.recip();
        let a = (self.min - origin) * inv;
        let b = (self.max - origin) * inv;
        let lo = a.min(b);
        let hi = a.max(b);
        // NaN arises for a zero direction component with the origin on a slab
        // face; treat those axes as unconstrained.
        let t0 = [lo.x, lo.y, lo.z, 0.0]
            .into_iter()
            .filter(|v| !v.is_nan())
            .fold(f64::NEG_INFINITY, f64::max);
        let t1 = [hi.x, hi.y, hi.z]
            .into_iter()
            .filter(|v| !v.is_nan())
            .fold(f64::INFINITY, f64::min);
        (t1 > t0).then_some((t0, t1))
    }

    pub fn contains(&self, p: DVec3) -> bool {
        p.cmpge(self.min).all() && p.cmple(self.max).all()
    }

    pub fn center(&self) -> DVec3 {
        0.5 * (self.min + self.max)
    }
}

/// Orthonormal frame around `n` (Duff et al. branchless construction).
pub fn orthonormal_basis(n: DVec3) -> (DVec3, DVec3) {
    let sign = 1f64.copysign(n.z);
    let a = -1.0 / (sign + n.z);
    let b = n.x * n.y * a;
    (
        DVec3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x),
        DVec3::new(b, sign + n.y * n.y * a, -n.y),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_intersection_from_outside_and_inside() {
        let b = Aabb { min: DVec3::ZERO, max: DVec3::ONE };
        let (t0, t1) = b.intersect(DVec3::new(-1.0, 0.5, 0.5), DVec3::X).unwrap();
        assert!((t0 - 1.0).abs() < 1e-12 && (t1 - 2.0).abs() < 1e-12);
        let (t0, t1) = b.intersect(DVec3::splat(0.5), DVec3::Y).unwrap();
        assert_eq!(t0, 0.0);
        assert!((t1 - 0.5).abs() < 1e-12);
        assert!(b.intersect(DVec3::new(-1.0, 2.0, 0.5), DVec3::X).is_none());
        assert!(b.intersect(DVec3::new(2.0, 0.5, 0.5), DVec3::X).is_none());
    }

    #[test]
    fn quaternion_tolerance() {
        let q = DQuat::from_xyzw(0.0, 0.0, 0.0, 1.0005);
        assert!((checked_unit_quat(q).unwrap().length() - 1.0).abs() < 1e-12);
        assert!(checked_unit_quat(DQuat::from_xyzw(0.0, 0.0, 0.0, 1.01)).is_err());
    }

    #[test]
    fn basis_is_orthonormal() {
        for n in [DVec3::X, -DVec3::Z, DVec3::new(0.3, -0.4, 0.5).normalize()] {
            let (t, b) = orthonormal_basis(n);
            assert!(t.dot(n).abs() < 1e-12 && b.dot(n).abs() < 1e-12 && t.dot(b).abs() < 1e-12);
            assert!((t.length() - 1.0).abs() < 1e-12 && (b.length() - 1.0).abs() < 1e-12);
        }
    }
}
