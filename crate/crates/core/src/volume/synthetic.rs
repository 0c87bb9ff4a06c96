//! Procedural volumes used by fixtures, presets and tests.

use super::VolumeGrid;
use glam::DVec3;

/// Smooth ball of density centred in a unit cube at the world origin.
///
/// The density is 1 in the core and falls off smoothly to 0 over `softness`
/// (as a fraction of the cube side) around `radius`.
pub fn soft_sphere(n: usize, radius: f64, softness: f64) -> VolumeGrid {
    let spacing = 1.0 / (n - 1) as f64;
    VolumeGrid::from_fn([n, n, n], DVec3::splat(spacing), DVec3::splat(-0.5), |p| {
        let d = p.length();
        let t = ((radius + 0.5 * softness - d) / softness).clamp(0.0, 1.0);
        t * t * (3.0 - 2.0 * t)
    })
    .expect("valid synthetic grid")
}

/// Two overlapping lobes with an internal cavity; more structure than a
/// sphere for visual checks and denoiser fixtures.
pub fn lobes(n: usize) -> VolumeGrid {
    let spacing = 1.0 / (n - 1) as f64;
    VolumeGrid::from_fn([n, n, n], DVec3::splat(spacing), DVec3::splat(-0.5), |p| {
        let smooth = |d: f64, r: f64, w: f64| {
            let t = ((r + 0.5 * w - d) / w).clamp(0.0, 1.0);
            t * t * (3.0 - 2.0 * t)
        };
        let a = smooth((p - DVec3::new(-0.12, 0.05, 0.0)).length(), 0.26, 0.12);
        let b = smooth((p - DVec3::new(0.15, -0.08, 0.05)).length(), 0.2, 0.12);
        let cavity = smooth((p - DVec3::new(-0.12, 0.05, 0.0)).length(), 0.1, 0.08);
        (a.max(b) - 0.6 * cavity).clamp(0.0, 1.0)
    })
    .expect("valid synthetic grid")
}

/// Everything zero.
pub fn empty(n: usize) -> VolumeGrid {
    let spacing = 1.0 / (n - 1) as f64;
    VolumeGrid::from_fn([n, n, n], DVec3::splat(spacing), DVec3::splat(-0.5), |_| 0.0).expect("valid synthetic grid")
}

/// Uniform scalar everywhere inside a box of side `side` centred at the origin.
pub fn constant(n: usize, side: f64, value: f64) -> VolumeGrid {
    let spacing = side / (n - 1) as f64;
    VolumeGrid::from_fn([n, n, n], DVec3::splat(spacing), DVec3::splat(-0.5 * side), |_| value)
        .expect("valid synthetic grid")
}
