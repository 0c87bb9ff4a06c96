//! Projection of first-scatter points into the partner eye and the previous
//! frame, with disocclusion tests.
//!
//! For a pixel `k` of eye `E` at frame `t` with first-scatter point `x(k)`:
//!
//! * the stereo target is `π_E'^t(x(k))` in the partner eye `E'`,
//! * the temporal target is `π_E^{t−1}(x(k))` in the same eye one frame back,
//! * the temporal partner target is `π_E'^{t−1}(x')` where `x'` is the
//!   history first-scatter point found at the temporal target.

use crate::denoise::FrameHistory;
use crate::imageio::Image;
use crate::math::Rgb;
use crate::render::{Camera, Eye, GBuffer, StereoFrame};
use glam::DVec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Disocclusion thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidityParams {
    /// Maximum relative depth mismatch.
    pub depth_tolerance: f64,
    /// Maximum per-channel albedo mismatch.
    pub albedo_tolerance: f64,
}

impl Default for ValidityParams {
    fn default() -> Self {
        ValidityParams { depth_tolerance: 0.05, albedo_tolerance: 0.2 }
    }
}

/// A valid reprojection target with its bilinear taps over covered pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    /// Continuous pixel coordinates in the target image.
    pub x: f64,
    pub y: f64,
    /// Depth of the reprojected point in the target camera.
    pub expected_depth: f64,
    taps: [(u32, f64); 4],
    len: u8,
    pub albedo: Rgb,
    pub gradient: DVec3,
    pub depth: f64,
    pub position: DVec3,
}

impl Target {
    /// Weighted average of `img` over the covered taps.
    pub fn resample(&self, img: &Image) -> Rgb {
        let px = img.pixels();
        self.taps[..self.len as usize].iter().map(|&(k, w)| px[k as usize] * w).sum()
    }

    pub fn taps(&self) -> &[(u32, f64)] {
        &self.taps[..self.len as usize]
    }
}

/// Reprojection targets of one source pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReprojectionSet {
    pub eye: Eye,
    pub pixel: (usize, usize),
    pub stereo: Option<Target>,
    pub temporal: Option<Target>,
    pub temporal_partner: Option<Target>,
}

/// Project `x` into `camera` and validate against `gb`; `albedo` is the
/// source pixel's albedo.
pub fn project_target(camera: &Camera, gb: &GBuffer, x: DVec3, albedo: Rgb, params: &ValidityParams) -> Option<Target> {
    let (px, py, z) = camera.project(x)?;
    let (w, h) = (gb.width(), gb.height());
    let nearest = gb.get((px.floor() as usize).min(w - 1), (py.floor() as usize).min(h - 1));
    if !nearest.is_covered()
        || !((nearest.depth - z).abs() / z < params.depth_tolerance)
        || !((nearest.albedo - albedo).abs().max_element() < params.albedo_tolerance)
    {
        return None;
    }
    let mut taps = [(0u32, 0.0f64); 4];
    let mut len = 0;
    let (fx, fy) = (px - 0.5, py - 0.5);
    let (x0, y0) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - x0, fy - y0);
    let mut total = 0.0;
    for (dx, dy, wt) in [(0, 0, (1.0 - tx) * (1.0 - ty)), (1, 0, tx * (1.0 - ty)), (0, 1, (1.0 - tx) * ty), (1, 1, tx * ty)] {
        let (xi, yi) = (x0 as i64 + dx, y0 as i64 + dy);
        if xi < 0 || yi < 0 || xi >= w as i64 || yi >= h as i64 || wt <= 0.0 {
            continue;
        }
        if !gb.get(xi as usize, yi as usize).is_covered() {
            continue;
        }
        taps[len] = ((yi as usize * w + xi as usize) as u32, wt);
        len += 1;
        total += wt;
    }
    if len == 0 {
        // The nearest pixel is covered, so it always qualifies.
        let k = (py.floor() as usize).min(h - 1) * w + (px.floor() as usize).min(w - 1);
        taps[0] = (k as u32, 1.0);
        len = 1;
        total = 1.0;
    }
    for t in &mut taps[..len] {
        t.1 /= total;
    }
    let samples = gb.samples();
    let mut albedo_r = Rgb::ZERO;
    let mut gradient = DVec3::ZERO;
    let mut depth = 0.0;
    let mut position = DVec3::ZERO;
    for &(k, wt) in &taps[..len] {
        let s = &samples[k as usize];
        albedo_r += wt * s.albedo;
        gradient += wt * s.gradient;
        depth += wt * s.depth;
        position += wt * s.position;
    }
    Some(Target { x: px, y: py, expected_depth: z, taps, len: len as u8, albedo: albedo_r, gradient, depth, position })
}

/// Targets for pixel `(i, j)` of `eye`.
pub fn build_reprojection(
    eye: Eye,
    i: usize,
    j: usize,
    current: &StereoFrame,
    history: Option<&FrameHistory>,
    params: &ValidityParams,
) -> ReprojectionSet {
    let own = current.eye(eye);
    let src = own.gbuffer.get(i, j);
    let mut set = ReprojectionSet { eye, pixel: (i, j), stereo: None, temporal: None, temporal_partner: None };
    if !src.is_covered() {
        return set;
    }
    let partner = current.eye(eye.partner());
    set.stereo = project_target(&partner.camera, &partner.gbuffer, src.position, src.albedo, params);
    if let Some(hist) = history {
        let prev_gb = &hist.gbuffers[eye.index()];
        set.temporal = project_target(&hist.cameras[eye.index()], prev_gb, src.position, src.albedo, params);
        if let Some(t) = &set.temporal {
            let w = prev_gb.width();
            let x_prev = prev_gb.get((t.x.floor() as usize).min(w - 1), (t.y.floor() as usize).min(prev_gb.height() - 1));
            let p = eye.partner().index();
            set.temporal_partner = project_target(&hist.cameras[p], &hist.gbuffers[p], x_prev.position, src.albedo, params);
        }
    }
    set
}

/// Reprojection sets for every pixel of both eyes, row-major.
pub fn build_all(current: &StereoFrame, history: Option<&FrameHistory>, params: &ValidityParams) -> [Vec<ReprojectionSet>; 2] {
    Eye::BOTH.map(|eye| {
        let gb = &current.eye(eye).gbuffer;
        let w = gb.width();
        crate::parallel::install(|| {
            (0..w * gb.height())
                .into_par_iter()
                .map(|k| build_reprojection(eye, k % w, k / w, current, history, params))
                .collect()
        })
    })
}

/// Debug image: red marks a valid stereo target, green a valid temporal
/// target, blue a valid temporal partner target.
pub fn validity_mask(width: usize, height: usize, sets: &[ReprojectionSet]) -> Image {
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    Image::from_vec(
        width,
        height,
        sets.iter()
            .map(|s| Rgb::new(flag(s.stereo.is_some()), flag(s.temporal.is_some()), flag(s.temporal_partner.is_some())))
            .collect(),
    )
}
