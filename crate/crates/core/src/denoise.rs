//! Two-step stereo spatio-temporal denoiser.
//!
//! `D1` filters each eye spatially, blends in the partner eye's spatial
//! result at the stereo target, then mixes in the previous frame's final
//! output with a weight gated by the illumination difference `T`. `D2`
//! blends the two `D1` results across eyes by albedo similarity.
//!
//! Uncovered pixels show the noise-free environment and pass through.

use crate::envlight::{RadianceMap, T_EPSILON};
use crate::imageio::Image;
use crate::math::{sigmoid, Rgb};
use crate::render::{Camera, Eye, GBuffer, GSample, StereoFrame, MIN_GRADIENT};
use crate::reproject::{build_all, ReprojectionSet, Target, ValidityParams};
use glam::DVec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BilateralParams {
    /// Spatial half-width; the window is `(2r+1)²`.
    pub radius: usize,
    pub sigma_albedo: f64,
    pub sigma_gradient: f64,
    pub sigma_depth: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Scales the history weight; 1 leaves it as computed.
    pub temporal_multiplier: f64,
}

impl Default for BilateralParams {
    fn default() -> Self {
        BilateralParams {
            radius: 2,
            sigma_albedo: 0.1,
            sigma_gradient: 0.5,
            sigma_depth: 0.05,
            alpha: 0.5,
            beta: 2.0,
            temporal_multiplier: 1.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DenoiseError {
    #[error("bilateral bandwidths must be positive and finite")]
    Bandwidth,
    #[error("blend factors must be finite and the temporal multiplier non-negative")]
    Factors,
    #[error("illumination difference {0} outside [0, 1 - {T_EPSILON}]")]
    IlluminationRange(f64),
    #[error("history and frame sizes differ")]
    HistorySize,
}

impl BilateralParams {
    pub fn validate(&self) -> Result<(), DenoiseError> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.sigma_albedo) && pos(self.sigma_gradient) && pos(self.sigma_depth)) {
            return Err(DenoiseError::Bandwidth);
        }
        if !(self.alpha.is_finite() && self.beta.is_finite() && self.temporal_multiplier >= 0.0 && self.temporal_multiplier.is_finite()) {
            return Err(DenoiseError::Factors);
        }
        Ok(())
    }
}

/// Unit normal from a density gradient, zero when the gradient vanishes.
#[inline]
fn unit_normal(g: DVec3) -> DVec3 {
    let len = g.length();
    if len > MIN_GRADIENT {
        g / len
    } else {
        DVec3::ZERO
    }
}

/// Edge-stopping weight between two G-buffer samples, in `[0, 1]`.
/// Gradients are compared as unit normals; depth relative to `a`.
pub fn bilateral_weight(a: &GSample, b: &GSample, p: &BilateralParams) -> f64 {
    if !a.is_covered() || !b.is_covered() {
        return 0.0;
    }
    feature_weight(&Feature::of(a), &Feature::of(b), p)
}

#[derive(Debug, Clone, Copy)]
struct Feature {
    albedo: Rgb,
    normal: DVec3,
    depth: f64,
}

impl Feature {
    fn of(s: &GSample) -> Self {
        Feature { albedo: s.albedo, normal: unit_normal(s.gradient), depth: s.depth }
    }

    fn of_target(t: &Target) -> Self {
        Feature { albedo: t.albedo, normal: unit_normal(t.gradient), depth: t.depth }
    }
}

#[inline]
fn feature_weight(a: &Feature, b: &Feature, p: &BilateralParams) -> f64 {
    let da = (a.albedo - b.albedo).length_squared() / (2.0 * p.sigma_albedo * p.sigma_albedo);
    let dg = (a.normal - b.normal).length_squared() / (2.0 * p.sigma_gradient * p.sigma_gradient);
    let rz = (a.depth - b.depth) / a.depth;
    let dz = rz * rz / (2.0 * p.sigma_depth * p.sigma_depth);
    (-(da + dg + dz)).exp()
}

/// History weight `δ(1/(T−1))·ζ` with the logistic `δ`.
pub fn temporal_weight(t: f64, zeta: f64) -> Result<f64, DenoiseError> {
    if !(0.0..=1.0 - T_EPSILON).contains(&t) {
        return Err(DenoiseError::IlluminationRange(t));
    }
    Ok(sigmoid(1.0 / (t - 1.0)) * zeta.clamp(0.0, 1.0))
}

/// Inter-screen blend factor `α(β − e^(−d))`, clamped to `[0, 1]`.
pub fn lambda(albedo_distance: f64, alpha: f64, beta: f64) -> f64 {
    (alpha * (beta - (-albedo_distance).exp())).clamp(0.0, 1.0)
}

/// State carried from frame `t−1` to frame `t`.
#[derive(Debug, Clone)]
pub struct FrameHistory {
    pub frame: u64,
    /// Final (`D2`) output per eye.
    pub denoised: [Image; 2],
    pub gbuffers: [GBuffer; 2],
    pub cameras: [Camera; 2],
    /// HDR map the frame was lit with, for the next illumination difference.
    pub illumination: Option<RadianceMap>,
}

impl FrameHistory {
    pub fn from_frame(frame: &StereoFrame, denoised: [Image; 2], illumination: Option<RadianceMap>) -> Self {
        FrameHistory {
            frame: frame.frame,
            denoised,
            gbuffers: [frame.eyes[0].gbuffer.clone(), frame.eyes[1].gbuffer.clone()],
            cameras: [frame.eyes[0].camera, frame.eyes[1].camera],
            illumination,
        }
    }
}

/// Bilateral average over the `(2r+1)²` window of each covered pixel.
pub fn spatial_pass(radiance: &Image, gb: &GBuffer, p: &BilateralParams) -> Image {
    let (w, h) = (gb.width(), gb.height());
    let features: Vec<Feature> = gb.samples().iter().map(Feature::of).collect();
    let r = p.radius as i64;
    let out: Vec<Rgb> = crate::parallel::install(|| {
        (0..w * h)
            .into_par_iter()
            .map(|k| {
                if !gb.samples()[k].is_covered() {
                    return radiance.pixels()[k];
                }
                let (x, y) = ((k % w) as i64, (k / w) as i64);
                let fk = &features[k];
                let mut sum = Rgb::ZERO;
                let mut wsum = 0.0;
                for yy in (y - r).max(0)..=(y + r).min(h as i64 - 1) {
                    for xx in (x - r).max(0)..=(x + r).min(w as i64 - 1) {
                        let q = yy as usize * w + xx as usize;
                        if !gb.samples()[q].is_covered() {
                            continue;
                        }
                        let wt = if q == k { 1.0 } else { feature_weight(fk, &features[q], p) };
                        sum += wt * radiance.pixels()[q];
                        wsum += wt;
                    }
                }
                sum / wsum
            })
            .collect()
    });
    Image::from_vec(w, h, out)
}

/// Intermediate and final results of one denoised frame.
#[derive(Debug, Clone)]
pub struct D1Output {
    pub spatial: [Image; 2],
    /// After the cross-screen blend.
    pub stereo: [Image; 2],
    /// `v(·, 1)`.
    pub output: [Image; 2],
}

/// First denoising step for both eyes.
pub fn denoise_d1(
    current: &StereoFrame,
    history: Option<&FrameHistory>,
    reproj: &[Vec<ReprojectionSet>; 2],
    illumination: f64,
    p: &BilateralParams,
) -> Result<D1Output, DenoiseError> {
    p.validate()?;
    // Validates T even when no history exists.
    temporal_weight(illumination, 1.0)?;
    if let Some(h) = history {
        for e in 0..2 {
            let (a, b) = (&h.denoised[e], &current.eyes[e].radiance);
            if !a.same_size(b) || h.gbuffers[e].width() != b.width() || h.gbuffers[e].height() != b.height() {
                return Err(DenoiseError::HistorySize);
            }
        }
    }
    let spatial = Eye::BOTH.map(|e| spatial_pass(&current.eye(e).radiance, &current.eye(e).gbuffer, p));
    let mut stereo = spatial.clone();
    let mut output = spatial.clone();
    for eye in Eye::BOTH {
        let e = eye.index();
        let gb = &current.eyes[e].gbuffer;
        let partner_spatial = &spatial[eye.partner().index()];
        let (w, h) = (gb.width(), gb.height());
        let results: Vec<(Rgb, Rgb)> = crate::parallel::install(|| {
            (0..w * h)
                .into_par_iter()
                .map(|k| {
                    let s = spatial[e].pixels()[k];
                    let g = &gb.samples()[k];
                    if !g.is_covered() {
                        return (s, s);
                    }
                    let fk = Feature::of(g);
                    let set = &reproj[e][k];
                    let tilde = match &set.stereo {
                        Some(t) => {
                            let wt = feature_weight(&fk, &Feature::of_target(t), p);
                            (s + wt * t.resample(partner_spatial)) / (1.0 + wt)
                        }
                        None => s,
                    };
                    let v1 = match (history, &set.temporal) {
                        (Some(hist), Some(t)) => {
                            let zeta = feature_weight(&fk, &Feature::of_target(t), p);
                            let wv = p.temporal_multiplier * temporal_weight(illumination, zeta).expect("validated");
                            (tilde + wv * t.resample(&hist.denoised[e])) / (1.0 + wv)
                        }
                        _ => tilde,
                    };
                    (tilde, v1)
                })
                .collect()
        });
        stereo[e] = Image::from_vec(w, h, results.iter().map(|r| r.0).collect());
        output[e] = Image::from_vec(w, h, results.iter().map(|r| r.1).collect());
    }
    Ok(D1Output { spatial, stereo, output })
}

/// Second denoising step: albedo-weighted blend across eyes.
pub fn denoise_d2(
    v1: &[Image; 2],
    gbuffers: [&GBuffer; 2],
    reproj: &[Vec<ReprojectionSet>; 2],
    p: &BilateralParams,
) -> [Image; 2] {
    Eye::BOTH.map(|eye| {
        let e = eye.index();
        let gb = gbuffers[e];
        let other = &v1[eye.partner().index()];
        let (w, h) = (gb.width(), gb.height());
        let out: Vec<Rgb> = crate::parallel::install(|| {
            (0..w * h)
                .into_par_iter()
                .map(|k| {
                    let own = v1[e].pixels()[k];
                    let g = &gb.samples()[k];
                    match (&reproj[e][k].stereo, g.is_covered()) {
                        (Some(t), true) => {
                            let l = lambda((g.albedo - t.albedo).length(), p.alpha, p.beta);
                            l * own + (1.0 - l) * t.resample(other)
                        }
                        _ => own,
                    }
                })
                .collect()
        });
        Image::from_vec(w, h, out)
    })
}

/// Mean `|v_E − resampled v_E'|` (per channel) over pixels with a valid
/// stereo target, averaged over both eyes. `None` when no pixel qualifies.
pub fn inter_eye_inconsistency(images: &[Image; 2], reproj: &[Vec<ReprojectionSet>; 2]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for eye in Eye::BOTH {
        let (e, o) = (eye.index(), eye.partner().index());
        for (k, set) in reproj[e].iter().enumerate() {
            if let Some(t) = &set.stereo {
                sum += (images[e].pixels()[k] - t.resample(&images[o])).abs().element_sum() / 3.0;
                n += 1;
            }
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Everything produced by denoising one frame.
#[derive(Debug, Clone)]
pub struct Denoised {
    pub reprojection: [Vec<ReprojectionSet>; 2],
    pub d1: D1Output,
    /// `v(·, 2)`.
    pub output: [Image; 2],
}

/// Reproject, then run `D1` and `D2`.
pub fn denoise_frame(
    current: &StereoFrame,
    history: Option<&FrameHistory>,
    illumination: f64,
    params: &BilateralParams,
    validity: &ValidityParams,
) -> Result<Denoised, DenoiseError> {
    let reprojection = build_all(current, history, validity);
    let d1 = denoise_d1(current, history, &reprojection, illumination, params)?;
    let output = denoise_d2(&d1.output, [&current.eyes[0].gbuffer, &current.eyes[1].gbuffer], &reprojection, params);
    Ok(Denoised { reprojection, d1, output })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envlight::{MapFrame, MapKind};
    use crate::render::{render, EnvLighting, FrameRequest, RenderMode, RenderSettings, StereoRig};
    use crate::volume::{synthetic, Scene, TransferFunction};
    use proptest::prelude::*;

    fn covered(albedo: Rgb, gradient: DVec3, depth: f64) -> GSample {
        GSample { albedo, gradient, depth, position: DVec3::ZERO, coverage: 1.0 }
    }

    #[test]
    fn bilateral_by_hand() {
        let p = BilateralParams::default();
        let a = covered(Rgb::splat(0.5), DVec3::Y, 2.0);
        assert_eq!(bilateral_weight(&a, &a, &p), 1.0);
        assert_eq!(bilateral_weight(&a, &GSample::MISS, &p), 0.0);
        let b = covered(Rgb::new(0.5 + p.sigma_albedo, 0.5, 0.5), DVec3::Y, 2.0);
        assert!((bilateral_weight(&a, &b, &p) - (-0.5f64).exp()).abs() < 1e-12);
        let c = covered(Rgb::splat(0.5), DVec3::Y, 2.0 * (1.0 + p.sigma_depth));
        assert!((bilateral_weight(&a, &c, &p) - (-0.5f64).exp()).abs() < 1e-12);
        // Gradient magnitude does not matter, only direction.
        let d = covered(Rgb::splat(0.5), DVec3::Y * 7.0, 2.0);
        assert_eq!(bilateral_weight(&a, &d, &p), 1.0);
    }

    #[test]
    fn temporal_weight_values() {
        assert!((temporal_weight(0.0, 1.0).unwrap() - 1.0 / (1.0 + std::f64::consts::E)).abs() < 1e-9);
        assert!(temporal_weight(1.0 - T_EPSILON, 1.0).unwrap() < 1e-100);
        assert!(temporal_weight(1.0, 1.0).is_err());
        assert!(temporal_weight(-0.1, 1.0).is_err());
        let ws: Vec<f64> = (0..100).map(|i| temporal_weight(i as f64 / 100.0, 0.7).unwrap()).collect();
        assert!(ws.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn lambda_values() {
        assert!((lambda(0.0, 0.5, 2.0) - 0.5).abs() < 1e-15);
        assert!((lambda(2f64.ln(), 0.5, 2.0) - 0.75).abs() < 1e-15);
        assert!((lambda(1e3, 0.5, 2.0) - 1.0).abs() < 1e-15);
        assert_eq!(lambda(0.0, 0.5, 5.0), 1.0);
        let ls: Vec<f64> = (0..100).map(|i| lambda(i as f64 * 0.05, 0.5, 2.0)).collect();
        assert!(ls.windows(2).all(|w| w[1] >= w[0]));
        assert!(ls.iter().all(|l| (0.5..=1.0).contains(l)));
    }

    #[test]
    fn params_validation() {
        assert!(BilateralParams::default().validate().is_ok());
        assert_eq!(BilateralParams { sigma_depth: 0.0, ..Default::default() }.validate(), Err(DenoiseError::Bandwidth));
        assert_eq!(BilateralParams { temporal_multiplier: -1.0, ..Default::default() }.validate(), Err(DenoiseError::Factors));
    }

    fn test_frame(t: u64, rig: &StereoRig, spp: u32) -> StereoFrame {
        let scene = Scene::new(synthetic::soft_sphere(20, 0.35, 0.15), TransferFunction::preset("soft").unwrap());
        let env = EnvLighting::new(
            RadianceMap::from_fn(16, MapKind::Hdr, MapFrame::Warped, |d| Rgb::splat(0.3 + 2.0 * d.y.max(0.0))).unwrap(),
        );
        let req = FrameRequest { frame: t, mode: RenderMode::VptEnv, spp, seed: 11 };
        render(&scene, &env, rig, &req, &RenderSettings::default()).unwrap()
    }

    fn rig() -> StereoRig {
        StereoRig::looking_at(DVec3::new(0.0, 0.1, 1.8), DVec3::ZERO, 32, 24)
    }

    fn with_radiance(f: &StereoFrame, img: [Image; 2]) -> StereoFrame {
        let mut g = f.clone();
        let [l, r] = img;
        g.eyes[0].radiance = l;
        g.eyes[1].radiance = r;
        g
    }

    #[test]
    fn constant_input_is_preserved() {
        let f = test_frame(0, &rig(), 1);
        let c = Rgb::new(0.3, 0.2, 0.1);
        let flat = with_radiance(&f, [Image::filled(32, 24, c), Image::filled(32, 24, c)]);
        let hist = FrameHistory::from_frame(&flat, [Image::filled(32, 24, c), Image::filled(32, 24, c)], None);
        let out = denoise_frame(&flat, Some(&hist), 0.2, &BilateralParams::default(), &ValidityParams::default()).unwrap();
        for img in out.output.iter().chain(out.d1.output.iter()) {
            assert!(img.pixels().iter().all(|p| (*p - c).abs().max_element() < 1e-14));
        }
    }

    #[test]
    fn invalid_targets_reduce_to_spatial_pass() {
        let f = test_frame(0, &rig(), 1);
        let reproj = [0, 1].map(|e| {
            f.eyes[e]
                .gbuffer
                .samples()
                .iter()
                .enumerate()
                .map(|(k, _)| ReprojectionSet {
                    eye: if e == 0 { Eye::Left } else { Eye::Right },
                    pixel: (k % 32, k / 32),
                    stereo: None,
                    temporal: None,
                    temporal_partner: None,
                })
                .collect::<Vec<_>>()
        });
        let hist = FrameHistory::from_frame(&f, [Image::filled(32, 24, Rgb::ONE), Image::filled(32, 24, Rgb::ONE)], None);
        let d1 = denoise_d1(&f, Some(&hist), &reproj, 0.0, &BilateralParams::default()).unwrap();
        assert_eq!(d1.output, d1.spatial);
    }

    #[test]
    fn d2_of_equal_constants_is_exact() {
        let f = test_frame(0, &rig(), 1);
        let c = Rgb::new(0.7, 0.1, 0.4);
        let reproj = build_all(&f, None, &ValidityParams::default());
        let v = [Image::filled(32, 24, c), Image::filled(32, 24, c)];
        let out = denoise_d2(&v, [&f.eyes[0].gbuffer, &f.eyes[1].gbuffer], &reproj, &BilateralParams::default());
        assert!(out.iter().all(|i| i.pixels().iter().all(|p| *p == c)));
    }

    #[test]
    fn uncovered_pixels_pass_through() {
        let f = test_frame(0, &rig(), 2);
        let out = denoise_frame(&f, None, 0.0, &BilateralParams::default(), &ValidityParams::default()).unwrap();
        for e in 0..2 {
            for (k, g) in f.eyes[e].gbuffer.samples().iter().enumerate() {
                if !g.is_covered() {
                    assert_eq!(out.output[e].pixels()[k], f.eyes[e].radiance.pixels()[k]);
                }
            }
        }
    }

    #[test]
    fn outputs_stay_within_contributing_range() {
        let f0 = test_frame(0, &rig(), 1);
        let h0 = denoise_frame(&f0, None, 0.0, &BilateralParams::default(), &ValidityParams::default()).unwrap();
        let hist = FrameHistory::from_frame(&f0, h0.output.clone(), None);
        let r1 = StereoRig { position: rig().position + DVec3::new(0.02, 0.0, 0.0), ..rig() };
        let f1 = test_frame(1, &r1, 1);
        let out = denoise_frame(&f1, Some(&hist), 0.1, &BilateralParams::default(), &ValidityParams::default()).unwrap();
        // Every output is a convex combination of current raw samples of both
        // eyes and the history, so it lies within their global range.
        let all: Vec<Rgb> = f1.eyes.iter().flat_map(|e| e.radiance.pixels().iter().copied()).chain(hist.denoised.iter().flat_map(|i| i.pixels().iter().copied())).collect();
        let lo = all.iter().fold(Rgb::splat(f64::INFINITY), |a, b| a.min(*b));
        let hi = all.iter().fold(Rgb::splat(f64::NEG_INFINITY), |a, b| a.max(*b));
        for img in &out.output {
            for p in img.pixels() {
                assert!(p.cmpge(lo - 1e-12).all() && p.cmple(hi + 1e-12).all());
            }
        }
    }

    #[test]
    fn d2_reduces_inter_eye_inconsistency() {
        let f = test_frame(0, &rig(), 2);
        let out = denoise_frame(&f, None, 0.0, &BilateralParams::default(), &ValidityParams::default()).unwrap();
        let before = inter_eye_inconsistency(&out.d1.output, &out.reprojection).unwrap();
        let after = inter_eye_inconsistency(&out.output, &out.reprojection).unwrap();
        assert!(after < before, "{after} vs {before}");
    }

    #[test]
    fn history_size_is_checked() {
        let f = test_frame(0, &rig(), 1);
        let g = test_frame(0, &StereoRig { width: 16, height: 12, ..rig() }, 1);
        let hist = FrameHistory::from_frame(&g, [g.eyes[0].radiance.clone(), g.eyes[1].radiance.clone()], None);
        let reproj = build_all(&f, None, &ValidityParams::default());
        assert_eq!(denoise_d1(&f, Some(&hist), &reproj, 0.0, &BilateralParams::default()).unwrap_err(), DenoiseError::HistorySize);
    }

    proptest! {
        #[test]
        fn bilateral_is_a_bounded_weight(a in prop::array::uniform3(0.0..1.0f64), b in prop::array::uniform3(0.0..1.0f64), za in 0.1..10.0f64, zb in 0.1..10.0f64, gx in -1.0..1.0f64) {
            let p = BilateralParams::default();
            let sa = covered(Rgb::from_array(a), DVec3::new(gx, 1.0, 0.0), za);
            let sb = covered(Rgb::from_array(b), DVec3::new(0.0, 1.0, gx), zb);
            let w = bilateral_weight(&sa, &sb, &p);
            prop_assert!((0.0..=1.0).contains(&w));
        }

        #[test]
        fn lambda_in_half_to_one(d in 0.0..100.0f64) {
            let l = lambda(d, 0.5, 2.0);
            prop_assert!((0.5..=1.0).contains(&l));
        }
    }
}
