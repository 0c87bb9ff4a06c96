//! Per-eye radiance and G-buffer rendering under four illumination models.

mod baseline;
mod camera;
mod gbuffer;
mod vpt;

pub use self::baseline::{
    phong_terms, shade_absorption_emission, shade_gradient_phong, shade_prefiltered_env, PhongParams, PrefilteredLight,
    MIN_GRADIENT, TERMINATION_TRANSMITTANCE,
};
pub use self::camera::{look_rotation, Camera, Eye, StereoRig};
pub use self::gbuffer::{gbuffer_first_scatter, GBuffer, GSample, HIT_OPACITY};
pub use self::vpt::{trace_vpt, transmittance, transmittance_quadrature, transmittance_ratio, Phase, DEFAULT_MAX_EVENTS};

use crate::envlight::{EnvSampler, RadianceMap};
use crate::imageio::Image;
use crate::math::Rgb;
use crate::rng::StreamKey;
use crate::volume::Scene;
use glam::DVec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: DVec3,
    /// Unit length.
    pub dir: DVec3,
}

impl Ray {
    #[inline]
    pub fn at(&self, t: f64) -> DVec3 {
        self.origin + t * self.dir
    }
}

/// Number of equal steps covering `length` with steps no longer than `step`.
/// Lengths within rounding of a whole multiple do not gain an extra step.
#[inline]
pub(crate) fn march_steps(length: f64, step: f64) -> usize {
    ((length / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderMode {
    AbsorptionEmission,
    GradientPhong,
    PrefilteredEnv,
    #[default]
    VptEnv,
}

impl RenderMode {
    pub const ALL: [RenderMode; 4] =
        [RenderMode::AbsorptionEmission, RenderMode::GradientPhong, RenderMode::PrefilteredEnv, RenderMode::VptEnv];

    pub fn name(self) -> &'static str {
        match self {
            RenderMode::AbsorptionEmission => "absorption_emission",
            RenderMode::GradientPhong => "gradient_phong",
            RenderMode::PrefilteredEnv => "prefiltered_env",
            RenderMode::VptEnv => "vpt_env",
        }
    }
}

impl fmt::Display for RenderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown render mode {0:?}")]
pub struct UnknownMode(pub String);

impl FromStr for RenderMode {
    type Err = UnknownMode;

    /// Accepts the snake_case names, with `-` in place of `_` as well.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        RenderMode::ALL.into_iter().find(|m| m.name() == norm).ok_or_else(|| UnknownMode(s.to_string()))
    }
}

/// Tunables that are not part of the per-frame request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSettings {
    /// March step as a fraction of the smallest voxel spacing.
    pub step_scale: f64,
    pub phong: PhongParams,
    /// Henyey–Greenstein asymmetry for the path tracer.
    pub phase_g: f64,
    pub max_events: u32,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings { step_scale: 0.5, phong: PhongParams::default(), phase_g: 0.0, max_events: DEFAULT_MAX_EVENTS }
    }
}

impl RenderSettings {
    pub fn step(&self, scene: &Scene) -> f64 {
        self.step_scale * scene.grid.spacing().min_element()
    }
}

/// Environment lighting for one frame: the HDR map (background and path
/// tracing) and, optionally, LDR pre-filtered levels for the IBL baseline.
#[derive(Debug, Clone)]
pub struct EnvLighting {
    sampler: Arc<EnvSampler>,
    prefiltered: Option<Arc<PrefilteredLight>>,
}

impl EnvLighting {
    pub fn new(hdr: RadianceMap) -> Self {
        EnvLighting { sampler: Arc::new(EnvSampler::new(Arc::new(hdr))), prefiltered: None }
    }

    pub fn with_levels(mut self, levels: &[RadianceMap]) -> Self {
        self.prefiltered = (!levels.is_empty()).then(|| Arc::new(PrefilteredLight::new(levels)));
        self
    }

    pub fn map(&self) -> &RadianceMap {
        self.sampler.map()
    }

    pub fn sampler(&self) -> &EnvSampler {
        &self.sampler
    }

    pub fn prefiltered(&self) -> Option<&PrefilteredLight> {
        self.prefiltered.as_deref()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("mode {0} requires pre-filtered environment levels")]
    MissingLevels(RenderMode),
    #[error("samples per pixel must be at least 1")]
    ZeroSpp,
}

/// What to render for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRequest {
    pub frame: u64,
    pub mode: RenderMode,
    pub spp: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EyeFrame {
    pub camera: Camera,
    pub radiance: Image,
    pub gbuffer: GBuffer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StereoFrame {
    pub frame: u64,
    pub mode: RenderMode,
    pub spp: u32,
    pub seed: u64,
    /// Illumination difference to the previous frame.
    pub illumination: f64,
    pub eyes: [EyeFrame; 2],
}

impl StereoFrame {
    pub fn eye(&self, eye: Eye) -> &EyeFrame {
        &self.eyes[eye.index()]
    }
}

/// Render the G-buffer and radiance of one eye.
pub fn render_eye(
    scene: &Scene,
    env: &EnvLighting,
    camera: &Camera,
    eye: Eye,
    req: &FrameRequest,
    settings: &RenderSettings,
) -> Result<EyeFrame, RenderError> {
    if req.spp == 0 {
        return Err(RenderError::ZeroSpp);
    }
    let prefiltered = match (req.mode, env.prefiltered()) {
        (RenderMode::PrefilteredEnv, None) => return Err(RenderError::MissingLevels(req.mode)),
        (_, p) => p,
    };
    let step = settings.step(scene);
    let phase = Phase { g: settings.phase_g };
    let (w, h) = (camera.width, camera.height);
    let shade = |idx: usize| -> (Rgb, GSample) {
        let (i, j) = (idx % w, idx / w);
        let ray = Ray { origin: camera.position, dir: camera.pixel_ray(i, j) };
        let g = gbuffer_first_scatter(&ray, scene, step, camera.forward());
        let background = env.map().lookup(ray.dir, crate::envlight::Sampling::Bilinear);
        let c = match req.mode {
            RenderMode::AbsorptionEmission => shade_absorption_emission(&ray, scene, step, background),
            RenderMode::GradientPhong => shade_gradient_phong(&ray, scene, step, &settings.phong, background),
            RenderMode::PrefilteredEnv => {
                shade_prefiltered_env(&ray, scene, step, prefiltered.expect("checked above"), background)
            }
            RenderMode::VptEnv => {
                let mut sum = Rgb::ZERO;
                for s in 0..req.spp {
                    let key = StreamKey { seed: req.seed, frame: req.frame, eye: eye as u8, pixel: idx as u64, sample: s };
                    sum += trace_vpt(&ray, scene, env.sampler(), phase, settings.max_events, &mut key.rng());
                }
                sum / req.spp as f64
            }
        };
        (c, g)
    };
    let (radiance, samples): (Vec<Rgb>, Vec<GSample>) =
        crate::parallel::install(|| (0..w * h).into_par_iter().map(shade).unzip());
    Ok(EyeFrame { camera: *camera, radiance: Image::from_vec(w, h, radiance), gbuffer: GBuffer::from_vec(w, h, samples) })
}

/// Render both eyes of `rig`.
pub fn render(
    scene: &Scene,
    env: &EnvLighting,
    rig: &StereoRig,
    req: &FrameRequest,
    settings: &RenderSettings,
) -> Result<StereoFrame, RenderError> {
    let left = render_eye(scene, env, &rig.eye(Eye::Left), Eye::Left, req, settings)?;
    let right = render_eye(scene, env, &rig.eye(Eye::Right), Eye::Right, req, settings)?;
    Ok(StereoFrame {
        frame: req.frame,
        mode: req.mode,
        spp: req.spp,
        seed: req.seed,
        illumination: 0.0,
        eyes: [left, right],
    })
}
