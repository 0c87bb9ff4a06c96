use crate::denoise::BilateralParams;
use crate::envlight::{HdrParams, IllumParams, DEFAULT_FOV_DEG, DEFAULT_PANO_HEIGHT, DEFAULT_SPHERE_RADIUS};
use crate::render::{RenderMode, RenderSettings, StereoRig};
use crate::reproject::ValidityParams;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use super::PipelineError;

/// Per-eye resolution limit.
pub const MAX_WIDTH: usize = 1440;
pub const MAX_HEIGHT: usize = 936;

/// Where the volume comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VolumeSource {
    /// Header file next to its raw data.
    Path(PathBuf),
    /// Built-in procedural volume.
    Synthetic {
        synthetic: SyntheticVolume,
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
}

fn default_resolution() -> usize {
    64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticVolume {
    Sphere,
    Lobes,
}

/// Transfer function file or built-in preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TfSource {
    Path(PathBuf),
    Preset { preset: String },
}

impl Default for TfSource {
    fn default() -> Self {
        TfSource::Preset { preset: "default".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    /// Built-in procedural panorama, in world orientation.
    #[default]
    Preset,
    /// One equirectangular image (PNG is LDR, PFM is HDR) used for every frame.
    Panorama,
    /// Directory of `NNNNN_front.png` / `NNNNN_back.png` captures, one pair
    /// per frame; the last pair repeats once the sequence runs out.
    Fisheye,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanoramaFrame {
    /// Already in world orientation.
    #[default]
    World,
    /// Attached to the viewer; rotated by the frame pose.
    Camera,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub kind: EnvKind,
    /// Preset name for `preset`.
    pub name: String,
    /// File for `panorama`, directory for `fisheye`.
    pub path: Option<PathBuf>,
    pub frame: PanoramaFrame,
    pub fov_deg: f64,
    /// Height of stitched and preset panoramas.
    pub panorama_height: usize,
    pub sphere_radius: f64,
    pub hdr: HdrParams,
    pub prefilter_levels: usize,
    pub prefilter_sigma: f64,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        EnvironmentConfig {
            kind: EnvKind::Preset,
            name: "studio".into(),
            path: None,
            frame: PanoramaFrame::World,
            fov_deg: DEFAULT_FOV_DEG,
            panorama_height: DEFAULT_PANO_HEIGHT,
            sphere_radius: DEFAULT_SPHERE_RADIUS,
            hdr: HdrParams::default(),
            prefilter_levels: 5,
            prefilter_sigma: 1.0,
        }
    }
}

/// One explicit camera pose; `orientation` is `[x, y, z, w]`, or give a
/// `target` to look at with +Y up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub position: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<[f64; 3]>,
}

/// Circular path around `target`, one frame per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Orbit {
    pub frames: usize,
    pub radius: f64,
    pub elevation_deg: f64,
    pub start_deg: f64,
    /// Total azimuth swept over the path.
    pub sweep_deg: f64,
    pub target: [f64; 3],
}

impl Default for Orbit {
    fn default() -> Self {
        Orbit { frames: 60, radius: 2.0, elevation_deg: 15.0, start_deg: 0.0, sweep_deg: 60.0, target: [0.0; 3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CameraPathConfig {
    Orbit(Orbit),
    Keyframes { keyframes: Vec<Keyframe> },
}

impl Default for CameraPathConfig {
    fn default() -> Self {
        CameraPathConfig::Orbit(Orbit::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pacing {
    /// Render back to back at the latest pose.
    #[default]
    Continuous,
    /// Render exactly one frame per received pose.
    OnDemand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub pose: Keyframe,
    pub pacing: Pacing,
    /// Write each served frame as PFM here, named as in offline runs.
    pub record_dir: Option<PathBuf>,
    /// PNG instead of raw RGB8 frame payloads.
    pub png: bool,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            pose: Keyframe { position: [0.0, 0.3, 2.0], orientation: None, target: Some([0.0; 3]) },
            pacing: Pacing::Continuous,
            record_dir: None,
            png: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub png: bool,
    /// Raw radiance, G-buffers, cameras and HDR maps for the `denoise` tool.
    pub dump_gbuffers: bool,
    /// Reprojection validity masks as PNG.
    pub dump_masks: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { png: true, dump_gbuffers: false, dump_masks: false }
    }
}

/// Everything needed to run a session, offline or live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub volume: VolumeSource,
    #[serde(default)]
    pub transfer_function: TfSource,
    #[serde(default)]
    pub mode: RenderMode,
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_spp")]
    pub spp: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_ipd")]
    pub ipd: f64,
    #[serde(default = "default_vfov")]
    pub vfov_deg: f64,
    #[serde(default)]
    pub volume_offset: [f64; 3],
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_true")]
    pub denoise: bool,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub denoiser: BilateralParams,
    #[serde(default)]
    pub validity: ValidityParams,
    #[serde(default)]
    pub illumination: IllumParams,
    #[serde(default)]
    pub render: RenderSettings,
    #[serde(default)]
    pub camera: CameraPathConfig,
    #[serde(default)]
    pub serve: ServeConfig,
}

fn default_spp() -> u32 {
    2
}

fn default_ipd() -> f64 {
    StereoRig::DEFAULT_IPD
}

fn default_vfov() -> f64 {
    StereoRig::DEFAULT_VFOV_DEG
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

impl SessionConfig {
    /// Minimal configuration around a volume source.
    pub fn new(volume: VolumeSource, width: usize, height: usize) -> Self {
        SessionConfig {
            volume,
            transfer_function: TfSource::default(),
            mode: RenderMode::default(),
            width,
            height,
            spp: default_spp(),
            seed: 0,
            ipd: default_ipd(),
            vfov_deg: default_vfov(),
            volume_offset: [0.0; 3],
            output_dir: default_output_dir(),
            denoise: true,
            output: OutputConfig::default(),
            environment: EnvironmentConfig::default(),
            denoiser: BilateralParams::default(),
            validity: ValidityParams::default(),
            illumination: IllumParams::default(),
            render: RenderSettings::default(),
            camera: CameraPathConfig::default(),
            serve: ServeConfig::default(),
        }
    }

    /// Parse and validate; relative paths stay relative.
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let cfg: SessionConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load from a file and resolve relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io { path: path.to_path_buf(), source: e })?;
        let mut cfg = Self::parse(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let VolumeSource::Path(p) = &mut self.volume {
            fix(p);
        }
        if let TfSource::Path(p) = &mut self.transfer_function {
            fix(p);
        }
        if let Some(p) = &mut self.environment.path {
            fix(p);
        }
        fix(&mut self.output_dir);
        if let Some(p) = &mut self.serve.record_dir {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.width == 0 || self.height == 0 || self.width > MAX_WIDTH || self.height > MAX_HEIGHT {
            return bad(format!("resolution {}x{} must be within 1x1..={MAX_WIDTH}x{MAX_HEIGHT}", self.width, self.height));
        }
        if self.spp == 0 {
            return bad("spp must be at least 1".into());
        }
        if !(self.ipd >= 0.0 && self.ipd.is_finite()) {
            return bad("ipd must be non-negative".into());
        }
        if !(self.vfov_deg > 0.0 && self.vfov_deg < 180.0) {
            return bad("vfov_deg must lie in (0, 180)".into());
        }
        if !self.volume_offset.iter().all(|v| v.is_finite()) {
            return bad("volume_offset must be finite".into());
        }
        if let VolumeSource::Synthetic { resolution, .. } = self.volume {
            if !(2..=512).contains(&resolution) {
                return bad("synthetic resolution must lie in 2..=512".into());
            }
        }
        if !(self.render.step_scale > 0.0 && self.render.step_scale.is_finite()) {
            return bad("render.step_scale must be positive".into());
        }
        if !(self.render.phase_g > -1.0 && self.render.phase_g < 1.0) {
            return bad("render.phase_g must lie in (-1, 1)".into());
        }
        if self.render.max_events == 0 {
            return bad("render.max_events must be positive".into());
        }
        self.denoiser.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.denoiser.radius > crate::wire::MAX_RADIUS {
            return bad(format!("denoiser.radius must be at most {}", crate::wire::MAX_RADIUS));
        }
        if !(self.validity.depth_tolerance > 0.0 && self.validity.albedo_tolerance > 0.0) {
            return bad("validity tolerances must be positive".into());
        }
        if self.illumination.grid_n == 0 {
            return bad("illumination.grid_n must be positive".into());
        }
        let env = &self.environment;
        if env.panorama_height < 2 || env.panorama_height > 4096 {
            return bad("environment.panorama_height must lie in 2..=4096".into());
        }
        if !(env.sphere_radius > 0.0 && env.sphere_radius.is_finite()) {
            return bad("environment.sphere_radius must be positive".into());
        }
        if env.kind != EnvKind::Preset && env.path.is_none() {
            return bad("environment.path is required for panorama and fisheye sources".into());
        }
        if env.prefilter_levels == 0 || !(env.prefilter_sigma > 0.0) {
            return bad("prefilter levels and sigma must be positive".into());
        }
        let h = &env.hdr;
        if !((0.0..=100.0).contains(&h.percentile) && (0.0..1.0).contains(&h.floor) && h.boost >= 1.0 && h.gamma > 0.0) {
            return bad("environment.hdr parameters out of range".into());
        }
        match &self.camera {
            CameraPathConfig::Orbit(o) => {
                if o.frames == 0 || !(o.radius > 0.0) {
                    return bad("orbit needs at least one frame and a positive radius".into());
                }
            }
            CameraPathConfig::Keyframes { keyframes } => {
                if keyframes.is_empty() {
                    return bad("camera path needs at least one keyframe".into());
                }
            }
        }
        Ok(())
    }
}
