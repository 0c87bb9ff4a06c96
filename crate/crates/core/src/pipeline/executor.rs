use super::camera_path::Pose;
use super::config::{SessionConfig, SyntheticVolume, TfSource, VolumeSource};
use super::environment::{lighting, prepare_environment, EnvSource};
use super::PipelineError;
use crate::denoise::{denoise_frame, BilateralParams, Denoised, FrameHistory};
use crate::envlight::{illumination_difference, RadianceMap, T_EPSILON};
use crate::imageio::Image;
use crate::render::{render, EnvLighting, FrameRequest, RenderMode, StereoFrame, StereoRig};
use crate::reproject::ValidityParams;
use crate::volume::{load_volume, synthetic, Scene, TransferFunction, VolumeGrid};
use glam::DVec3;
use std::time::Instant;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub env_ms: f64,
    pub render_ms: f64,
    pub denoise_ms: f64,
}

/// Everything produced for one frame.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub frame: u64,
    pub pose: Pose,
    /// Illumination difference to the previous frame; 0 without history.
    pub illumination: f64,
    pub raw: StereoFrame,
    /// `None` when denoising is disabled.
    pub denoised: Option<Denoised>,
    pub lighting: EnvLighting,
    pub timings: Timings,
}

impl FrameOutput {
    /// Final per-eye images: `D2` output, or the raw render.
    pub fn final_images(&self) -> [&Image; 2] {
        match &self.denoised {
            Some(d) => [&d.output[0], &d.output[1]],
            None => [&self.raw.eyes[0].radiance, &self.raw.eyes[1].radiance],
        }
    }
}

pub fn load_scene_grid(src: &VolumeSource) -> Result<VolumeGrid, PipelineError> {
    match src {
        VolumeSource::Path(p) => {
            if !p.is_file() {
                return Err(PipelineError::MissingInput(p.clone()));
            }
            Ok(load_volume(p)?)
        }
        VolumeSource::Synthetic { synthetic: kind, resolution } => Ok(match kind {
            SyntheticVolume::Sphere => synthetic::soft_sphere(*resolution, 0.35, 0.15),
            SyntheticVolume::Lobes => synthetic::lobes(*resolution),
        }),
    }
}

pub fn load_transfer_function(src: &TfSource) -> Result<TransferFunction, PipelineError> {
    match src {
        TfSource::Preset { preset } => TransferFunction::preset(preset)
            .ok_or_else(|| PipelineError::UnknownPreset { kind: "transfer function", name: preset.clone() }),
        TfSource::Path(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                if e.kind() == std::io::ErrorKind::NotFound {
                    PipelineError::MissingInput(p.clone())
                } else {
                    PipelineError::Io { path: p.clone(), source: e }
                }
            })?;
            Ok(TransferFunction::parse(&text)?)
        }
    }
}

/// Sequential frame executor shared by offline runs and live sessions.
/// Frame `t` always reads the history left by frame `t − 1`.
pub struct Pipeline {
    cfg: SessionConfig,
    grid: VolumeGrid,
    tf: TransferFunction,
    scene: Scene,
    env: EnvSource,
    history: Option<FrameHistory>,
    next_frame: u64,
}

impl Pipeline {
    /// Load every input named by `cfg`; missing files are reported here.
    pub fn new(cfg: &SessionConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let grid = load_scene_grid(&cfg.volume)?;
        let tf = load_transfer_function(&cfg.transfer_function)?;
        let env = EnvSource::from_config(&cfg.environment)?;
        let scene = Scene::new(grid.clone(), tf.clone()).translated(DVec3::from_array(cfg.volume_offset));
        Ok(Pipeline { cfg: cfg.clone(), grid, tf, scene, env, history: None, next_frame: 0 })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn history(&self) -> Option<&FrameHistory> {
        self.history.as_ref()
    }

    pub fn next_frame(&self) -> u64 {
        self.next_frame
    }

    pub fn mode(&self) -> RenderMode {
        self.cfg.mode
    }

    pub fn set_mode(&mut self, mode: RenderMode) {
        self.cfg.mode = mode;
    }

    pub fn set_transfer_function(&mut self, tf: TransferFunction) {
        self.tf = tf;
        self.rebuild_scene();
    }

    pub fn set_volume_offset(&mut self, offset: DVec3) {
        self.cfg.volume_offset = offset.to_array();
        self.rebuild_scene();
    }

    pub fn set_environment(&mut self, env: EnvSource) {
        self.env = env;
    }

    pub fn set_params(&mut self, bilateral: BilateralParams, validity: ValidityParams) {
        self.cfg.denoiser = bilateral;
        self.cfg.validity = validity;
    }

    fn rebuild_scene(&mut self) {
        self.scene = Scene::new(self.grid.clone(), self.tf.clone()).translated(DVec3::from_array(self.cfg.volume_offset));
    }

    /// Stereo rig at `pose` with the configured optics.
    pub fn rig(&self, pose: &Pose) -> StereoRig {
        StereoRig {
            position: pose.position,
            orientation: pose.orientation,
            ipd: self.cfg.ipd,
            vfov: self.cfg.vfov_deg.to_radians(),
            width: self.cfg.width,
            height: self.cfg.height,
            near: StereoRig::DEFAULT_NEAR,
        }
    }

    /// Run one frame at `pose`. Errors carry the frame id; a failed frame
    /// leaves the history untouched.
    pub fn step(&mut self, pose: &Pose) -> Result<FrameOutput, PipelineError> {
        let frame = self.next_frame;
        let out = self.run_frame(frame, pose).map_err(|e| PipelineError::Frame { frame, source: Box::new(e) })?;
        self.history = Some(FrameHistory::from_frame(
            &out.raw,
            out.final_images().map(|i| i.clone()),
            Some(out.lighting.map().clone()),
        ));
        self.next_frame += 1;
        Ok(out)
    }

    fn run_frame(&self, frame: u64, pose: &Pose) -> Result<FrameOutput, PipelineError> {
        let cfg = &self.cfg;
        let t_env = Instant::now();
        let capture = self.env.capture(frame)?;
        let prepared = prepare_environment(&capture, pose.orientation, pose.position, self.scene.bounds().center(), &cfg.environment)?;
        let illumination = match self.history.as_ref().and_then(|h| h.illumination.as_ref()) {
            Some(prev) => self.illumination_between(prev, &prepared.hdr)?,
            None => 0.0,
        };
        let lighting = lighting(&prepared, &cfg.environment, cfg.mode == RenderMode::PrefilteredEnv)?;
        let env_ms = ms(t_env);

        let t_render = Instant::now();
        let rig = self.rig(pose);
        let req = FrameRequest { frame, mode: cfg.mode, spp: cfg.spp, seed: cfg.seed };
        let mut raw = render(&self.scene, &lighting, &rig, &req, &cfg.render)?;
        raw.illumination = illumination;
        let render_ms = ms(t_render);

        let t_denoise = Instant::now();
        let denoised = if cfg.denoise {
            Some(denoise_frame(&raw, self.history.as_ref(), illumination, &cfg.denoiser, &cfg.validity)?)
        } else {
            None
        };
        let denoise_ms = ms(t_denoise);
        Ok(FrameOutput {
            frame,
            pose: *pose,
            illumination,
            raw,
            denoised,
            lighting,
            timings: Timings { env_ms, render_ms, denoise_ms },
        })
    }

    /// `T` between consecutive HDR maps; maps of different size count as a
    /// complete change.
    fn illumination_between(&self, prev: &RadianceMap, curr: &RadianceMap) -> Result<f64, PipelineError> {
        if prev.width() != curr.width() || prev.height() != curr.height() {
            log::info!("environment resolution changed; treating illumination as fully changed");
            return Ok(1.0 - T_EPSILON);
        }
        Ok(illumination_difference(prev, curr, &self.cfg.illumination)?.value)
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}
