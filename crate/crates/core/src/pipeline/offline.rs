use super::camera_path::camera_path;
use super::config::SessionConfig;
use super::executor::{FrameOutput, Pipeline};
use super::PipelineError;
use crate::denoise::{denoise_frame, BilateralParams, FrameHistory};
use crate::envlight::{illumination_difference, IllumParams, MapFrame, MapKind, RadianceMap, T_EPSILON};
use crate::imageio::{read_pfm, write_pfm, write_png_ldr, write_png_tonemapped, Image};
use crate::render::{Camera, Eye, EyeFrame, GBuffer, RenderMode, StereoFrame};
use crate::reproject::{validity_mask, ValidityParams};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// `frame_00012_L_raw.pfm` for `(12, Some(Left), "_raw.pfm")`; the eye
/// letter is omitted for per-frame files.
pub fn frame_file(frame: u64, eye: Option<Eye>, suffix: &str) -> String {
    match eye {
        Some(e) => format!("frame_{frame:05}_{}{suffix}", e.letter()),
        None => format!("frame_{frame:05}{suffix}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: u64,
    /// Illumination difference to the previous frame.
    pub t: f64,
    pub position: [f64; 3],
    /// `[x, y, z, w]`.
    pub orientation: [f64; 4],
}

/// Run summary written as `manifest.toml`; contains no timings so reruns
/// are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub width: usize,
    pub height: usize,
    pub mode: RenderMode,
    pub spp: u32,
    pub seed: u64,
    pub denoised: bool,
    pub frames: Vec<FrameRecord>,
}

impl Manifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serialises")
    }

    pub fn parse(text: &str) -> Result<Manifest, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(format!("manifest: {}", e.message())))
    }
}

pub fn run_offline(cfg: &SessionConfig) -> Result<Manifest, PipelineError> {
    run_offline_with(cfg, |_| {})
}

/// Render the configured camera path into `cfg.output_dir`, calling
/// `observer` after each frame is written.
pub fn run_offline_with(cfg: &SessionConfig, mut observer: impl FnMut(&FrameOutput)) -> Result<Manifest, PipelineError> {
    let poses = camera_path(&cfg.camera)?;
    let mut pipeline = Pipeline::new(cfg)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    let mut manifest = Manifest {
        width: cfg.width,
        height: cfg.height,
        mode: cfg.mode,
        spp: cfg.spp,
        seed: cfg.seed,
        denoised: cfg.denoise,
        frames: Vec::with_capacity(poses.len()),
    };
    for pose in &poses {
        let out = pipeline.step(pose)?;
        write_frame(dir, cfg, &out).map_err(|e| PipelineError::Frame { frame: out.frame, source: Box::new(e) })?;
        log::info!("frame {} done (T = {:.4})", out.frame, out.illumination);
        manifest.frames.push(FrameRecord {
            frame: out.frame,
            t: out.illumination,
            position: pose.position.to_array(),
            orientation: pose.orientation.to_array(),
        });
        observer(&out);
    }
    let path = dir.join("manifest.toml");
    std::fs::write(&path, manifest.to_toml()).map_err(|e| PipelineError::io(path, e))?;
    Ok(manifest)
}

fn pfm(path: PathBuf, img: &Image) -> Result<(), PipelineError> {
    write_pfm(&path, img).map_err(|e| PipelineError::Image(format!("{}: {e}", path.display())))
}

fn write_frame(dir: &Path, cfg: &SessionConfig, out: &FrameOutput) -> Result<(), PipelineError> {
    let t = out.frame;
    let finals = out.final_images();
    for eye in Eye::BOTH {
        let img = finals[eye.index()];
        pfm(dir.join(frame_file(t, Some(eye), ".pfm")), img)?;
        if cfg.output.png {
            let path = dir.join(frame_file(t, Some(eye), ".png"));
            write_png_tonemapped(&path, img).map_err(|e| PipelineError::Image(format!("{}: {e}", path.display())))?;
        }
        let ef = out.raw.eye(eye);
        if cfg.output.dump_gbuffers {
            pfm(dir.join(frame_file(t, Some(eye), "_raw.pfm")), &ef.radiance)?;
            pfm(dir.join(frame_file(t, Some(eye), "_albedo.pfm")), &ef.gbuffer.albedo_image())?;
            pfm(dir.join(frame_file(t, Some(eye), "_gradient.pfm")), &ef.gbuffer.gradient_image())?;
            pfm(dir.join(frame_file(t, Some(eye), "_position.pfm")), &ef.gbuffer.position_image())?;
            pfm(dir.join(frame_file(t, Some(eye), "_depth_coverage.pfm")), &ef.gbuffer.depth_coverage_image())?;
            let path = dir.join(frame_file(t, Some(eye), "_camera.toml"));
            std::fs::write(&path, ef.camera.to_toml()).map_err(|e| PipelineError::io(path, e))?;
        }
        if let (true, Some(d)) = (cfg.output.dump_masks, &out.denoised) {
            let mask = validity_mask(cfg.width, cfg.height, &d.reprojection[eye.index()]);
            let path = dir.join(frame_file(t, Some(eye), "_mask.png"));
            write_png_ldr(&path, &mask).map_err(|e| PipelineError::Image(format!("{}: {e}", path.display())))?;
        }
    }
    if cfg.output.dump_gbuffers {
        pfm(dir.join(frame_file(t, None, "_env.pfm")), out.lighting.map().image())?;
    }
    Ok(())
}

/// A frame read back from a dump directory.
#[derive(Debug, Clone)]
pub struct DumpedFrame {
    pub frame: StereoFrame,
    pub env: Option<RadianceMap>,
}

fn read_image(path: PathBuf) -> Result<Image, PipelineError> {
    if !path.is_file() {
        return Err(PipelineError::MissingInput(path));
    }
    read_pfm(&path).map_err(|e| PipelineError::Image(format!("{}: {e}", path.display())))
}

/// Load frame `t` written with `dump_gbuffers`.
pub fn load_dumped_frame(dir: &Path, manifest: &Manifest, t: u64) -> Result<DumpedFrame, PipelineError> {
    let record = manifest
        .frames
        .iter()
        .find(|r| r.frame == t)
        .ok_or_else(|| PipelineError::Config(format!("frame {t} is not in the manifest")))?;
    let mut eyes = Vec::with_capacity(2);
    for eye in Eye::BOTH {
        let f = |s: &str| dir.join(frame_file(t, Some(eye), s));
        let radiance = read_image(f("_raw.pfm"))?;
        let gbuffer = GBuffer::from_images(
            &read_image(f("_albedo.pfm"))?,
            &read_image(f("_gradient.pfm"))?,
            &read_image(f("_position.pfm"))?,
            &read_image(f("_depth_coverage.pfm"))?,
        )
        .ok_or_else(|| PipelineError::Image(format!("frame {t}: G-buffer images differ in size")))?;
        let cam_path = f("_camera.toml");
        let text = std::fs::read_to_string(&cam_path).map_err(|e| PipelineError::io(&cam_path, e))?;
        let camera = Camera::parse_toml(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", cam_path.display())))?;
        if !radiance.same_size(&gbuffer.albedo_image()) || camera.width != radiance.width() || camera.height != radiance.height() {
            return Err(PipelineError::Image(format!("frame {t}: dumped images and camera disagree in size")));
        }
        eyes.push(EyeFrame { camera, radiance, gbuffer });
    }
    let env_path = dir.join(frame_file(t, None, "_env.pfm"));
    let env = if env_path.is_file() {
        Some(RadianceMap::new(read_image(env_path)?, MapKind::Hdr, MapFrame::Warped)?)
    } else {
        None
    };
    let right = eyes.pop().expect("two eyes");
    let left = eyes.pop().expect("two eyes");
    Ok(DumpedFrame {
        frame: StereoFrame {
            frame: t,
            mode: manifest.mode,
            spp: manifest.spp,
            seed: manifest.seed,
            illumination: record.t,
            eyes: [left, right],
        },
        env,
    })
}

/// Settings for re-denoising a dump directory.
#[derive(Debug, Clone, Copy, Default)]
pub struct RedenoiseOptions {
    pub bilateral: BilateralParams,
    pub validity: ValidityParams,
    /// Recompute `T` from the dumped HDR maps with these settings instead
    /// of using the values in the manifest.
    pub illumination: Option<IllumParams>,
}

/// Re-run the denoiser over every frame of a dump directory, writing
/// `frame_NNNNN_{L,R}.pfm` into `out_dir`. Returns the `T` used per frame.
pub fn redenoise(dir: &Path, out_dir: &Path, opts: &RedenoiseOptions) -> Result<Vec<f64>, PipelineError> {
    opts.bilateral.validate()?;
    let manifest_path = dir.join("manifest.toml");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| PipelineError::io(&manifest_path, e))?;
    let manifest = Manifest::parse(&text)?;
    std::fs::create_dir_all(out_dir).map_err(|e| PipelineError::io(out_dir, e))?;
    let mut history: Option<FrameHistory> = None;
    let mut ts = Vec::with_capacity(manifest.frames.len());
    for record in &manifest.frames {
        let t = record.frame;
        let step = || -> Result<(FrameHistory, f64), PipelineError> {
            let dumped = load_dumped_frame(dir, &manifest, t)?;
            let illumination = match (&opts.illumination, history.as_ref().and_then(|h| h.illumination.as_ref()), &dumped.env) {
                (Some(p), Some(prev), Some(curr)) => {
                    if prev.width() != curr.width() || prev.height() != curr.height() {
                        1.0 - T_EPSILON
                    } else {
                        illumination_difference(prev, curr, p)?.value
                    }
                }
                (Some(_), _, None) => return Err(PipelineError::MissingInput(dir.join(frame_file(t, None, "_env.pfm")))),
                (Some(_), None, Some(_)) => 0.0,
                (None, ..) => record.t,
            };
            let mut frame = dumped.frame;
            frame.illumination = illumination;
            let d = denoise_frame(&frame, history.as_ref(), illumination, &opts.bilateral, &opts.validity)?;
            for eye in Eye::BOTH {
                pfm(out_dir.join(frame_file(t, Some(eye), ".pfm")), &d.output[eye.index()])?;
            }
            Ok((FrameHistory::from_frame(&frame, d.output, dumped.env), illumination))
        };
        let (next, illumination) = step().map_err(|e| PipelineError::Frame { frame: t, source: Box::new(e) })?;
        ts.push(illumination);
        history = Some(next);
    }
    Ok(ts)
}
