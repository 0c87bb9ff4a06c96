use super::config::{EnvKind, EnvironmentConfig, PanoramaFrame};
use super::PipelineError;
use crate::envlight::{
    calibrate, estimate_hdr, prefilter, stitch_with, warp_to_center, FisheyePair, MapFrame, MapKind, RadianceMap, Sampling,
};
use crate::imageio::{read_pfm, read_png, Image};
use crate::math::Rgb;
use crate::render::EnvLighting;
use glam::{DQuat, DVec3};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Names accepted by [`preset_panorama`].
pub const ENV_PRESETS: &[&str] = &["studio", "sunset", "overcast", "night"];

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Soft disc of angular radius `radius` (radians) around `axis`.
fn disc(d: DVec3, axis: DVec3, radius: f64) -> f64 {
    let angle = d.dot(axis.normalize()).clamp(-1.0, 1.0).acos();
    1.0 - smoothstep(radius * 0.8, radius, angle)
}

/// Procedural LDR panorama in world orientation. Each preset has a small
/// saturated light source so the HDR boost has something to act on.
pub fn preset_panorama(name: &str, height: usize) -> Option<RadianceMap> {
    let f: Box<dyn Fn(DVec3) -> Rgb> = match name {
        "studio" => Box::new(|d: DVec3| {
            let base = Rgb::splat(0.25 + 0.2 * d.y);
            let key = disc(d, DVec3::new(-0.5, 0.7, -0.5), 0.25);
            let fill = 0.3 * disc(d, DVec3::new(0.8, 0.2, 0.2), 0.5);
            base.lerp(Rgb::ONE, key) + Rgb::new(0.9, 0.95, 1.0) * fill * (1.0 - key)
        }),
        "sunset" => Box::new(|d: DVec3| {
            let sky = Rgb::new(0.95, 0.55, 0.3).lerp(Rgb::new(0.2, 0.35, 0.7), smoothstep(0.0, 0.6, d.y));
            let ground = Rgb::new(0.18, 0.12, 0.08);
            let c = ground.lerp(sky, smoothstep(-0.05, 0.02, d.y));
            c.lerp(Rgb::ONE, disc(d, DVec3::new(0.8, 0.08, -0.6), 0.12))
        }),
        "overcast" => Box::new(|d: DVec3| {
            let t = 0.5 + 0.5 * d.y;
            Rgb::new(0.35, 0.36, 0.38).lerp(Rgb::new(0.75, 0.76, 0.78), t)
        }),
        "night" => Box::new(|d: DVec3| {
            let c = Rgb::new(0.02, 0.03, 0.08).lerp(Rgb::new(0.05, 0.07, 0.15), 0.5 + 0.5 * d.y);
            c.lerp(Rgb::ONE, disc(d, DVec3::new(-0.3, 0.6, 0.7), 0.06))
        }),
        _ => return None,
    };
    Some(
        RadianceMap::from_fn(height, MapKind::Ldr, MapFrame::World, |d| f(d).clamp(Rgb::ZERO, Rgb::ONE))
            .expect("preset is a valid LDR map"),
    )
}

/// Where environment captures come from.
#[derive(Debug, Clone)]
pub enum EnvSource {
    /// The same map every frame (camera- or world-oriented).
    Static(Arc<RadianceMap>),
    /// One dual-fisheye capture per frame.
    Fisheye { pairs: Vec<(PathBuf, PathBuf)>, fov_deg: f64, height: usize },
}

fn io_err(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Io { path: path.to_path_buf(), source: e }
}

/// Read a panorama file; PNG is LDR, PFM is HDR.
pub fn load_panorama(path: &Path, frame: MapFrame) -> Result<RadianceMap, PipelineError> {
    let is_pfm = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm"));
    let (img, kind) = if is_pfm {
        (read_pfm(path).map_err(|e| PipelineError::Image(format!("{}: {e}", path.display())))?, MapKind::Hdr)
    } else {
        (read_png(path).map_err(|e| PipelineError::Image(format!("{}: {e}", path.display())))?, MapKind::Ldr)
    };
    Ok(RadianceMap::new(img, kind, frame)?)
}

/// Sorted `(front, back)` pairs in `dir`.
pub fn list_fisheye_pairs(dir: &Path) -> Result<Vec<(PathBuf, PathBuf)>, PipelineError> {
    let mut indices = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let name = entry.file_name();
        let Some(stem) = name.to_str().and_then(|n| n.strip_suffix("_front.png")) else {
            continue;
        };
        if let Ok(i) = stem.parse::<u64>() {
            indices.push((i, stem.to_string()));
        }
    }
    indices.sort();
    if indices.is_empty() {
        return Err(PipelineError::MissingInput(dir.join("NNNNN_front.png")));
    }
    indices
        .into_iter()
        .map(|(_, stem)| {
            let back = dir.join(format!("{stem}_back.png"));
            if !back.is_file() {
                return Err(PipelineError::MissingInput(back));
            }
            Ok((dir.join(format!("{stem}_front.png")), back))
        })
        .collect()
}

impl EnvSource {
    pub fn from_config(cfg: &EnvironmentConfig) -> Result<Self, PipelineError> {
        match cfg.kind {
            EnvKind::Preset => EnvSource::preset(&cfg.name, cfg.panorama_height),
            EnvKind::Panorama => {
                let path = cfg.path.as_deref().ok_or_else(|| PipelineError::Config("environment.path is required".into()))?;
                if !path.is_file() {
                    return Err(PipelineError::MissingInput(path.to_path_buf()));
                }
                let frame = match cfg.frame {
                    PanoramaFrame::World => MapFrame::World,
                    PanoramaFrame::Camera => MapFrame::Camera,
                };
                Ok(EnvSource::Static(Arc::new(load_panorama(path, frame)?)))
            }
            EnvKind::Fisheye => {
                let dir = cfg.path.as_deref().ok_or_else(|| PipelineError::Config("environment.path is required".into()))?;
                if !dir.is_dir() {
                    return Err(PipelineError::MissingInput(dir.to_path_buf()));
                }
                Ok(EnvSource::Fisheye { pairs: list_fisheye_pairs(dir)?, fov_deg: cfg.fov_deg, height: cfg.panorama_height })
            }
        }
    }

    pub fn preset(name: &str, height: usize) -> Result<Self, PipelineError> {
        preset_panorama(name, height)
            .map(|m| EnvSource::Static(Arc::new(m)))
            .ok_or_else(|| PipelineError::UnknownPreset { kind: "environment", name: name.to_string() })
    }

    /// The capture for `frame`, before calibration.
    pub fn capture(&self, frame: u64) -> Result<RadianceMap, PipelineError> {
        match self {
            EnvSource::Static(m) => Ok((**m).clone()),
            EnvSource::Fisheye { pairs, fov_deg, height } => {
                let (front, back) = &pairs[(frame as usize).min(pairs.len() - 1)];
                let read = |p: &PathBuf| -> Result<Image, PipelineError> {
                    read_png(p).map_err(|e| PipelineError::Image(format!("{}: {e}", p.display())))
                };
                let pair = FisheyePair::new(read(front)?, read(back)?, *fov_deg, FisheyePair::back_to_back_rotation())?;
                Ok(stitch_with(&pair, *height)?)
            }
        }
    }
}

/// Environment maps derived for one frame.
#[derive(Debug, Clone)]
pub struct PreparedEnv {
    /// Volume-centred HDR map.
    pub hdr: RadianceMap,
    /// Volume-centred LDR map feeding the pre-filtered baseline.
    pub ldr: RadianceMap,
}

/// Calibrate (camera-frame captures only), re-centre on the volume and
/// estimate HDR. HDR captures skip the estimate; their LDR stand-in is
/// clamped to `[0, 1]`.
pub fn prepare_environment(
    capture: &RadianceMap,
    pose: DQuat,
    viewer: DVec3,
    volume_center: DVec3,
    cfg: &EnvironmentConfig,
) -> Result<PreparedEnv, PipelineError> {
    let world = match capture.frame() {
        MapFrame::Camera => calibrate(capture, pose, Sampling::Bilinear)?,
        MapFrame::World => capture.clone(),
        MapFrame::Warped => return Ok(split_kinds(capture.clone(), cfg)?),
    };
    let warped = warp_to_center(&world, volume_center - viewer, cfg.sphere_radius, Sampling::Bilinear)?;
    split_kinds(warped, cfg)
}

fn split_kinds(warped: RadianceMap, cfg: &EnvironmentConfig) -> Result<PreparedEnv, PipelineError> {
    Ok(match warped.kind() {
        MapKind::Ldr => PreparedEnv { hdr: estimate_hdr(&warped, &cfg.hdr)?, ldr: warped },
        MapKind::Hdr => {
            let clamped = warped.image().map(|c| c.clamp(Rgb::ZERO, Rgb::ONE));
            PreparedEnv { ldr: RadianceMap::new(clamped, MapKind::Ldr, warped.frame())?, hdr: warped }
        }
    })
}

/// Lighting for the renderer; pre-filtered levels only when `with_levels`.
pub fn lighting(env: &PreparedEnv, cfg: &EnvironmentConfig, with_levels: bool) -> Result<EnvLighting, PipelineError> {
    let lighting = EnvLighting::new(env.hdr.clone());
    if !with_levels {
        return Ok(lighting);
    }
    let max = (env.ldr.height() as f64).log2().floor() as usize;
    let levels = prefilter(&env.ldr, cfg.prefilter_levels.min(max.max(1)), cfg.prefilter_sigma)?;
    Ok(lighting.with_levels(&levels))
}
