use super::config::{CameraPathConfig, Keyframe, Orbit};
use super::PipelineError;
use crate::math::checked_unit_quat;
use crate::render::look_rotation;
use glam::{DQuat, DVec3};

/// Rig centre pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: DVec3,
    pub orientation: DQuat,
}

impl Pose {
    pub fn from_keyframe(k: &Keyframe) -> Result<Pose, PipelineError> {
        let position = DVec3::from_array(k.position);
        if !position.is_finite() {
            return Err(PipelineError::Config("keyframe position must be finite".into()));
        }
        let orientation = match (k.orientation, k.target) {
            (Some(_), Some(_)) => {
                return Err(PipelineError::Config("keyframe takes an orientation or a target, not both".into()))
            }
            (Some(q), None) => checked_unit_quat(DQuat::from_array(q)).map_err(|e| PipelineError::Config(e.to_string()))?,
            (None, Some(t)) => {
                let dir = DVec3::from_array(t) - position;
                if !(dir.length() > 0.0) || dir.cross(DVec3::Y).length() < 1e-12 {
                    return Err(PipelineError::Config("keyframe target must differ from the position and not lie straight up or down".into()));
                }
                look_rotation(dir, DVec3::Y)
            }
            (None, None) => DQuat::IDENTITY,
        };
        Ok(Pose { position, orientation })
    }
}

/// Pose `i` of an orbit: azimuth advances by `sweep / frames` per frame.
pub fn orbit_pose(o: &Orbit, i: usize) -> Pose {
    let az = (o.start_deg + o.sweep_deg * i as f64 / o.frames as f64).to_radians();
    let el = o.elevation_deg.to_radians();
    let target = DVec3::from_array(o.target);
    let position = target + o.radius * DVec3::new(el.cos() * az.sin(), el.sin(), el.cos() * az.cos());
    Pose { position, orientation: look_rotation(target - position, DVec3::Y) }
}

/// Every pose of the configured path, one per frame.
pub fn camera_path(cfg: &CameraPathConfig) -> Result<Vec<Pose>, PipelineError> {
    match cfg {
        CameraPathConfig::Orbit(o) => Ok((0..o.frames).map(|i| orbit_pose(o, i)).collect()),
        CameraPathConfig::Keyframes { keyframes } => keyframes.iter().map(Pose::from_keyframe).collect(),
    }
}
