use crate::denoise::BilateralParams;
use crate::math::checked_unit_quat;
use crate::render::RenderMode;
use crate::reproject::ValidityParams;
use glam::{DQuat, DVec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which environment to light with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvSelector {
    /// Built-in preset.
    Name { name: String },
    /// Panorama previously uploaded in this session.
    Id { id: u32 },
}

/// Denoiser and validity overrides; absent fields keep their value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsOverride {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_albedo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_gradient: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_depth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temporal_multiplier: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub albedo_tolerance: Option<f64>,
}

/// Largest accepted spatial radius.
pub const MAX_RADIUS: usize = 8;

impl ParamsOverride {
    /// Apply to copies of the current parameters; nothing changes on error.
    pub fn apply(
        &self,
        bilateral: &BilateralParams,
        validity: &ValidityParams,
    ) -> Result<(BilateralParams, ValidityParams), ControlError> {
        let mut b = *bilateral;
        let mut v = *validity;
        if let Some(r) = self.radius {
            if r > MAX_RADIUS {
                return Err(ControlError::Invalid(format!("radius {r} exceeds {MAX_RADIUS}")));
            }
            b.radius = r;
        }
        let set = |dst: &mut f64, src: Option<f64>| {
            if let Some(x) = src {
                *dst = x;
            }
        };
        set(&mut b.sigma_albedo, self.sigma_albedo);
        set(&mut b.sigma_gradient, self.sigma_gradient);
        set(&mut b.sigma_depth, self.sigma_depth);
        set(&mut b.alpha, self.alpha);
        set(&mut b.beta, self.beta);
        set(&mut b.temporal_multiplier, self.temporal_multiplier);
        set(&mut v.depth_tolerance, self.depth_tolerance);
        set(&mut v.albedo_tolerance, self.albedo_tolerance);
        b.validate().map_err(|e| ControlError::Invalid(e.to_string()))?;
        if !(v.depth_tolerance > 0.0 && v.albedo_tolerance > 0.0) {
            return Err(ControlError::Invalid("validity tolerances must be positive".into()));
        }
        Ok((b, v))
    }
}

/// Viewer → service text messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControlMessage {
    /// Rig centre pose; `orientation` is `[x, y, z, w]`.
    Pose { position: [f64; 3], orientation: [f64; 4] },
    VolumeOffset { offset: [f64; 3] },
    Mode { mode: RenderMode },
    Env(EnvSelector),
    Tf { name: String },
    Params(ParamsOverride),
}

impl ControlMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("control messages serialise")
    }

    /// Pose as vectors, with the quaternion normalised.
    pub fn pose(&self) -> Option<Result<(DVec3, DQuat), ControlError>> {
        match self {
            ControlMessage::Pose { position, orientation } => Some(pose_from(*position, *orientation)),
            _ => None,
        }
    }
}

fn pose_from(position: [f64; 3], orientation: [f64; 4]) -> Result<(DVec3, DQuat), ControlError> {
    let p = DVec3::from_array(position);
    if !p.is_finite() {
        return Err(ControlError::Invalid("position must be finite".into()));
    }
    let q = checked_unit_quat(DQuat::from_array(orientation)).map_err(|e| ControlError::Invalid(e.to_string()))?;
    Ok((p, q))
}

/// Service → viewer text messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Stats { frame: u32, t: f64, render_ms: f64, denoise_ms: f64, mode: RenderMode },
    EnvUploaded { id: u32 },
    Error { message: String },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialise")
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("malformed control message: {0}")]
    Malformed(String),
    #[error("invalid control message: {0}")]
    Invalid(String),
}

/// Parse and validate one control message.
pub fn parse_control(text: &str) -> Result<ControlMessage, ControlError> {
    let msg: ControlMessage = serde_json::from_str(text).map_err(|e| ControlError::Malformed(e.to_string()))?;
    match &msg {
        ControlMessage::Pose { position, orientation } => {
            pose_from(*position, *orientation)?;
        }
        ControlMessage::VolumeOffset { offset } => {
            if !DVec3::from_array(*offset).is_finite() {
                return Err(ControlError::Invalid("offset must be finite".into()));
            }
        }
        ControlMessage::Params(p) => {
            p.apply(&BilateralParams::default(), &ValidityParams::default())?;
        }
        ControlMessage::Env(EnvSelector::Name { name }) | ControlMessage::Tf { name } if name.is_empty() => {
            return Err(ControlError::Invalid("name must not be empty".into()));
        }
        _ => {}
    }
    Ok(msg)
}
