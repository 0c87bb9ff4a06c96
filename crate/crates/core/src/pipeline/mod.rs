//! Frame orchestration shared by the offline runner and live sessions:
//! configuration, environment sources, camera paths and the sequential
//! executor that carries history from one frame to the next.

mod camera_path;
mod config;
mod environment;
mod executor;
mod offline;
mod session;

pub use self::camera_path::{camera_path, orbit_pose, Pose};
pub use self::config::*;
pub use self::environment::{
    lighting, list_fisheye_pairs, load_panorama, prepare_environment, preset_panorama, EnvSource, PreparedEnv, ENV_PRESETS,
};
pub use self::executor::{load_scene_grid, load_transfer_function, FrameOutput, Pipeline, Timings};
pub use self::offline::{
    frame_file, load_dumped_frame, redenoise, run_offline, run_offline_with, DumpedFrame, FrameRecord, Manifest, RedenoiseOptions,
};
pub use self::session::{Outbox, PendingState, Session, SessionEvent, SharedInbox, Taken, UploadedEnv};

use crate::denoise::DenoiseError;
use crate::envlight::EnvError;
use crate::render::RenderError;
use crate::volume::VolumeError;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("missing input file: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("image error: {0}")]
    Image(String),
    #[error("unknown {kind} preset {name:?}")]
    UnknownPreset { kind: &'static str, name: String },
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Denoise(#[from] DenoiseError),
    #[error("frame {frame}: {source}")]
    Frame { frame: u64, source: Box<PipelineError> },
}

impl PipelineError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.into(), source }
    }
}
