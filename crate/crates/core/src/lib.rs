//! Environment-lit volumetric path tracing for stereo displays.
//!
//! The crate is organised the way a frame flows through the system:
//!
//! * [`volume`] holds the scalar grid and transfer function.
//! * [`envlight`] turns camera captures into a volume-centred HDR radiance
//!   map and measures how much the illumination changed between frames.
//! * [`render`] produces per-eye radiance images and G-buffers under four
//!   illumination models.
//! * [`reproject`] and [`denoise`] reuse samples across eyes and frames.
//! * [`pipeline`] sequences all of the above, offline or as a live session,
//!   and [`wire`] defines the bytes exchanged with a remote viewer.

pub mod denoise;
pub mod envlight;
pub mod imageio;
pub mod math;
pub mod parallel;
pub mod pipeline;
pub mod render;
pub mod reproject;
pub mod rng;
pub mod volume;
pub mod wire;

pub use glam::{DQuat, DVec3};
