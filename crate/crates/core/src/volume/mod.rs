//! Scalar volumes, their classification into optical properties, and the
//! field queries every renderer consumes.

mod grid;
mod header;
pub mod synthetic;
mod transfer;

pub use self::grid::VolumeGrid;
pub use self::header::{load_volume, VolumeHeader};
pub use self::transfer::{Classified, TfNode, TransferFunction};

use crate::math::{Aabb, Rgb};
use glam::DVec3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("volume dims {0:?} must be at least 2 on every axis")]
    Dims([usize; 3]),
    #[error("volume spacing {0:?} must be positive and finite")]
    Spacing([f64; 3]),
    #[error("unsupported bit depth {0} (expected 8 or 16)")]
    Bits(u32),
    #[error("volume data holds {actual} bytes, expected {expected}")]
    DataLength { expected: usize, actual: usize },
    #[error("malformed volume header: {0}")]
    Header(String),
    #[error("invalid transfer function: {0}")]
    Transfer(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// A volume together with the transfer function that gives it an
/// appearance. Cheap to clone: the voxel array is shared.
#[derive(Debug, Clone)]
pub struct Scene {
    pub grid: VolumeGrid,
    pub tf: TransferFunction,
}

impl Scene {
    pub fn new(grid: VolumeGrid, tf: TransferFunction) -> Self {
        Scene { grid, tf }
    }

    #[inline]
    pub fn classify_at(&self, p: DVec3) -> Classified {
        self.tf.classify(self.grid.sample(p))
    }

    #[inline]
    pub fn sigma_t(&self, p: DVec3) -> f64 {
        self.classify_at(p).sigma_t
    }

    #[inline]
    pub fn albedo(&self, p: DVec3) -> Rgb {
        self.classify_at(p).albedo
    }

    #[inline]
    pub fn majorant(&self) -> f64 {
        self.tf.sigma_max()
    }

    #[inline]
    pub fn bounds(&self) -> Aabb {
        self.grid.bounds()
    }

    /// Same appearance with the volume translated by `offset`.
    pub fn translated(&self, offset: DVec3) -> Scene {
        Scene { grid: self.grid.translated(offset), tf: self.tf.clone() }
    }
}
