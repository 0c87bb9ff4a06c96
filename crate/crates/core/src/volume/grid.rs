use super::VolumeError;
use crate::math::Aabb;
use glam::DVec3;
use std::sync::Arc;

/// Regular scalar grid. Voxel `(i, j, k)` sits at `origin + (i, j, k) ·
/// spacing`; values are normalised to `[0, 1]` and stored x-fastest.
#[derive(Debug, Clone)]
pub struct VolumeGrid {
    dims: [usize; 3],
    spacing: DVec3,
    origin: DVec3,
    bits: u32,
    values: Arc<[f32]>,
}

impl VolumeGrid {
    /// Build from normalised values. Values are clamped into `[0, 1]`;
    /// non-finite values become 0.
    pub fn new(
        dims: [usize; 3],
        spacing: DVec3,
        origin: DVec3,
        bits: u32,
        values: Vec<f32>,
    ) -> Result<Self, VolumeError> {
        if dims.iter().any(|&d| d < 2) {
            return Err(VolumeError::Dims(dims));
        }
        if !(spacing.cmpgt(DVec3::ZERO).all() && spacing.is_finite()) {
            return Err(VolumeError::Spacing(spacing.to_array()));
        }
        if !origin.is_finite() {
            return Err(VolumeError::Header("origin must be finite".into()));
        }
        let expected = dims[0] * dims[1] * dims[2];
        if values.len() != expected {
            return Err(VolumeError::DataLength { expected, actual: values.len() });
        }
        let values: Vec<f32> = values
            .into_iter()
            .map(|v| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 })
            .collect();
        Ok(VolumeGrid { dims, spacing, origin, bits, values: values.into() })
    }

    /// Decode a raw little-endian array of `bits`-bit unsigned scalars.
    pub fn from_raw(
        dims: [usize; 3],
        spacing: DVec3,
        origin: DVec3,
        bits: u32,
        raw: &[u8],
    ) -> Result<Self, VolumeError> {
        let count = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let count = count.ok_or(VolumeError::Dims(dims))?;
        let values: Vec<f32> = match bits {
            8 => {
                check_len(raw.len(), count)?;
                raw.iter().map(|&b| b as f32 / 255.0).collect()
            }
            16 => {
                check_len(raw.len(), count.checked_mul(2).ok_or(VolumeError::Dims(dims))?)?;
                raw.chunks_exact(2)
                    .map(|c| u16::from_le_bytes([c[0], c[1]]) as f32 / 65535.0)
                    .collect()
            }
            other => return Err(VolumeError::Bits(other)),
        };
        Self::new(dims, spacing, origin, bits, values)
    }

    /// Evaluate `f` at every voxel position (in world space).
    pub fn from_fn(
        dims: [usize; 3],
        spacing: DVec3,
        origin: DVec3,
        f: impl Fn(DVec3) -> f64,
    ) -> Result<Self, VolumeError> {
        let mut values = Vec::with_capacity(dims.iter().product());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = origin + DVec3::new(i as f64, j as f64, k as f64) * spacing;
                    values.push(f(p) as f32);
                }
            }
        }
        Self::new(dims, spacing, origin, 16, values)
    }

    /// Quantise back to the raw on-disk representation.
    pub fn to_raw(&self) -> Vec<u8> {
        match self.bits {
            8 => self.values.iter().map(|&v| (v * 255.0).round() as u8).collect(),
            _ => self
                .values
                .iter()
                .flat_map(|&v| ((v * 65535.0).round() as u16).to_le_bytes())
                .collect(),
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> DVec3 {
        self.spacing
    }

    pub fn origin(&self) -> DVec3 {
        self.origin
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn bounds(&self) -> Aabb {
        let extent = DVec3::new(
            (self.dims[0] - 1) as f64,
            (self.dims[1] - 1) as f64,
            (self.dims[2] - 1) as f64,
        ) * self.spacing;
        Aabb { min: self.origin, max: self.origin + extent }
    }

    pub fn translated(&self, offset: DVec3) -> VolumeGrid {
        VolumeGrid { origin: self.origin + offset, ..self.clone() }
    }

    #[inline]
    pub fn voxel(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[i + self.dims[0] * (j + self.dims[1] * k)] as f64
    }

    /// Trilinear interpolation inside the bounding box, exactly 0 outside.
    #[inline]
    pub fn sample(&self, p: DVec3) -> f64 {
        let local = (p - self.origin) / self.spacing;
        let hi = [
            (self.dims[0] - 1) as f64,
            (self.dims[1] - 1) as f64,
            (self.dims[2] - 1) as f64,
        ];
        if !(local.x >= 0.0 && local.y >= 0.0 && local.z >= 0.0)
            || local.x > hi[0]
            || local.y > hi[1]
            || local.z > hi[2]
        {
            return 0.0;
        }
        let cell = |v: f64, max: f64| -> (usize, f64) {
            let i = (v.floor()).min(max - 1.0);
            (i as usize, v - i)
        };
        let (i, fx) = cell(local.x, hi[0]);
        let (j, fy) = cell(local.y, hi[1]);
        let (k, fz) = cell(local.z, hi[2]);
        let nx = self.dims[0];
        let nxy = nx * self.dims[1];
        let base = i + nx * j + nxy * k;
        let v = &self.values;
        let at = |o: usize| v[base + o] as f64;
        let c00 = at(0) + (at(1) - at(0)) * fx;
        let c10 = at(nx) + (at(nx + 1) - at(nx)) * fx;
        let c01 = at(nxy) + (at(nxy + 1) - at(nxy)) * fx;
        let c11 = at(nxy + nx) + (at(nxy + nx + 1) - at(nxy + nx)) * fx;
        let c0 = c00 + (c10 - c00) * fy;
        let c1 = c01 + (c11 - c01) * fy;
        c0 + (c1 - c0) * fz
    }

    /// Central differences of [`sample`](Self::sample) with a step of one
    /// voxel spacing per axis. Zero outside the bounding box.
    pub fn gradient(&self, p: DVec3) -> DVec3 {
        if !self.bounds().contains(p) {
            return DVec3::ZERO;
        }
        let h = self.spacing;
        let d = |axis: DVec3, step: f64| {
            (self.sample(p + axis * step) - self.sample(p - axis * step)) / (2.0 * step)
        };
        DVec3::new(d(DVec3::X, h.x), d(DVec3::Y, h.y), d(DVec3::Z, h.z))
    }
}

fn check_len(actual: usize, expected: usize) -> Result<(), VolumeError> {
    if actual != expected {
        return Err(VolumeError::DataLength { expected, actual });
    }
    Ok(())
}
