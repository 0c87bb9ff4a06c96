use super::{direction, RadianceMap, Sampling};
use crate::math::{luminance, Rgb};
use glam::DVec3;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

/// One importance-sampled environment direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSample {
    pub direction: DVec3,
    /// Solid-angle density.
    pub pdf: f64,
    pub radiance: Rgb,
}

/// Piecewise-constant importance sampler over an HDR panorama.
///
/// Texel weights are luminance times texel solid angle. Within a texel,
/// directions are uniform in solid angle, so a constant map yields exactly
/// uniform sphere sampling. Maps with no luminance fall back to uniform
/// sphere sampling.
///
/// Sampled radiance is the texel value, not the bilinear lookup, so the
/// estimate `radiance / pdf` of a texel is bounded by its colour over its
/// luminance times the map's total power.
#[derive(Debug, Clone)]
pub struct EnvSampler {
    map: Arc<RadianceMap>,
    /// Marginal CDF over rows, `height + 1` entries.
    row_cdf: Vec<f64>,
    /// Per-row conditional CDFs, `width + 1` entries each.
    col_cdf: Vec<f64>,
    /// Normalised texel probabilities.
    texel_prob: Vec<f64>,
    uniform: bool,
}

impl EnvSampler {
    pub fn new(map: Arc<RadianceMap>) -> Self {
        let (w, h) = (map.width(), map.height());
        let img = map.image();
        let mut weights = vec![0.0; w * h];
        for j in 0..h {
            let omega = map.texel_solid_angle(j);
            for i in 0..w {
                weights[j * w + i] = luminance(img.get(i, j)).max(0.0) * omega;
            }
        }
        let total: f64 = weights.iter().sum();
        let uniform = !(total > 0.0 && total.is_finite());
        let mut row_cdf = vec![0.0; h + 1];
        let mut col_cdf = vec![0.0; h * (w + 1)];
        let mut texel_prob = vec![0.0; w * h];
        if !uniform {
            for j in 0..h {
                let row = &weights[j * w..(j + 1) * w];
                let row_sum: f64 = row.iter().sum();
                row_cdf[j + 1] = row_cdf[j] + row_sum / total;
                let cdf = &mut col_cdf[j * (w + 1)..(j + 1) * (w + 1)];
                let mut acc = 0.0;
                for i in 0..w {
                    acc += row[i];
                    cdf[i + 1] = if row_sum > 0.0 { acc / row_sum } else { (i + 1) as f64 / w as f64 };
                    texel_prob[j * w + i] = row[i] / total;
                }
                cdf[w] = 1.0;
            }
            row_cdf[h] = 1.0;
        }
        EnvSampler { map, row_cdf, col_cdf, texel_prob, uniform }
    }

    pub fn map(&self) -> &RadianceMap {
        &self.map
    }

    pub fn is_uniform_fallback(&self) -> bool {
        self.uniform
    }

    /// Radiance arriving from direction `d`.
    #[inline]
    pub fn radiance(&self, d: DVec3) -> Rgb {
        self.map.lookup(d, Sampling::Bilinear)
    }

    /// Bin index with `cdf[k] <= u < cdf[k + 1]` and the rescaled remainder.
    fn pick(cdf: &[f64], u: f64) -> (usize, f64) {
        let n = cdf.len() - 1;
        let k = cdf.partition_point(|&c| c <= u).saturating_sub(1).min(n - 1);
        // Skip empty bins that share the same CDF value.
        let mut k = k;
        while k + 1 < n && cdf[k + 1] - cdf[k] <= 0.0 {
            k += 1;
        }
        let width = cdf[k + 1] - cdf[k];
        let t = if width > 0.0 { ((u - cdf[k]) / width).clamp(0.0, 1.0 - f64::EPSILON) } else { 0.5 };
        (k, t)
    }

    pub fn sample(&self, u: [f64; 2]) -> EnvSample {
        if self.uniform {
            let cos_theta = 1.0 - 2.0 * u[0];
            let phi = TAU * u[1] - PI;
            let d = direction(phi, cos_theta.clamp(-1.0, 1.0).acos());
            return EnvSample { direction: d, pdf: 1.0 / (4.0 * PI), radiance: self.radiance(d) };
        }
        let (w, h) = (self.map.width(), self.map.height());
        let (j, tv) = Self::pick(&self.row_cdf, u[0]);
        let (i, tu) = Self::pick(&self.col_cdf[j * (w + 1)..(j + 1) * (w + 1)], u[1]);
        let (ca, cb) = ((j as f64 * PI / h as f64).cos(), ((j + 1) as f64 * PI / h as f64).cos());
        let cos_theta = ca + (cb - ca) * tv;
        let phi = (i as f64 + tu) / w as f64 * TAU - PI;
        let d = direction(phi, cos_theta.clamp(-1.0, 1.0).acos());
        let pdf = self.texel_prob[j * w + i] / self.map.texel_solid_angle(j);
        EnvSample { direction: d, pdf, radiance: self.map.image().get(i, j) }
    }

    /// Solid-angle density of sampling direction `d`.
    pub fn pdf(&self, d: DVec3) -> f64 {
        if self.uniform {
            return 1.0 / (4.0 * PI);
        }
        let (i, j) = self.map.texel_of(d);
        self.texel_prob[j * self.map.width() + i] / self.map.texel_solid_angle(j)
    }
}
