use super::{EnvError, MapKind, RadianceMap};
use crate::imageio::Image;
use crate::math::luminance;
use glam::DVec3;

/// Parameters of the LDR→HDR light-source boost.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HdrParams {
    /// Luminance percentile (0–100) a pixel must reach to be a light.
    pub percentile: f64,
    /// Absolute display-luminance floor for lights.
    pub floor: f64,
    /// Multiplier reached by fully saturated light pixels.
    pub boost: f64,
    /// Inverse display gamma used for linearisation.
    pub gamma: f64,
}

impl Default for HdrParams {
    fn default() -> Self {
        HdrParams { percentile: 95.0, floor: 0.9, boost: 50.0, gamma: 2.2 }
    }
}

/// A connected group of light pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct LightRegion {
    pub pixels: usize,
    /// Unit mean direction of the region's texels.
    pub direction: DVec3,
    pub peak_luminance: f64,
}

pub fn estimate_hdr(pano: &RadianceMap, params: &HdrParams) -> Result<RadianceMap, EnvError> {
    estimate_hdr_with_regions(pano, params).map(|(map, _)| map)
}

/// Linearise an LDR panorama and boost detected light sources.
///
/// A light pixel has display luminance at or above both the configured
/// percentile of the map and the absolute floor. Its linear value is scaled
/// by `1 + (boost − 1)·(L − floor)/(1 − floor)`, which is 1 at the floor and
/// `boost` at saturation.
pub fn estimate_hdr_with_regions(
    pano: &RadianceMap,
    params: &HdrParams,
) -> Result<(RadianceMap, Vec<LightRegion>), EnvError> {
    if pano.kind() != MapKind::Ldr {
        return Err(EnvError::WrongKind { expected: MapKind::Ldr, actual: pano.kind() });
    }
    let img = pano.image();
    let (w, h) = (img.width(), img.height());
    let lum: Vec<f64> = img.pixels().iter().map(|&c| luminance(c)).collect();
    let threshold = percentile(&lum, params.percentile).max(params.floor);
    let is_light: Vec<bool> = lum.iter().map(|&l| l >= threshold).collect();
    let span = (1.0 - params.floor).max(1e-12);

    let out: Vec<DVec3> = img
        .pixels()
        .iter()
        .zip(&lum)
        .zip(&is_light)
        .map(|((&c, &l), &light)| {
            let linear = c.powf(params.gamma);
            if light {
                linear * (1.0 + (params.boost - 1.0) * ((l - params.floor) / span).clamp(0.0, 1.0))
            } else {
                linear
            }
        })
        .collect();

    let regions = connected_regions(pano, &is_light, &lum);
    let map = RadianceMap::new(Image::from_vec(w, h, out), MapKind::Hdr, pano.frame())?;
    Ok((map, regions))
}

/// Nearest-rank percentile.
fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::INFINITY;
    }
    let n = values.len();
    let rank = ((p / 100.0) * n as f64).ceil().clamp(1.0, n as f64) as usize;
    let mut v = values.to_vec();
    let (_, nth, _) = v.select_nth_unstable_by(rank - 1, |a, b| a.total_cmp(b));
    *nth
}

/// 4-connected components, wrapping around in azimuth.
fn connected_regions(pano: &RadianceMap, is_light: &[bool], lum: &[f64]) -> Vec<LightRegion> {
    let (w, h) = (pano.width(), pano.height());
    let mut seen = vec![false; w * h];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !is_light[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut count, mut dir, mut peak) = (0usize, DVec3::ZERO, 0f64);
        while let Some(idx) = stack.pop() {
            let (i, j) = (idx % w, idx / w);
            count += 1;
            dir += pano.texel_direction(i, j);
            peak = peak.max(lum[idx]);
            let mut neighbours = vec![j * w + (i + 1) % w, j * w + (i + w - 1) % w];
            if j > 0 {
                neighbours.push(idx - w);
            }
            if j + 1 < h {
                neighbours.push(idx + w);
            }
            for n in neighbours {
                if is_light[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        regions.push(LightRegion { pixels: count, direction: dir.normalize_or_zero(), peak_luminance: peak });
    }
    regions
}
