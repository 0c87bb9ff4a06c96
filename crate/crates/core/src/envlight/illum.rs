use super::{EnvError, RadianceMap};
use crate::math::luminance;

/// Upper clamp margin: `T ≤ 1 − T_EPSILON` keeps `1/(T − 1)` finite.
pub const T_EPSILON: f64 = 1e-6;

/// Which per-patch similarity determines `T`.
///
/// `Min` makes a large change in any single patch count as a large change
/// of the whole scene. `Max` is the literal extremum of the printed
/// formula and is kept selectable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremal {
    #[default]
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IllumParams {
    /// The map is split into a `grid_n × grid_n` grid of patches.
    pub grid_n: usize,
    pub extremal: Extremal,
}

impl Default for IllumParams {
    fn default() -> Self {
        IllumParams { grid_n: 8, extremal: Extremal::Min }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlluminationDiff {
    pub grid_n: usize,
    /// `T ∈ [0, 1)`.
    pub value: f64,
    /// Row-major per-patch log-SSIM similarities in `[-1, 1]`.
    pub per_patch: Vec<f64>,
}

/// Half-open pixel range of patch `k` when `len` pixels are split `n` ways.
pub fn patch_bounds(len: usize, n: usize, k: usize) -> (usize, usize) {
    (k * len / n, (k + 1) * len / n)
}

/// SSIM of two equally sized samples, using whole-sample statistics and the
/// standard constants `(0.01·D)²`, `(0.03·D)²` for dynamic range `D`.
pub fn ssim(a: &[f64], b: &[f64], dynamic_range: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let mu_a = a.iter().sum::<f64>() / n;
    let mu_b = b.iter().sum::<f64>() / n;
    let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mu_a, y - mu_b);
        var_a += dx * dx;
        var_b += dy * dy;
        cov += dx * dy;
    }
    var_a /= n;
    var_b /= n;
    cov /= n;
    let c1 = (0.01 * dynamic_range).powi(2);
    let c2 = (0.03 * dynamic_range).powi(2);
    ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
}

/// Patch-wise log-SSIM illumination difference between consecutive HDR maps.
pub fn illumination_difference(
    prev: &RadianceMap,
    curr: &RadianceMap,
    params: &IllumParams,
) -> Result<IlluminationDiff, EnvError> {
    let (w, h) = (curr.width(), curr.height());
    if prev.width() != w || prev.height() != h {
        return Err(EnvError::SizeMismatch(prev.width(), prev.height(), w, h));
    }
    let n = params.grid_n;
    if n == 0 || n > w.min(h) {
        return Err(EnvError::PatchGrid { grid_n: n, max: w.min(h) });
    }
    let encode = |m: &RadianceMap| -> Vec<f64> {
        m.image().pixels().iter().map(|&c| luminance(c).max(0.0).ln_1p()).collect()
    };
    let (la, lb) = (encode(prev), encode(curr));
    let (lo, hi) = la
        .iter()
        .chain(&lb)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = if hi - lo > 1e-12 { hi - lo } else { 1.0 };

    let mut per_patch = Vec::with_capacity(n * n);
    let (mut pa, mut pb) = (Vec::new(), Vec::new());
    for py in 0..n {
        let (y0, y1) = patch_bounds(h, n, py);
        for px in 0..n {
            let (x0, x1) = patch_bounds(w, n, px);
            pa.clear();
            pb.clear();
            for y in y0..y1 {
                pa.extend_from_slice(&la[y * w + x0..y * w + x1]);
                pb.extend_from_slice(&lb[y * w + x0..y * w + x1]);
            }
            per_patch.push(ssim(&pa, &pb, range).clamp(-1.0, 1.0));
        }
    }
    let extreme = match params.extremal {
        Extremal::Min => per_patch.iter().copied().fold(f64::INFINITY, f64::min),
        Extremal::Max => per_patch.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    let value = (1.0 - extreme).clamp(0.0, 1.0 - T_EPSILON);
    Ok(IlluminationDiff { grid_n: n, value, per_patch })
}
