use super::{EnvError, RadianceMap};
use crate::imageio::Image;
use crate::math::Rgb;

/// Normalised discrete Gaussian with radius `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let raw: Vec<f64> = (-radius..=radius).map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Separable blur: wraps in azimuth, clamps at the poles.
fn blur(img: &Image, sigma: f64) -> Image {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let (w, h) = (img.width() as i64, img.height() as i64);
    let horiz = Image::from_fn(w as usize, h as usize, |x, y| {
        k.iter()
            .enumerate()
            .map(|(t, &wt)| wt * img.get((x as i64 + t as i64 - r).rem_euclid(w) as usize, y))
            .sum()
    });
    Image::from_fn(w as usize, h as usize, |x, y| {
        k.iter()
            .enumerate()
            .map(|(t, &wt)| wt * horiz.get(x, (y as i64 + t as i64 - r).clamp(0, h - 1) as usize))
            .sum()
    })
}

/// 2×2 box reduction.
fn downsample(img: &Image) -> Image {
    let (w, h) = ((img.width() / 2).max(1), (img.height() / 2).max(1));
    Image::from_fn(w, h, |x, y| {
        let xs = [2 * x, (2 * x + 1).min(img.width() - 1)];
        let ys = [2 * y, (2 * y + 1).min(img.height() - 1)];
        let mut acc = Rgb::ZERO;
        for &yy in &ys {
            for &xx in &xs {
                acc += img.get(xx, yy);
            }
        }
        acc / 4.0
    })
}

/// Mip pyramid of successively blurred panoramas. Level 0 is the input;
/// level `l` blurs level `l−1` with `σ = base_sigma·2^(l−1)` (in level
/// `l−1` pixels) and halves the resolution.
pub fn prefilter(pano: &RadianceMap, levels: usize, base_sigma: f64) -> Result<Vec<RadianceMap>, EnvError> {
    let max = (pano.height() as f64).log2().floor() as usize;
    if levels == 0 || levels > max {
        return Err(EnvError::Levels { levels, max });
    }
    let mut out = vec![pano.clone()];
    for l in 1..levels {
        let sigma = base_sigma * 2f64.powi(l as i32 - 1);
        let next = downsample(&blur(out[l - 1].image(), sigma));
        out.push(pano.with_image(next, pano.frame()));
    }
    Ok(out)
}
