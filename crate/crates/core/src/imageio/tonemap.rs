use super::Image;

/// Display gamma applied after tone mapping.
pub const GAMMA: f64 = 2.2;

/// Reinhard `c / (1 + c)` followed by gamma encoding, per channel.
#[inline]
pub fn tonemap_value(v: f64) -> f64 {
    let v = v.max(0.0);
    (v / (1.0 + v)).powf(1.0 / GAMMA)
}

/// Tone-mapped 8-bit RGB, row-major, top row first.
pub fn tonemap_rgb8(img: &Image) -> Vec<u8> {
    img.pixels()
        .iter()
        .flat_map(|c| [c.x, c.y, c.z])
        .map(|v| (tonemap_value(v) * 255.0).round() as u8)
        .collect()
}
