use super::Ray;
use crate::imageio::Image;
use crate::math::Rgb;
use crate::volume::Scene;
use glam::DVec3;

/// Accumulated opacity at which the first-scatter proxy is placed.
pub const HIT_OPACITY: f64 = 0.5;

/// Per-pixel surface proxy used by reprojection and the denoiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GSample {
    pub albedo: Rgb,
    pub gradient: DVec3,
    /// Camera-space depth of `position`; `+∞` for a miss.
    pub depth: f64,
    pub position: DVec3,
    /// Accumulated opacity along the whole ray.
    pub coverage: f64,
}

impl GSample {
    pub const MISS: GSample = GSample {
        albedo: DVec3::ZERO,
        gradient: DVec3::ZERO,
        depth: f64::INFINITY,
        position: DVec3::ZERO,
        coverage: 0.0,
    };

    #[inline]
    pub fn is_covered(&self) -> bool {
        self.depth.is_finite()
    }
}

/// Deterministic first-scatter proxy: march at `step`, accumulate opacity
/// `1 − exp(−∫σ_t)`, and place `x` where it first reaches one half. The
/// crossing is solved exactly inside the step under a constant extinction.
pub fn gbuffer_first_scatter(ray: &Ray, scene: &Scene, step: f64, forward: DVec3) -> GSample {
    let Some((t0, t1)) = scene.bounds().intersect(ray.origin, ray.dir) else {
        return GSample::MISS;
    };
    let n = super::march_steps(t1 - t0, step);
    let dt = (t1 - t0) / n as f64;
    let mut tau = 0.0;
    let mut hit: Option<f64> = None;
    let tau_hit = -(1.0 - HIT_OPACITY).ln();
    for i in 0..n {
        let ta = t0 + i as f64 * dt;
        let sigma = scene.sigma_t(ray.at(ta + 0.5 * dt));
        let next = tau + sigma * dt;
        if hit.is_none() && next >= tau_hit && sigma > 0.0 {
            hit = Some(ta + (tau_hit - tau) / sigma);
        }
        tau = next;
    }
    let coverage = 1.0 - (-tau).exp();
    match hit {
        None => GSample { coverage, ..GSample::MISS },
        Some(t) => {
            let x = ray.at(t);
            GSample {
                albedo: scene.albedo(x),
                gradient: scene.grid.gradient(x),
                depth: t * ray.dir.dot(forward),
                position: x,
                coverage,
            }
        }
    }
}

/// Per-eye G-buffer, row-major with row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    width: usize,
    height: usize,
    samples: Vec<GSample>,
}

impl GBuffer {
    /// # Panics
    /// If `samples.len() != width * height`.
    pub fn from_vec(width: usize, height: usize, samples: Vec<GSample>) -> Self {
        assert_eq!(samples.len(), width * height, "G-buffer size mismatch");
        GBuffer { width, height, samples }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[GSample] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &GSample {
        &self.samples[y * self.width + x]
    }

    fn channel(&self, f: impl Fn(&GSample) -> Rgb) -> Image {
        Image::from_vec(self.width, self.height, self.samples.iter().map(f).collect())
    }

    pub fn albedo_image(&self) -> Image {
        self.channel(|s| s.albedo)
    }

    pub fn gradient_image(&self) -> Image {
        self.channel(|s| s.gradient)
    }

    pub fn position_image(&self) -> Image {
        self.channel(|s| s.position)
    }

    /// `(depth, coverage, 0)` per pixel.
    pub fn depth_coverage_image(&self) -> Image {
        self.channel(|s| DVec3::new(s.depth, s.coverage, 0.0))
    }

    /// Reassemble from the four dumped images.
    pub fn from_images(albedo: &Image, gradient: &Image, position: &Image, depth_coverage: &Image) -> Option<Self> {
        let (w, h) = (albedo.width(), albedo.height());
        if ![gradient, position, depth_coverage].iter().all(|i| i.width() == w && i.height() == h) {
            return None;
        }
        let samples = (0..w * h)
            .map(|k| {
                let dc = depth_coverage.pixels()[k];
                GSample {
                    albedo: albedo.pixels()[k],
                    gradient: gradient.pixels()[k],
                    depth: if dc.x.is_finite() { dc.x } else { f64::INFINITY },
                    position: position.pixels()[k],
                    coverage: dc.y,
                }
            })
            .collect();
        Some(GBuffer::from_vec(w, h, samples))
    }
}
