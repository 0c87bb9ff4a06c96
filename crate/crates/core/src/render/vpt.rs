use super::Ray;
use crate::envlight::EnvSampler;
use crate::math::Rgb;
use crate::rng::SampleRng;
use crate::volume::Scene;
use glam::DVec3;
use std::f64::consts::PI;

/// Upper bound on free-flight events per ray before falling back to the
/// environment lookup.
pub const DEFAULT_MAX_EVENTS: u32 = 100_000;

/// Henyey–Greenstein phase function; `g = 0` is isotropic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub g: f64,
}

impl Phase {
    pub const ISOTROPIC: Phase = Phase { g: 0.0 };

    /// Density for scattering light travelling along `-to_light` into
    /// `ray_dir`, where `cos = to_light·ray_dir`.
    #[inline]
    pub fn eval(&self, cos: f64) -> f64 {
        let g = self.g;
        if g == 0.0 {
            return 1.0 / (4.0 * PI);
        }
        let denom = 1.0 + g * g - 2.0 * g * cos;
        (1.0 - g * g) / (4.0 * PI * denom * denom.sqrt())
    }
}

#[inline]
fn exponential(rng: &mut SampleRng, rate: f64) -> f64 {
    -(1.0 - rng.uniform()).ln() / rate
}

/// Ratio-tracking estimate of the transmittance from `origin` over
/// `distance` along the unit direction `dir`.
pub fn transmittance_ratio(scene: &Scene, origin: DVec3, dir: DVec3, distance: f64, rng: &mut SampleRng) -> f64 {
    let Some((t0, t1)) = scene.bounds().intersect(origin, dir) else {
        return 1.0;
    };
    let t1 = t1.min(distance);
    let majorant = scene.majorant();
    let mut t = t0;
    let mut tr = 1.0;
    loop {
        t += exponential(rng, majorant);
        if t >= t1 {
            return tr;
        }
        tr *= 1.0 - scene.sigma_t(origin + t * dir) / majorant;
        if tr <= 0.0 {
            return 0.0;
        }
    }
}

/// Unbiased stochastic transmittance between two points.
pub fn transmittance(a: DVec3, b: DVec3, scene: &Scene, rng: &mut SampleRng) -> f64 {
    let d = b - a;
    let len = d.length();
    if len == 0.0 {
        return 1.0;
    }
    transmittance_ratio(scene, a, d / len, len, rng)
}

/// Midpoint-rule `exp(−∫σ_t)` between two points with at least `steps`
/// samples inside the volume.
pub fn transmittance_quadrature(a: DVec3, b: DVec3, scene: &Scene, steps: usize) -> f64 {
    let d = b - a;
    let len = d.length();
    if len == 0.0 {
        return 1.0;
    }
    let dir = d / len;
    let Some((t0, t1)) = scene.bounds().intersect(a, dir) else {
        return 1.0;
    };
    let t1 = t1.min(len);
    if t1 <= t0 {
        return 1.0;
    }
    let dt = (t1 - t0) / steps as f64;
    let tau: f64 = (0..steps).map(|i| scene.sigma_t(a + (t0 + (i as f64 + 0.5) * dt) * dir)).sum::<f64>() * dt;
    (-tau).exp()
}

/// Single-scattering estimate of the radiance arriving along `-ray.dir`.
///
/// Delta tracking finds the first real collision; there one environment
/// direction is drawn and connected through a ratio-tracked shadow ray.
/// Rays that escape return the environment along the ray.
pub fn trace_vpt(ray: &Ray, scene: &Scene, env: &EnvSampler, phase: Phase, max_events: u32, rng: &mut SampleRng) -> Rgb {
    let Some((t0, t1)) = scene.bounds().intersect(ray.origin, ray.dir) else {
        return env.radiance(ray.dir);
    };
    let majorant = scene.majorant();
    let mut t = t0;
    for _ in 0..max_events {
        t += exponential(rng, majorant);
        if t >= t1 {
            return env.radiance(ray.dir);
        }
        let x = ray.at(t);
        let c = scene.classify_at(x);
        if rng.uniform() * majorant < c.sigma_t {
            let light = env.sample(rng.uniform2());
            if !(light.pdf > 0.0) || light.radiance == Rgb::ZERO {
                return Rgb::ZERO;
            }
            let tr = transmittance_ratio(scene, x, light.direction, f64::INFINITY, rng);
            let f = phase.eval(light.direction.dot(ray.dir));
            return c.albedo * light.radiance * (f * tr / light.pdf);
        }
    }
    env.radiance(ray.dir)
}
