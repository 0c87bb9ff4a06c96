use super::{march_steps, Ray};
use crate::envlight::{RadianceMap, Sampling};
use crate::math::Rgb;
use crate::volume::Scene;
use glam::DVec3;
use serde::{Deserialize, Serialize};

/// Compositing stops once the remaining transmittance drops below this.
pub const TERMINATION_TRANSMITTANCE: f64 = 1e-4;

/// Phong coefficients for the headlight baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhongParams {
    pub ambient: f64,
    pub diffuse: f64,
    pub specular: f64,
    pub shininess: f64,
}

impl Default for PhongParams {
    fn default() -> Self {
        PhongParams { ambient: 0.2, diffuse: 0.7, specular: 0.3, shininess: 32.0 }
    }
}

/// Gradients shorter than this count as zero.
pub const MIN_GRADIENT: f64 = 1e-6;

/// Separate Phong terms `(ambient, diffuse, specular)` for a white light.
///
/// `normal` need not be unit length; a zero normal yields the ambient term
/// only. Lighting is two-sided.
pub fn phong_terms(normal: DVec3, to_light: DVec3, to_eye: DVec3, p: &PhongParams) -> (f64, f64, f64) {
    let len = normal.length();
    if !(len > MIN_GRADIENT) {
        return (p.ambient, 0.0, 0.0);
    }
    let n = normal / len;
    let n_dot_l = n.dot(to_light);
    let lambert = n_dot_l.abs();
    let n = if n_dot_l < 0.0 { -n } else { n };
    let reflected = 2.0 * lambert * n - to_light;
    let spec = reflected.dot(to_eye).max(0.0).powf(p.shininess);
    (p.ambient, p.diffuse * lambert, p.specular * spec)
}

/// Front-to-back over-operator along the ray at a fixed step. `emit`
/// returns the colour of a sample given its position and classified albedo.
/// The residual transmittance multiplies `background`.
fn composite(ray: &Ray, scene: &Scene, step: f64, background: Rgb, mut emit: impl FnMut(DVec3, Rgb) -> Rgb) -> Rgb {
    let Some((t0, t1)) = scene.bounds().intersect(ray.origin, ray.dir) else {
        return background;
    };
    let n = march_steps(t1 - t0, step);
    let dt = (t1 - t0) / n as f64;
    let mut colour = Rgb::ZERO;
    let mut transmittance = 1.0;
    for i in 0..n {
        let p = ray.at(t0 + (i as f64 + 0.5) * dt);
        let c = scene.classify_at(p);
        if c.sigma_t <= 0.0 {
            continue;
        }
        let alpha = 1.0 - (-c.sigma_t * dt).exp();
        colour += transmittance * alpha * emit(p, c.albedo);
        transmittance *= 1.0 - alpha;
        if transmittance < TERMINATION_TRANSMITTANCE {
            break;
        }
    }
    colour + transmittance * background
}

/// Self-luminous compositing of the transfer-function colour.
pub fn shade_absorption_emission(ray: &Ray, scene: &Scene, step: f64, background: Rgb) -> Rgb {
    composite(ray, scene, step, background, |_, albedo| albedo)
}

/// Headlight Phong on the normalised gradient, no shadows.
pub fn shade_gradient_phong(ray: &Ray, scene: &Scene, step: f64, phong: &PhongParams, background: Rgb) -> Rgb {
    let to_light = -ray.dir;
    composite(ray, scene, step, background, |p, albedo| {
        let (a, d, s) = phong_terms(scene.grid.gradient(p), to_light, to_light, phong);
        albedo * (a + d) + Rgb::splat(s)
    })
}

/// Diffuse image-based lighting from a pre-filtered panorama.
#[derive(Debug, Clone)]
pub struct PrefilteredLight {
    level: RadianceMap,
    ambient: Rgb,
}

impl PrefilteredLight {
    /// Uses the blurriest of `levels`.
    ///
    /// # Panics
    /// If `levels` is empty.
    pub fn new(levels: &[RadianceMap]) -> Self {
        let level = levels.last().expect("at least one prefiltered level").clone();
        let img = level.image();
        let total: f64 = (0..img.height()).map(|j| level.texel_solid_angle(j) * img.width() as f64).sum();
        let ambient = (0..img.height())
            .flat_map(|j| (0..img.width()).map(move |i| (i, j)))
            .map(|(i, j)| img.get(i, j) * level.texel_solid_angle(j))
            .sum::<Rgb>()
            / total;
        PrefilteredLight { level, ambient }
    }

    pub fn level(&self) -> &RadianceMap {
        &self.level
    }

    /// Solid-angle-weighted mean of the level, used where no normal exists.
    pub fn ambient(&self) -> Rgb {
        self.ambient
    }

    /// Irradiance proxy for a sample with the given density gradient. The
    /// outward normal points down the gradient.
    pub fn irradiance(&self, gradient: DVec3) -> Rgb {
        let len = gradient.length();
        if !(len > MIN_GRADIENT) {
            return self.ambient;
        }
        self.level.lookup(-gradient / len, Sampling::Bilinear)
    }
}

pub fn shade_prefiltered_env(ray: &Ray, scene: &Scene, step: f64, light: &PrefilteredLight, background: Rgb) -> Rgb {
    composite(ray, scene, step, background, |p, albedo| albedo * light.irradiance(scene.grid.gradient(p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envlight::{MapFrame, MapKind};
    use crate::imageio::Image;
    use crate::volume::{synthetic, TfNode, TransferFunction, VolumeGrid};

    fn ray_x() -> Ray {
        Ray { origin: DVec3::new(-3.0, 0.0, 0.0), dir: DVec3::X }
    }

    fn flat_tf(rgb: [f64; 3], sigma_max: f64) -> TransferFunction {
        TransferFunction::new(
            vec![TfNode { scalar: 0.0, rgb, extinction: 0.0 }, TfNode { scalar: 1.0, rgb, extinction: 1.0 }],
            sigma_max,
        )
        .unwrap()
    }

    #[test]
    fn empty_volume_shows_background() {
        let scene = Scene::new(synthetic::empty(8), flat_tf([1.0, 0.0, 0.0], 10.0));
        let bg = Rgb::new(0.3, 0.6, 0.9);
        assert_eq!(shade_absorption_emission(&ray_x(), &scene, 0.01, bg), bg);
        assert_eq!(shade_gradient_phong(&ray_x(), &scene, 0.01, &PhongParams::default(), bg), bg);
        let miss = Ray { origin: DVec3::new(-3.0, 5.0, 0.0), dir: DVec3::X };
        assert_eq!(shade_absorption_emission(&miss, &scene, 0.01, bg), bg);
    }

    #[test]
    fn opaque_first_sample_gives_its_colour() {
        let scene = Scene::new(synthetic::constant(8, 1.0, 1.0), flat_tf([0.25, 0.5, 0.75], 1e6));
        let c = shade_absorption_emission(&ray_x(), &scene, 0.01, Rgb::ONE);
        assert_eq!(c, Rgb::new(0.25, 0.5, 0.75));
    }

    #[test]
    fn two_slabs_match_hand_compositing() {
        // Voxels along x: gap, slab A (value 1), gap, slab B (value 0.75), gap.
        // With a step equal to the spacing every sample sits midway between
        // two voxels, so boundary samples read 0.5 or 0.375 and are invisible.
        let profile = [0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.75, 0.75, 0.75, 0.75, 0.0];
        let n = profile.len();
        let h = 0.1;
        let grid = VolumeGrid::from_fn([n, 2, 2], DVec3::splat(h), DVec3::new(0.0, -0.05, -0.05), |p| {
            profile[((p.x / h).round() as usize).min(n - 1)]
        })
        .unwrap();
        let node = |scalar, rgb, extinction| TfNode { scalar, rgb, extinction };
        let tf = TransferFunction::new(
            vec![
                node(0.0, [0.0; 3], 0.0),
                node(0.6, [0.0; 3], 0.0),
                node(0.75, [0.2, 0.9, 0.1], 0.5),
                node(1.0, [0.8, 0.1, 0.3], 1.0),
            ],
            4.0,
        )
        .unwrap();
        let scene = Scene::new(grid, tf);
        let bg = Rgb::new(0.5, 0.5, 1.0);
        let ray = Ray { origin: DVec3::new(-1.0, 0.0, 0.0), dir: DVec3::X };
        let got = shade_absorption_emission(&ray, &scene, h, bg);
        // Slab A: two interior samples at σ = 4; slab B: three at σ = 2.
        let a = 1.0 - (-4.0 * 2.0 * h).exp();
        let b = 1.0 - (-2.0 * 3.0 * h).exp();
        let ca = Rgb::new(0.8, 0.1, 0.3);
        let cb = Rgb::new(0.2, 0.9, 0.1);
        let expected = ca * a + (1.0 - a) * (cb * b + (1.0 - b) * bg);
        assert!((got - expected).abs().max_element() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn phong_terms_by_hand() {
        let p = PhongParams { ambient: 0.2, diffuse: 0.7, specular: 0.0, shininess: 32.0 };
        let l = DVec3::Z;
        assert_eq!(phong_terms(DVec3::ZERO, l, l, &p), (0.2, 0.0, 0.0));
        let (_, d, _) = phong_terms(DVec3::Z * 3.0, l, l, &p);
        assert!((d - 0.7).abs() < 1e-15);
        let oblique = DVec3::new(60f64.to_radians().sin(), 0.0, 60f64.to_radians().cos());
        let (_, d, _) = phong_terms(oblique, l, l, &p);
        assert!((d - 0.35).abs() < 1e-12);
        let (_, d, _) = phong_terms(-DVec3::Z, l, l, &p);
        assert!((d - 0.7).abs() < 1e-15);
        let full = PhongParams::default();
        let (_, _, s) = phong_terms(DVec3::Z, l, l, &full);
        assert!((s - full.specular).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_interior_is_ambient_only() {
        let scene = Scene::new(synthetic::constant(16, 2.0, 1.0), flat_tf([1.0, 1.0, 1.0], 1.0));
        // Interior point: gradient vanishes.
        let g = scene.grid.gradient(DVec3::new(0.1, 0.2, -0.3));
        assert_eq!(g, DVec3::ZERO);
        let (a, d, s) = phong_terms(g, DVec3::X, DVec3::X, &PhongParams::default());
        assert_eq!((a, d, s), (0.2, 0.0, 0.0));
    }

    fn level(f: impl Fn(DVec3) -> Rgb) -> RadianceMap {
        RadianceMap::from_fn(16, MapKind::Ldr, MapFrame::Warped, f).unwrap()
    }

    #[test]
    fn constant_level_ignores_gradient() {
        let light = PrefilteredLight::new(&[level(|_| Rgb::splat(0.4))]);
        for g in [DVec3::X, DVec3::new(-1.0, 2.0, 0.5), DVec3::ZERO] {
            assert!((light.irradiance(g) - Rgb::splat(0.4)).abs().max_element() < 1e-12);
        }
        let scene = Scene::new(synthetic::soft_sphere(16, 0.3, 0.2), flat_tf([0.5, 0.5, 0.5], 30.0));
        let r1 = shade_prefiltered_env(&ray_x(), &scene, 0.01, &light, Rgb::ZERO);
        let r2 = shade_absorption_emission(&ray_x(), &scene, 0.01, Rgb::ZERO) * 0.4;
        assert!((r1 - r2).abs().max_element() < 1e-12);
    }

    #[test]
    fn black_level_renders_black() {
        let light = PrefilteredLight::new(&[level(|_| Rgb::ZERO)]);
        let scene = Scene::new(synthetic::soft_sphere(16, 0.3, 0.2), flat_tf([0.5, 0.5, 0.5], 30.0));
        assert_eq!(shade_prefiltered_env(&ray_x(), &scene, 0.01, &light, Rgb::ZERO), Rgb::ZERO);
    }

    #[test]
    fn axis_gradient_reads_level_along_outward_normal() {
        let mut img = Image::new(32, 16);
        img.set(8, 8, Rgb::ONE);
        let map = RadianceMap::new(img, MapKind::Ldr, MapFrame::Warped).unwrap();
        let blurred = crate::envlight::prefilter(&map, 2, 1.5).unwrap();
        let light = PrefilteredLight::new(&blurred);
        let outward = DVec3::NEG_X;
        assert_eq!(light.irradiance(-outward * 2.0), light.level().lookup(outward, Sampling::Bilinear));
        assert!(light.irradiance(DVec3::X).x > light.irradiance(DVec3::NEG_X).x);
    }
}
