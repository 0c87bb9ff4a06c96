use super::VolumeError;
use crate::math::Rgb;
use glam::DVec3;
use serde::{Deserialize, Serialize};

/// One control point of a piecewise-linear transfer function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfNode {
    pub scalar: f64,
    pub rgb: [f64; 3],
    /// Fraction of the global extinction `sigma_max`, in `[0, 1]`.
    pub extinction: f64,
}

/// Optical properties at one point of the volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classified {
    pub albedo: Rgb,
    pub sigma_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TfFile", into = "TfFile")]
pub struct TransferFunction {
    nodes: Vec<TfNode>,
    sigma_max: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TfFile {
    sigma_max: f64,
    nodes: Vec<TfNode>,
}

impl TryFrom<TfFile> for TransferFunction {
    type Error = VolumeError;
    fn try_from(f: TfFile) -> Result<Self, Self::Error> {
        TransferFunction::new(f.nodes, f.sigma_max)
    }
}

impl From<TransferFunction> for TfFile {
    fn from(tf: TransferFunction) -> Self {
        TfFile { sigma_max: tf.sigma_max, nodes: tf.nodes }
    }
}

impl TransferFunction {
    pub fn new(nodes: Vec<TfNode>, sigma_max: f64) -> Result<Self, VolumeError> {
        let bad = |m: &str| Err(VolumeError::Transfer(m.to_string()));
        if !(sigma_max > 0.0 && sigma_max.is_finite()) {
            return bad("sigma_max must be positive and finite");
        }
        if nodes.len() < 2 {
            return bad("at least two nodes are required");
        }
        if nodes[0].scalar != 0.0 || nodes[nodes.len() - 1].scalar != 1.0 {
            return bad("node scalars must start at 0 and end at 1");
        }
        if nodes.windows(2).any(|w| !(w[0].scalar < w[1].scalar)) {
            return bad("node scalars must be strictly increasing");
        }
        for n in &nodes {
            if !n.rgb.iter().all(|c| (0.0..=1.0).contains(c)) {
                return bad("node colours must lie in [0, 1]");
            }
            if !(0.0..=1.0).contains(&n.extinction) {
                return bad("node extinction scales must lie in [0, 1]");
            }
        }
        Ok(TransferFunction { nodes, sigma_max })
    }

    pub fn parse(text: &str) -> Result<Self, VolumeError> {
        toml::from_str(text).map_err(|e| VolumeError::Transfer(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("transfer function serialises")
    }

    pub fn nodes(&self) -> &[TfNode] {
        &self.nodes
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn with_sigma_max(&self, sigma_max: f64) -> Result<Self, VolumeError> {
        Self::new(self.nodes.clone(), sigma_max)
    }

    /// Piecewise-linear lookup; `s` is clamped into `[0, 1]`.
    #[inline]
    pub fn classify(&self, s: f64) -> Classified {
        let s = if s.is_nan() { 0.0 } else { s.clamp(0.0, 1.0) };
        let nodes = &self.nodes;
        let mut i = 1;
        while i < nodes.len() - 1 && nodes[i].scalar < s {
            i += 1;
        }
        let (a, b) = (&nodes[i - 1], &nodes[i]);
        let t = (s - a.scalar) / (b.scalar - a.scalar);
        let ca = DVec3::from_array(a.rgb);
        let cb = DVec3::from_array(b.rgb);
        Classified {
            albedo: ca + (cb - ca) * t,
            sigma_t: (a.extinction + (b.extinction - a.extinction) * t) * self.sigma_max,
        }
    }

    /// Lipschitz constant of the lookup, per output: (colour, extinction).
    pub fn lipschitz_bound(&self) -> (f64, f64) {
        self.nodes.windows(2).fold((0.0, 0.0), |(kc, ke), w| {
            let ds = w[1].scalar - w[0].scalar;
            let dc = (DVec3::from_array(w[1].rgb) - DVec3::from_array(w[0].rgb)).abs().max_element();
            let de = (w[1].extinction - w[0].extinction).abs() * self.sigma_max;
            (f64::max(kc, dc / ds), f64::max(ke, de / ds))
        })
    }

    /// Named built-in transfer functions.
    pub fn preset(name: &str) -> Option<Self> {
        let node = |scalar, rgb, extinction| TfNode { scalar, rgb, extinction };
        let (nodes, sigma_max) = match name {
            "default" => (
                vec![
                    node(0.0, [0.0, 0.0, 0.0], 0.0),
                    node(0.2, [0.9, 0.6, 0.4], 0.0),
                    node(0.5, [0.95, 0.75, 0.6], 0.6),
                    node(1.0, [0.95, 0.9, 0.85], 1.0),
                ],
                40.0,
            ),
            "bone" => (
                vec![
                    node(0.0, [0.0, 0.0, 0.0], 0.0),
                    node(0.45, [0.8, 0.75, 0.65], 0.0),
                    node(0.6, [0.95, 0.93, 0.88], 1.0),
                    node(1.0, [1.0, 1.0, 0.95], 1.0),
                ],
                120.0,
            ),
            "soft" => (
                vec![
                    node(0.0, [0.0, 0.0, 0.0], 0.0),
                    node(0.1, [0.5, 0.7, 0.9], 0.05),
                    node(1.0, [0.7, 0.85, 1.0], 0.5),
                ],
                20.0,
            ),
            _ => return None,
        };
        Some(Self::new(nodes, sigma_max).expect("preset is valid"))
    }

    pub const PRESETS: &'static [&'static str] = &["default", "bone", "soft"];
}
