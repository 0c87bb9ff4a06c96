use super::{VolumeError, VolumeGrid};
use glam::DVec3;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Sidecar describing a raw volume file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub bits: u32,
    #[serde(default)]
    pub origin: [f64; 3],
    /// Path of the raw array, relative to the header's directory.
    pub data_file: String,
}

impl VolumeHeader {
    pub fn parse(text: &str) -> Result<Self, VolumeError> {
        let h: VolumeHeader = toml::from_str(text).map_err(|e| VolumeError::Header(e.message().to_string()))?;
        if h.dims.iter().any(|&d| d < 2) {
            return Err(VolumeError::Dims(h.dims));
        }
        if !h.spacing.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return Err(VolumeError::Spacing(h.spacing));
        }
        if h.bits != 8 && h.bits != 16 {
            return Err(VolumeError::Bits(h.bits));
        }
        Ok(h)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("header serialises")
    }

    pub fn decode(&self, raw: &[u8]) -> Result<VolumeGrid, VolumeError> {
        VolumeGrid::from_raw(
            self.dims,
            DVec3::from_array(self.spacing),
            DVec3::from_array(self.origin),
            self.bits,
            raw,
        )
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> VolumeError + '_ {
    move |source| VolumeError::Io { path: path.display().to_string(), source }
}

/// Load a volume from its header file.
pub fn load_volume(header_path: impl AsRef<Path>) -> Result<VolumeGrid, VolumeError> {
    let header_path = header_path.as_ref();
    let text = std::fs::read_to_string(header_path).map_err(io_err(header_path))?;
    let header = VolumeHeader::parse(&text)?;
    let data_path = header_path.parent().unwrap_or(Path::new(".")).join(&header.data_file);
    let raw = std::fs::read(&data_path).map_err(io_err(&data_path))?;
    header.decode(&raw)
}

impl VolumeGrid {
    /// Write `<stem>.toml` and `<stem>.raw` into `dir`; returns the header path.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<std::path::PathBuf, VolumeError> {
        let dir = dir.as_ref();
        let header = VolumeHeader {
            dims: self.dims(),
            spacing: self.spacing().to_array(),
            bits: self.bits(),
            origin: self.origin().to_array(),
            data_file: format!("{stem}.raw"),
        };
        let raw_path = dir.join(&header.data_file);
        std::fs::write(&raw_path, self.to_raw()).map_err(io_err(&raw_path))?;
        let header_path = dir.join(format!("{stem}.toml"));
        std::fs::write(&header_path, header.to_toml()).map_err(io_err(&header_path))?;
        Ok(header_path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_header() {
        let h = VolumeHeader::parse(
            "dims = [4, 3, 2]\nspacing = [1.0, 0.5, 2.0]\nbits = 16\norigin = [0.0, 1.0, 0.0]\ndata_file = \"v.raw\"\n",
        )
        .unwrap();
        assert_eq!(h.dims, [4, 3, 2]);
        assert_eq!(h.origin, [0.0, 1.0, 0.0]);
        assert!(matches!(
            VolumeHeader::parse("dims = [4, 3, 1]\nspacing = [1.0, 1.0, 1.0]\nbits = 8\ndata_file = \"v\"\n"),
            Err(VolumeError::Dims(_))
        ));
        assert!(matches!(
            VolumeHeader::parse("dims = [4, 3, 2]\nspacing = [1.0, 1.0, 1.0]\nbits = 32\ndata_file = \"v\"\n"),
            Err(VolumeError::Bits(32))
        ));
        assert!(VolumeHeader::parse("dims = 3").is_err());
    }

    #[test]
    fn save_and_load_bit_exact() {
        let g = VolumeGrid::from_fn([5, 4, 3], DVec3::new(0.1, 0.2, 0.3), DVec3::new(1.0, 2.0, 3.0), |p| {
            (p.x * 3.0 + p.y).sin().abs()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let header = g.save(dir.path(), "vol").unwrap();
        let back = load_volume(&header).unwrap();
        assert_eq!(back.dims(), g.dims());
        assert_eq!(back.origin(), g.origin());
        assert_eq!(back.to_raw(), g.to_raw());
        assert!(matches!(load_volume(dir.path().join("missing.toml")), Err(VolumeError::Io { .. })));
    }
}
