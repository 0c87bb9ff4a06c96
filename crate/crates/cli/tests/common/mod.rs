//! Fixture scene, cached high-spp references and a websocket client that
//! drives the `voxbeam serve` binary.

#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, BufReader};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::Duration;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};
use voxbeam_core::imageio::{read_pfm, Image};
use voxbeam_core::pipeline::{frame_file, run_offline, CameraPathConfig, Orbit, SessionConfig, SyntheticVolume, VolumeSource};
use voxbeam_core::render::Eye;

pub const FIXTURE_FRAMES: usize = 60;
pub const REFERENCE_SPP: u32 = 1024;
pub const REFERENCE_SEED: u64 = 1_000_003;

/// The scene every image-quality check uses: two-lobed volume, studio
/// environment, 32×32 per eye, a 60-frame orbit at 2 spp.
pub fn fixture_config(output_dir: &Path) -> SessionConfig {
    let mut cfg = SessionConfig::new(VolumeSource::Synthetic { synthetic: SyntheticVolume::Lobes, resolution: 48 }, 32, 32);
    cfg.spp = 2;
    cfg.seed = 7;
    cfg.output_dir = output_dir.to_path_buf();
    cfg.output.png = false;
    cfg.environment.panorama_height = 64;
    cfg.camera = CameraPathConfig::Orbit(Orbit { frames: FIXTURE_FRAMES, ..Orbit::default() });
    cfg
}

pub fn cache_root() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-refs")
}

/// High-spp, undenoised renders of `cfg`'s camera path, generated once and
/// reused while the configuration is unchanged.
pub fn reference_dir(tag: &str, cfg: &SessionConfig) -> PathBuf {
    let mut rcfg = cfg.clone();
    rcfg.spp = REFERENCE_SPP;
    rcfg.seed = REFERENCE_SEED;
    rcfg.denoise = false;
    rcfg.output = Default::default();
    rcfg.output.png = false;
    rcfg.output_dir = PathBuf::new();
    let mut h = DefaultHasher::new();
    rcfg.to_toml().hash(&mut h);
    let dir = cache_root().join(format!("{tag}-{:016x}", h.finish()));
    if !dir.join("manifest.toml").is_file() {
        eprintln!("generating {REFERENCE_SPP}-spp references in {} (one-off)", dir.display());
        rcfg.output_dir = dir.clone();
        run_offline(&rcfg).expect("reference render");
    }
    dir
}

pub fn load_eye(dir: &Path, frame: u64, eye: Eye) -> Image {
    read_pfm(dir.join(frame_file(frame, Some(eye), ".pfm"))).expect("readable frame")
}

/// Running `voxbeam serve --once` plus a connected client.
pub struct ServeClient {
    child: Child,
    pub ws: WebSocket<MaybeTlsStream<TcpStream>>,
}

impl ServeClient {
    pub fn start(config_path: &Path) -> ServeClient {
        let mut child = Command::new(env!("CARGO_BIN_EXE_voxbeam"))
            .args(["serve", "--once", "--port", "0", "--config"])
            .arg(config_path)
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .spawn()
            .expect("spawn voxbeam serve");
        let mut line = String::new();
        BufReader::new(child.stdout.take().expect("stdout")).read_line(&mut line).expect("listening line");
        let url = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected banner {line:?}")).to_string();
        let (ws, _) = tungstenite::connect(url.as_str()).expect("websocket connect");
        if let MaybeTlsStream::Plain(s) = ws.get_ref() {
            s.set_read_timeout(Some(Duration::from_secs(60))).unwrap();
        }
        ServeClient { child, ws }
    }

    pub fn send(&mut self, text: &str) {
        self.ws.send(Message::Text(text.to_string())).expect("send");
    }

    pub fn send_binary(&mut self, bytes: Vec<u8>) {
        self.ws.send(Message::Binary(bytes)).expect("send");
    }

    /// Next text or binary message.
    pub fn recv(&mut self) -> Message {
        loop {
            match self.ws.read().expect("read") {
                m @ (Message::Text(_) | Message::Binary(_)) => return m,
                _ => {}
            }
        }
    }

    /// Next text message parsed as JSON, skipping binary frames.
    pub fn recv_json(&mut self) -> serde_json::Value {
        loop {
            if let Message::Text(t) = self.recv() {
                return serde_json::from_str(&t).expect("json");
            }
        }
    }

    pub fn finish(mut self) {
        self.ws.close(None).ok();
        while self.ws.read().is_ok() {}
        let status = self.child.wait().expect("server exit");
        assert!(status.success(), "server exited with {status}");
    }
}

impl Drop for ServeClient {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            self.child.kill().ok();
            self.child.wait().ok();
        }
    }
}

pub fn write_config(dir: &Path, cfg: &SessionConfig) -> PathBuf {
    let path = dir.join("session.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path
}
