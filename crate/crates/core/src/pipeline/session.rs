use super::camera_path::Pose;
use super::config::{Pacing, SessionConfig};
use super::environment::EnvSource;
use super::executor::Pipeline;
use super::offline::frame_file;
use super::PipelineError;
use crate::envlight::{MapFrame, MapKind, RadianceMap};
use crate::imageio::{decode_png, write_pfm};
use crate::render::{Eye, RenderMode};
use crate::volume::TransferFunction;
use crate::wire::{encode_packet, parse_control, ControlError, ControlMessage, Encoding, EnvSelector, ParamsOverride, ServerMessage};
use glam::DVec3;
use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

/// Control state received since the last frame. Later messages of the same
/// kind replace earlier ones; parameter overrides merge field by field.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PendingState {
    pub pose: Option<Pose>,
    pub volume_offset: Option<DVec3>,
    pub mode: Option<RenderMode>,
    pub env: Option<EnvSelector>,
    pub tf: Option<String>,
    pub params: Option<ParamsOverride>,
}

impl PendingState {
    pub fn is_empty(&self) -> bool {
        *self == PendingState::default()
    }

    pub fn merge(&mut self, msg: ControlMessage) -> Result<(), ControlError> {
        match msg {
            ControlMessage::Pose { .. } => {
                let (position, orientation) = msg.pose().expect("pose message")?;
                self.pose = Some(Pose { position, orientation });
            }
            ControlMessage::VolumeOffset { offset } => self.volume_offset = Some(DVec3::from_array(offset)),
            ControlMessage::Mode { mode } => self.mode = Some(mode),
            ControlMessage::Env(sel) => self.env = Some(sel),
            ControlMessage::Tf { name } => self.tf = Some(name),
            ControlMessage::Params(p) => {
                let merged = self.params.get_or_insert_with(ParamsOverride::default);
                macro_rules! take {
                    ($($f:ident),*) => { $( if p.$f.is_some() { merged.$f = p.$f; } )* };
                }
                take!(radius, sigma_albedo, sigma_gradient, sigma_depth, alpha, beta, temporal_multiplier, depth_tolerance, albedo_tolerance);
            }
        }
        Ok(())
    }
}

/// Work handed from the connection to the render loop.
#[derive(Debug, Default)]
pub struct Taken {
    pub state: PendingState,
    pub uploads: Vec<Vec<u8>>,
    /// Pose to render now; `None` when only state changes or uploads arrived.
    pub pose: Option<Pose>,
}

#[derive(Debug)]
struct InboxState {
    pending: PendingState,
    /// On-demand poses, one frame each.
    poses: VecDeque<Pose>,
    uploads: Vec<Vec<u8>>,
    latest: Pose,
    closed: bool,
}

/// Messages from the viewer waiting for the render loop.
#[derive(Debug)]
pub struct SharedInbox {
    pacing: Pacing,
    state: Mutex<InboxState>,
    ready: Condvar,
}

impl SharedInbox {
    pub fn new(pacing: Pacing, initial: Pose) -> Arc<Self> {
        Arc::new(SharedInbox {
            pacing,
            state: Mutex::new(InboxState {
                pending: PendingState::default(),
                poses: VecDeque::new(),
                uploads: Vec::new(),
                latest: initial,
                closed: false,
            }),
            ready: Condvar::new(),
        })
    }

    /// Parse and queue one control message; invalid messages change nothing.
    pub fn push_text(&self, text: &str) -> Result<(), ControlError> {
        let msg = parse_control(text)?;
        let mut s = self.state.lock().expect("inbox lock");
        if self.pacing == Pacing::OnDemand {
            if let Some(pose) = msg.pose() {
                let (position, orientation) = pose?;
                s.poses.push_back(Pose { position, orientation });
                self.ready.notify_all();
                return Ok(());
            }
        }
        s.pending.merge(msg)?;
        self.ready.notify_all();
        Ok(())
    }

    pub fn push_upload(&self, bytes: Vec<u8>) {
        self.state.lock().expect("inbox lock").uploads.push(bytes);
        self.ready.notify_all();
    }

    pub fn close(&self) {
        self.state.lock().expect("inbox lock").closed = true;
        self.ready.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.state.lock().expect("inbox lock").closed
    }

    /// Next unit of work, or `None` once closed. Continuous pacing returns
    /// immediately with the latest pose; on-demand pacing blocks until a
    /// pose, an upload or a state change arrives.
    pub fn take(&self) -> Option<Taken> {
        let mut s = self.state.lock().expect("inbox lock");
        loop {
            if s.closed {
                return None;
            }
            let state = std::mem::take(&mut s.pending);
            let uploads = std::mem::take(&mut s.uploads);
            match self.pacing {
                Pacing::Continuous => {
                    if let Some(p) = state.pose {
                        s.latest = p;
                    }
                    return Some(Taken { state, uploads, pose: Some(s.latest) });
                }
                Pacing::OnDemand => {
                    let pose = s.poses.pop_front();
                    if pose.is_some() || !uploads.is_empty() || !state.is_empty() {
                        return Some(Taken { state, uploads, pose });
                    }
                    s = self.ready.wait(s).expect("inbox lock");
                }
            }
        }
    }
}

/// One outgoing websocket message.
#[derive(Debug, Clone, PartialEq)]
pub enum SessionEvent {
    Binary(Vec<u8>),
    Text(String),
}

#[derive(Debug, Default)]
struct OutboxState {
    frames: VecDeque<Vec<SessionEvent>>,
    messages: VecDeque<String>,
    dropped: u64,
}

/// Render loop → connection. Under continuous pacing frames are
/// latest-wins; on demand every frame is kept. Replies are never dropped
/// and go out before pending frames.
#[derive(Debug)]
pub struct Outbox {
    pacing: Pacing,
    state: Mutex<OutboxState>,
    ready: Condvar,
}

impl Outbox {
    pub fn new(pacing: Pacing) -> Arc<Self> {
        Arc::new(Outbox { pacing, state: Mutex::default(), ready: Condvar::new() })
    }

    pub fn put_frame(&self, events: Vec<SessionEvent>) {
        let mut s = self.state.lock().expect("outbox lock");
        if self.pacing == Pacing::Continuous && !s.frames.is_empty() {
            s.dropped += s.frames.len() as u64;
            s.frames.clear();
        }
        s.frames.push_back(events);
        self.ready.notify_all();
    }

    pub fn put_message(&self, msg: &ServerMessage) {
        self.state.lock().expect("outbox lock").messages.push_back(msg.to_json());
        self.ready.notify_all();
    }

    /// Frames replaced before being sent.
    pub fn dropped(&self) -> u64 {
        self.state.lock().expect("outbox lock").dropped
    }

    /// Everything queued, waiting up to `timeout` when empty.
    pub fn take(&self, timeout: Duration) -> Vec<SessionEvent> {
        let mut s = self.state.lock().expect("outbox lock");
        if s.frames.is_empty() && s.messages.is_empty() {
            s = self.ready.wait_timeout(s, timeout).expect("outbox lock").0;
        }
        let mut out: Vec<SessionEvent> = s.messages.drain(..).map(SessionEvent::Text).collect();
        out.extend(s.frames.drain(..).flatten());
        out
    }
}

/// Panorama uploaded by the viewer.
#[derive(Debug, Clone)]
pub struct UploadedEnv {
    pub id: u32,
    pub map: Arc<RadianceMap>,
}

/// One live viewer connection: control state, uploads and the pipeline.
pub struct Session {
    pipeline: Pipeline,
    uploads: Vec<UploadedEnv>,
    encoding: Encoding,
    record_dir: Option<PathBuf>,
}

impl Session {
    pub fn new(cfg: &SessionConfig) -> Result<Self, PipelineError> {
        let pipeline = Pipeline::new(cfg)?;
        if let Some(dir) = &cfg.serve.record_dir {
            std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        }
        Ok(Session {
            pipeline,
            uploads: Vec::new(),
            encoding: if cfg.serve.png { Encoding::Png } else { Encoding::RawRgb8 },
            record_dir: cfg.serve.record_dir.clone(),
        })
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    /// Apply pending control state. Each rejected item yields an error
    /// reply and leaves its part of the state unchanged.
    pub fn apply(&mut self, state: PendingState) -> Vec<ServerMessage> {
        let mut replies = Vec::new();
        let mut fail = |m: String| replies.push(ServerMessage::Error { message: m });
        if let Some(mode) = state.mode {
            self.pipeline.set_mode(mode);
        }
        if let Some(offset) = state.volume_offset {
            self.pipeline.set_volume_offset(offset);
        }
        if let Some(name) = state.tf {
            match TransferFunction::preset(&name) {
                Some(tf) => self.pipeline.set_transfer_function(tf),
                None => fail(format!("unknown transfer function {name:?}")),
            }
        }
        if let Some(sel) = state.env {
            let height = self.pipeline.config().environment.panorama_height;
            let source = match sel {
                EnvSelector::Name { name } => EnvSource::preset(&name, height).map_err(|e| e.to_string()),
                EnvSelector::Id { id } => self
                    .uploads
                    .iter()
                    .find(|u| u.id == id)
                    .map(|u| EnvSource::Static(u.map.clone()))
                    .ok_or_else(|| format!("no uploaded environment with id {id}")),
            };
            match source {
                Ok(s) => self.pipeline.set_environment(s),
                Err(m) => fail(m),
            }
        }
        if let Some(p) = state.params {
            let cfg = self.pipeline.config();
            match p.apply(&cfg.denoiser, &cfg.validity) {
                Ok((b, v)) => self.pipeline.set_params(b, v),
                Err(e) => fail(e.to_string()),
            }
        }
        replies
    }

    /// Register an uploaded equirectangular PNG (2:1, world orientation).
    pub fn upload(&mut self, bytes: &[u8]) -> ServerMessage {
        let map = decode_png(bytes)
            .map_err(|e| e.to_string())
            .and_then(|img| RadianceMap::new(img, MapKind::Ldr, MapFrame::World).map_err(|e| e.to_string()));
        match map {
            Ok(map) => {
                let id = self.uploads.len() as u32;
                self.uploads.push(UploadedEnv { id, map: Arc::new(map) });
                ServerMessage::EnvUploaded { id }
            }
            Err(e) => ServerMessage::Error { message: format!("environment upload rejected: {e}") },
        }
    }

    /// Render one frame: left packet, right packet, then stats.
    pub fn render_frame(&mut self, pose: &Pose) -> Result<Vec<SessionEvent>, PipelineError> {
        let out = self.pipeline.step(pose)?;
        let frame = u32::try_from(out.frame).map_err(|_| PipelineError::Config("frame counter overflow".into()))?;
        let finals = out.final_images();
        let mut events = Vec::with_capacity(3);
        for eye in Eye::BOTH {
            let img = finals[eye.index()];
            let bytes = encode_packet(img, frame, eye, self.encoding).map_err(|e| PipelineError::Image(e.to_string()))?;
            events.push(SessionEvent::Binary(bytes));
            if let Some(dir) = &self.record_dir {
                let path = dir.join(frame_file(out.frame, Some(eye), ".pfm"));
                write_pfm(&path, img).map_err(|e| PipelineError::Image(format!("{}: {e}", path.display())))?;
            }
        }
        let stats = ServerMessage::Stats {
            frame,
            t: out.illumination,
            render_ms: out.timings.render_ms,
            denoise_ms: out.timings.denoise_ms,
            mode: self.pipeline.mode(),
        };
        events.push(SessionEvent::Text(stats.to_json()));
        Ok(events)
    }

    /// Render loop; returns when the inbox is closed.
    pub fn run(&mut self, inbox: &SharedInbox, outbox: &Outbox) {
        while let Some(taken) = inbox.take() {
            for reply in self.apply(taken.state) {
                outbox.put_message(&reply);
            }
            for bytes in &taken.uploads {
                outbox.put_message(&self.upload(bytes));
            }
            if let Some(pose) = taken.pose {
                match self.render_frame(&pose) {
                    Ok(events) => outbox.put_frame(events),
                    Err(e) => {
                        log::warn!("{e}");
                        outbox.put_message(&ServerMessage::Error { message: e.to_string() });
                    }
                }
            }
        }
    }
}
