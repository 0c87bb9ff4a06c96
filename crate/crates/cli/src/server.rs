//! Websocket transport for a live session. One connection at a time; the
//! connection thread moves messages while a render thread owns the session.

use anyhow::{Context, Result};
use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::time::Duration;
use tungstenite::{Message, WebSocket};
use voxbeam_core::pipeline::{Outbox, Pose, Session, SessionConfig, SessionEvent, SharedInbox};
use voxbeam_core::wire::ServerMessage;

/// Receive poll interval; bounds how long queued frames wait for the socket.
const POLL: Duration = Duration::from_millis(5);

pub fn serve(cfg: &SessionConfig, addr: impl ToSocketAddrs, once: bool) -> Result<()> {
    // Load everything up front so missing inputs fail before listening.
    Session::new(cfg)?;
    let initial = Pose::from_keyframe(&cfg.serve.pose)?;
    let listener = TcpListener::bind(addr).context("binding the service port")?;
    // Printed on stdout so callers binding port 0 can find the service.
    println!("listening on ws://{}", listener.local_addr()?);
    std::io::Write::flush(&mut std::io::stdout())?;
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let peer = stream.peer_addr().ok();
        log::info!("session start {peer:?}");
        if let Err(e) = run_session(cfg, initial, stream) {
            log::warn!("session ended with error: {e:#}");
        }
        log::info!("session end {peer:?}");
        if once {
            break;
        }
    }
    Ok(())
}

fn run_session(cfg: &SessionConfig, initial: Pose, stream: TcpStream) -> Result<()> {
    stream.set_nodelay(true).ok();
    let mut ws = tungstenite::accept(stream).map_err(|e| anyhow::anyhow!("websocket handshake: {e}"))?;
    ws.get_ref().set_read_timeout(Some(POLL))?;
    let inbox = SharedInbox::new(cfg.serve.pacing, initial);
    let outbox = Outbox::new(cfg.serve.pacing);
    let mut session = Session::new(cfg)?;
    std::thread::scope(|scope| {
        let render = scope.spawn(|| session.run(&inbox, &outbox));
        let result = pump(&mut ws, &inbox, &outbox);
        inbox.close();
        render.join().expect("render thread panicked");
        if outbox.dropped() > 0 {
            log::info!("{} frame(s) superseded before delivery", outbox.dropped());
        }
        result
    })
}

/// Move messages until the viewer disconnects.
fn pump(ws: &mut WebSocket<TcpStream>, inbox: &SharedInbox, outbox: &Outbox) -> Result<()> {
    loop {
        match ws.read() {
            Ok(Message::Text(text)) => {
                if let Err(e) = inbox.push_text(&text) {
                    send(ws, SessionEvent::Text(ServerMessage::Error { message: e.to_string() }.to_json()))?;
                }
            }
            Ok(Message::Binary(bytes)) => inbox.push_upload(bytes),
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e.into()),
        }
        for event in outbox.take(Duration::ZERO) {
            send(ws, event)?;
        }
    }
}

fn send(ws: &mut WebSocket<TcpStream>, event: SessionEvent) -> Result<()> {
    let msg = match event {
        SessionEvent::Binary(b) => Message::Binary(b),
        SessionEvent::Text(t) => Message::Text(t),
    };
    match ws.send(msg) {
        Ok(()) => Ok(()),
        Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => Ok(()),
        Err(e) => Err(e.into()),
    }
}
