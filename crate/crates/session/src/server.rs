//! WebSocket transport: one thread and one [`LiveSession`] per connection.

use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::thread;
use std::time::{Duration, Instant};

use drilltwin::scenario::{RunLog, Scenario};
use log::{info, warn};
use tungstenite::{Message, WebSocket};

use crate::live::LiveSession;
use crate::protocol::{ClientMessage, ServerMessage, MAX_MESSAGE_BYTES};
use crate::{SessionError, SessionResult};

/// Largest wall-clock backlog (s) the simulation will try to catch up on;
/// anything beyond is dropped so a stall never turns into a burst.
pub const MAX_CATCH_UP: f64 = 0.05;

const POLL: Duration = Duration::from_millis(1);

#[derive(Clone, Debug, Default)]
pub struct ServerOptions {
    pub seed: u64,
    /// Overrides the scenario's snapshot rate.
    pub snapshot_hz: Option<f64>,
    /// Session logs are written here as `session-<id>.dtlg`.
    pub out_dir: Option<PathBuf>,
    /// Stop accepting after this many sessions and return once they end.
    pub max_sessions: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionSummary {
    pub id: usize,
    pub reason: String,
    pub duration: f64,
    pub records: usize,
    pub log_path: Option<PathBuf>,
}

pub struct Server {
    listener: TcpListener,
    scenario: Scenario,
    options: ServerOptions,
}

impl Server {
    /// Binds the listener and checks that the scenario can host a session.
    pub fn bind(addr: &str, scenario: Scenario, options: ServerOptions) -> SessionResult<Self> {
        LiveSession::new(&scenario, options.seed, options.snapshot_hz)?;
        let listener = TcpListener::bind(addr).map_err(|source| SessionError::Bind {
            addr: addr.into(),
            source,
        })?;
        Ok(Server {
            listener,
            scenario,
            options,
        })
    }

    pub fn local_addr(&self) -> SessionResult<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Serves connections; returns after `max_sessions` sessions have ended,
    /// otherwise runs until the listener fails.
    pub fn run(self) -> SessionResult<Vec<SessionSummary>> {
        let mut handles = Vec::new();
        for (id, stream) in self.listener.incoming().enumerate() {
            let stream = stream?;
            let scenario = self.scenario.clone();
            let options = self.options.clone();
            handles.push(thread::spawn(move || -> SessionResult<SessionSummary> {
                let peer = stream.peer_addr().ok();
                let ws = tungstenite::accept(stream).map_err(|e| match e {
                    tungstenite::HandshakeError::Failure(e) => SessionError::WebSocket(Box::new(e)),
                    tungstenite::HandshakeError::Interrupted(_) => {
                        SessionError::Rejected("websocket handshake interrupted".into())
                    }
                })?;
                info!("session {id} opened by {peer:?}");
                let session = LiveSession::new(&scenario, options.seed, options.snapshot_hz)?;
                let (summary, _) = run_session(ws, session, id, options.out_dir.as_ref())?;
                info!("session {id} ended: {}", summary.reason);
                Ok(summary)
            }));
            if self.options.max_sessions.is_some_and(|m| id + 1 >= m) {
                break;
            }
        }
        let mut out = Vec::new();
        for h in handles {
            match h.join() {
                Ok(Ok(s)) => out.push(s),
                Ok(Err(e)) => warn!("session failed: {e}"),
                Err(_) => warn!("session thread panicked"),
            }
        }
        Ok(out)
    }
}

fn send(ws: &mut WebSocket<TcpStream>, msg: &ServerMessage) -> SessionResult<()> {
    let text = msg.to_json();
    debug_assert!(text.len() <= MAX_MESSAGE_BYTES);
    ws.write(Message::text(text)).map_err(Box::new)?;
    Ok(())
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io)
        if matches!(io.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut))
}

/// Drains the socket. Returns the end-of-session reason once the client
/// leaves. Malformed messages are answered with an error and skipped.
fn ingest(ws: &mut WebSocket<TcpStream>, session: &mut LiveSession) -> SessionResult<Option<&'static str>> {
    loop {
        let msg = match ws.read() {
            Ok(m) => m,
            Err(e) if is_timeout(&e) => return Ok(None),
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                return Ok(Some("disconnected"))
            }
            Err(e) => return Err(Box::new(e).into()),
        };
        match msg {
            Message::Text(text) => match ClientMessage::from_json(text.as_str()) {
                Ok(ClientMessage::Steer(cmd)) => {
                    if let Err(e) = session.submit(cmd) {
                        send(ws, &ServerMessage::error("rejected", e.to_string()))?;
                    }
                }
                Ok(ClientMessage::Bye) => return Ok(Some("client bye")),
                Err(e) => send(ws, &ServerMessage::error("malformed", e))?,
            },
            Message::Binary(_) => send(
                ws,
                &ServerMessage::error("malformed", "binary frames are not supported"),
            )?,
            Message::Close(_) => return Ok(Some("closed")),
            _ => {}
        }
    }
}

/// Drives one session over an accepted socket in real time until the client
/// leaves or the scenario duration runs out, then saves the log.
pub fn run_session(
    mut ws: WebSocket<TcpStream>,
    mut session: LiveSession,
    id: usize,
    out_dir: Option<&PathBuf>,
) -> SessionResult<(SessionSummary, RunLog)> {
    ws.get_mut().set_read_timeout(Some(POLL))?;
    ws.get_mut().set_nodelay(true)?;
    send(&mut ws, &ServerMessage::Hello(session.hello().clone()))?;
    ws.flush().map_err(Box::new)?;

    let start = Instant::now();
    let mut dropped = 0.0;
    let mut pump = |ws: &mut WebSocket<TcpStream>, session: &mut LiveSession| -> SessionResult<Option<&'static str>> {
        if let Some(reason) = ingest(ws, session)? {
            return Ok(Some(reason));
        }
        let behind = start.elapsed().as_secs_f64() - dropped - session.time();
        if behind > MAX_CATCH_UP {
            dropped += behind - MAX_CATCH_UP;
        }
        for m in session.advance_to(start.elapsed().as_secs_f64() - dropped)? {
            send(ws, &m)?;
        }
        ws.flush().map_err(Box::new)?;
        Ok(session.is_finished().then_some("duration reached"))
    };
    let reason = loop {
        match pump(&mut ws, &mut session) {
            Ok(None) => {}
            Ok(Some(r)) => break r.to_string(),
            Err(SessionError::WebSocket(e)) if !matches!(*e, tungstenite::Error::Capacity(_)) => {
                break format!("connection lost: {e}")
            }
            Err(e) => return Err(e),
        }
    };

    let t = session.time();
    let records = session.records();
    let log = session.finish();
    let log_path = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("session-{id}.dtlg"));
            log.save(&path)?;
            Some(path)
        }
        None => None,
    };
    let bye = ServerMessage::Bye {
        reason: reason.clone(),
        t,
        records,
    };
    // The client may already be gone.
    let _ = send(&mut ws, &bye).and_then(|_| ws.close(None).map_err(|e| Box::new(e).into()));
    let _ = ws.flush();
    Ok((
        SessionSummary {
            id,
            reason,
            duration: t,
            records,
            log_path,
        },
        log,
    ))
}
