//! Live steering sessions: a headless [`LiveSession`] plus a WebSocket
//! server that paces it against the wall clock.

mod live;
pub mod protocol;
mod server;

pub use live::{LiveInput, LiveSession};
pub use protocol::{
    ClientMessage, Hello, ServerMessage, SessionSnapshot, SliceDescriptor, SteerCommand, MAX_MESSAGE_BYTES,
    PROTOCOL_VERSION,
};
pub use server::{run_session, Server, ServerOptions, SessionSummary, MAX_CATCH_UP};

pub type SessionResult<T> = Result<T, SessionError>;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Core(#[from] drilltwin::Error),
    #[error("message rejected: {0}")]
    Rejected(String),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("websocket: {0}")]
    WebSocket(#[from] Box<tungstenite::Error>),
}

impl SessionError {
    pub fn kind(&self) -> &'static str {
        match self {
            SessionError::Core(e) => e.kind(),
            SessionError::Rejected(_) => "rejected",
            SessionError::Bind { .. } => "bind",
            SessionError::Io(_) => "io",
            SessionError::WebSocket(_) => "websocket",
        }
    }
}
