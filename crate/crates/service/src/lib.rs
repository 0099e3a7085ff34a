//! Session server that runs a simulated scene through the streaming
//! separation pipeline in real time and lets WebSocket clients steer it.
//! The wire protocol is documented in `PROTOCOL.md` next to this crate.

pub mod driver;
pub mod hub;
pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientMessage, ProtocolError, ServerMessage, Status, PROTOCOL_VERSION};
pub use server::{router, serve};
pub use session::{Service, ServiceConfig};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] steerbeam_core::Error),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("invalid state transition: {0}")]
    Transition(String),
    #[error("{0}")]
    Request(String),
    #[error("internal error: {0}")]
    Internal(String),
}
