use thiserror::Error;

use crate::service::SessionId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ServiceError {
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("no open session; send hello first")]
    NoSession,
    #[error("session already open")]
    SessionOpen,
    #[error("bad frame: {0}")]
    BadFrame(String),
    #[error("frame t={t} is not after t={last}")]
    OutOfOrder { t: u64, last: u64 },
    #[error("unknown style `{0}`")]
    UnknownStyle(String),
    #[error("bad style: {0}")]
    BadStyle(String),
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
    #[error("{0}")]
    BadConfig(String),
    #[error("bad message: {0}")]
    BadMessage(String),
    #[error("backend failure: {0}")]
    Backend(String),
}

impl ServiceError {
    /// Stable identifier sent in `error` messages.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::NoSession => "no_session",
            ServiceError::SessionOpen => "session_open",
            ServiceError::BadFrame(_) => "bad_frame",
            ServiceError::OutOfOrder { .. } => "out_of_order",
            ServiceError::UnknownStyle(_) => "unknown_style",
            ServiceError::BadStyle(_) => "bad_style",
            ServiceError::UnknownBackend(_) => "unknown_backend",
            ServiceError::BadConfig(_) => "bad_config",
            ServiceError::BadMessage(_) => "bad_message",
            ServiceError::Backend(_) => "backend",
        }
    }
}

impl From<motion_stream::Error> for ServiceError {
    fn from(e: motion_stream::Error) -> Self {
        use motion_stream::Error as E;
        match e.root() {
            E::UnknownBackend(name) => ServiceError::UnknownBackend(name.clone()),
            E::Config { .. } => ServiceError::BadConfig(e.root().to_string()),
            _ => ServiceError::Backend(e.to_string()),
        }
    }
}
