//! Session-oriented streaming front end for the stylization pipeline.
//!
//! Clients speak newline-delimited JSON (see [`protocol`]); each session owns
//! one [`motion_stream::pipeline::PipelineState`]. The [`connection`] driver
//! works over any `BufRead`/`Write` pair and [`server`] runs it over TCP.

pub mod clock;
pub mod config;
pub mod connection;
pub mod error;
pub mod protocol;
pub mod server;
pub mod service;

pub use clock::{Clock, ManualClock, SystemClock};
pub use config::{ServiceConfig, StyleSource};
pub use connection::{serve_stream, Connection};
pub use error::ServiceError;
pub use protocol::{HelloConfig, Message, Summary};
pub use server::Server;
pub use service::{Service, SessionConfig, SessionId};
