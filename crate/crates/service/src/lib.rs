//! Command line and HTTP session service around the liveness engine.

pub mod cli;
pub mod config;
pub mod http;
pub mod service;
pub mod session;
pub mod store;

pub use config::{EngineConfig, CONFIG_ENV};
pub use service::{Clock, LivenessService, ManualClock, ServiceError, SystemClock};
pub use session::{Session, SessionState};
pub use store::SessionStore;
