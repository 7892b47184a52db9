//! Trial logs, configuration, the live-session wire protocol and report
//! rendering.

pub mod config;
pub mod log;
pub mod report;
pub mod wire;

pub use config::{load_config, parse_config, ConfigError, SessionConfig, CONFIG_ENV};
pub use log::{canonical_log, read_log, read_log_file, write_log, write_log_file, LogError, LogFormat};
pub use report::{render_json, render_text};
pub use wire::{agent_transcript, handle_connection, serve, CalibPose, Flow, WireError, WireMessage, WireSession};
