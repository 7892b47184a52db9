//! Live-session protocol: newline-delimited JSON objects tagged by `type`.
//!
//! A client opens with `hello` (optionally carrying a config; missing keys
//! fall back to the server defaults) and gets `ack` with the resolved config.
//! Every `input` is answered by exactly one `mapped` carrying the same `t`,
//! followed by a `trial_event` when the touch changed the task state.
//! `session_end` writes the trial log and echoes its path. Any protocol
//! violation is answered by `error` and the connection is closed.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::SessionConfig;
use super::log::write_log;
use crate::agent::{simulate_method, AgentError};
use crate::experiment::{TrialEvent, TrialRecord};
use crate::session::{InputSample, MappedOutput, SessionEngine};

#[derive(Debug, Error)]
pub enum WireError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which calibration pose a height sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibPose {
    /// Finger resting on the phone.
    Low,
    /// Finger at the top of the comfortable range.
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireMessage {
    Hello {
        #[serde(default)]
        config: Option<Box<SessionConfig>>,
    },
    Ack {
        config: Box<SessionConfig>,
        trials: usize,
    },
    Error {
        message: String,
    },
    CalibSample {
        z: f64,
        pose: CalibPose,
    },
    CalibDone,
    Calibrated {
        h_min: f64,
        h_max: f64,
    },
    Input(InputSample),
    Mapped(MappedOutput),
    TrialEvent(TrialEvent),
    SessionEnd {
        #[serde(default)]
        log_ref: Option<String>,
    },
}

impl WireMessage {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("wire messages always serialize")
    }

    fn kind(&self) -> &'static str {
        match self {
            WireMessage::Hello { .. } => "hello",
            WireMessage::Ack { .. } => "ack",
            WireMessage::Error { .. } => "error",
            WireMessage::CalibSample { .. } => "calib_sample",
            WireMessage::CalibDone => "calib_done",
            WireMessage::Calibrated { .. } => "calibrated",
            WireMessage::Input(_) => "input",
            WireMessage::Mapped(_) => "mapped",
            WireMessage::TrialEvent(_) => "trial_event",
            WireMessage::SessionEnd { .. } => "session_end",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Close,
}

struct Active {
    config: SessionConfig,
    engine: SessionEngine,
    records: Vec<TrialRecord>,
}

/// Protocol state of one connection.
pub struct WireSession {
    defaults: SessionConfig,
    log_dir: Option<PathBuf>,
    active: Option<Active>,
}

static SESSION_COUNTER: AtomicU64 = AtomicU64::new(0);

fn close_with(message: impl Into<String>) -> (Vec<WireMessage>, Flow) {
    (vec![WireMessage::Error { message: message.into() }], Flow::Close)
}

/// Keeps `[A-Za-z0-9._-]`, drops any directory part.
fn sanitize(name: &str) -> String {
    let base = name.rsplit(['/', '\\']).next().unwrap_or("");
    let s: String = base.chars().filter(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-')).collect();
    let s = s.trim_start_matches('.').to_string();
    if s.is_empty() {
        return String::new();
    }
    if s.ends_with(".jsonl") {
        s
    } else {
        format!("{s}.jsonl")
    }
}

/// Creates a new file in `dir`, never overwriting an existing one.
fn create_unique(dir: &Path, name: &str) -> std::io::Result<(PathBuf, std::fs::File)> {
    let stem = name.trim_end_matches(".jsonl");
    for i in 0u32.. {
        let candidate = if i == 0 { dir.join(name) } else { dir.join(format!("{stem}-{i}.jsonl")) };
        match OpenOptions::new().write(true).create_new(true).open(&candidate) {
            Ok(f) => return Ok((candidate, f)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!("u32 range exhausted")
}

impl WireSession {
    /// `log_dir` receives one JSONL trial log per ended session; with `None`
    /// logs are kept in memory only.
    pub fn new(defaults: SessionConfig, log_dir: Option<PathBuf>) -> Self {
        Self { defaults, log_dir, active: None }
    }

    /// Records of the current session so far.
    pub fn records(&self) -> &[TrialRecord] {
        self.active.as_ref().map_or(&[], |a| &a.records)
    }

    pub fn handle(&mut self, msg: WireMessage) -> (Vec<WireMessage>, Flow) {
        match msg {
            WireMessage::Hello { config } => {
                let config = config.map_or_else(|| self.defaults.clone(), |c| *c);
                if let Err(e) = config.validate() {
                    return close_with(e.to_string());
                }
                let engine = match config.build_engine() {
                    Ok(e) => e,
                    Err(e) => return close_with(e.to_string()),
                };
                let trials = engine.task().total();
                info!("session start: {} subject {} seed {} ({trials} trials)", config.method, config.subject, config.seed);
                let ack = WireMessage::Ack { config: Box::new(config.clone()), trials };
                self.active = Some(Active { config, engine, records: Vec::new() });
                (vec![ack], Flow::Continue)
            }
            other => {
                let Some(active) = self.active.as_mut() else {
                    return close_with(format!("`{}` before `hello`", other.kind()));
                };
                match other {
                    WireMessage::CalibSample { z, pose } => {
                        if !z.is_finite() {
                            return close_with("non-finite calibration height");
                        }
                        active.engine.calibration_sample(pose == CalibPose::High, z);
                        (Vec::new(), Flow::Continue)
                    }
                    WireMessage::CalibDone => match active.engine.finish_calibration() {
                        Ok(cal) => {
                            active.config.setup.calibration = cal;
                            (vec![WireMessage::Calibrated { h_min: cal.h_min, h_max: cal.h_max }], Flow::Continue)
                        }
                        Err(e) => close_with(e.to_string()),
                    },
                    WireMessage::Input(s) => match active.engine.process(&s) {
                        Ok(step) => {
                            let mapped = step.mapped.unwrap_or(MappedOutput { t: s.t, fx: s.x, fy: s.y, gain: 1.0, scale: 1.0 });
                            let mut out = vec![WireMessage::Mapped(mapped)];
                            if let Some(ev) = step.event {
                                out.push(WireMessage::TrialEvent(ev));
                            }
                            if let Some(r) = step.record {
                                active.records.push(r);
                            }
                            (out, Flow::Continue)
                        }
                        Err(e) => close_with(e.to_string()),
                    },
                    WireMessage::SessionEnd { log_ref } => {
                        let log_ref = match &self.log_dir {
                            Some(dir) => match write_session_log(dir, log_ref.as_deref(), active) {
                                Ok(p) => Some(p.display().to_string()),
                                Err(e) => return close_with(format!("cannot write trial log: {e}")),
                            },
                            None => None,
                        };
                        (vec![WireMessage::SessionEnd { log_ref }], Flow::Close)
                    }
                    m => close_with(format!("`{}` is a server message", m.kind())),
                }
            }
        }
    }
}

fn write_session_log(dir: &Path, requested: Option<&str>, active: &Active) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let c = &active.config;
    let name = requested.map(sanitize).filter(|s| !s.is_empty()).unwrap_or_else(|| {
        let n = SESSION_COUNTER.fetch_add(1, Ordering::Relaxed);
        format!("{}-s{}-seed{}-{n}.jsonl", c.method, c.subject, c.seed)
    });
    let (path, file) = create_unique(dir, &name)?;
    write_log(BufWriter::new(file), &active.records).map_err(|e| std::io::Error::other(e.to_string()))?;
    info!("wrote {} records to {}", active.records.len(), path.display());
    Ok(path)
}

/// Client side of a complete synthetic session: `hello` with `config`, the
/// agent's input for the configured method and trial limit, then
/// `session_end`.
pub fn agent_transcript(config: &SessionConfig, log_ref: Option<String>) -> Result<Vec<WireMessage>, AgentError> {
    let plan = config.plan()?;
    let mut trials = plan.for_method(config.method).map(|m| m.main.clone()).unwrap_or_default();
    if let Some(n) = config.trials {
        trials.truncate(n);
    }
    let (samples, _) =
        simulate_method(&config.setup, config.method, config.subject, config.seed, &trials, &config.agent, config.seed)?;
    let mut out = Vec::with_capacity(samples.len() + 2);
    out.push(WireMessage::Hello { config: Some(Box::new(config.clone())) });
    out.extend(samples.into_iter().map(WireMessage::Input));
    out.push(WireMessage::SessionEnd { log_ref });
    Ok(out)
}

/// Runs one connection to completion. Returns the records of the session
/// that was active when the connection ended.
pub fn handle_connection<R: BufRead, W: Write>(
    reader: R,
    mut writer: W,
    defaults: SessionConfig,
    log_dir: Option<PathBuf>,
) -> Result<Vec<TrialRecord>, WireError> {
    let mut session = WireSession::new(defaults, log_dir);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (replies, flow) = match serde_json::from_str::<WireMessage>(&line) {
            Ok(msg) => session.handle(msg),
            Err(e) => close_with(format!("line {}: {e}", i + 1)),
        };
        for r in &replies {
            writer.write_all(r.to_line().as_bytes())?;
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
        if flow == Flow::Close {
            if let Some(WireMessage::Error { message }) = replies.first() {
                warn!("closing connection: {message}");
                return Err(WireError::Malformed { line: i + 1, message: message.clone() });
            }
            break;
        }
    }
    Ok(session.records().to_vec())
}

/// Accepts connections forever, one thread and one isolated session each.
pub fn serve(listener: TcpListener, defaults: SessionConfig, log_dir: Option<PathBuf>) -> std::io::Result<()> {
    let defaults = Arc::new(defaults);
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        let defaults = Arc::clone(&defaults);
        let log_dir = log_dir.clone();
        thread::spawn(move || {
            let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
            info!("connection from {peer}");
            if let Err(e) = serve_stream(stream, (*defaults).clone(), log_dir) {
                warn!("{peer}: {e}");
            }
        });
    }
    Ok(())
}

fn serve_stream(stream: TcpStream, defaults: SessionConfig, log_dir: Option<PathBuf>) -> Result<(), WireError> {
    let reader = BufReader::new(stream.try_clone()?);
    handle_connection(reader, BufWriter::new(stream), defaults, log_dir).map(|_| ())
}
