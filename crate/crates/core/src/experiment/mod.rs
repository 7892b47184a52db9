//! Target-acquisition experiment: target design, per-subject plans, the
//! red/green task state machine and the movement-time/accuracy metrics.

mod plan;
mod record;
mod targets;
pub(crate) mod task;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use plan::{plan_session, MethodPlan, PlannedTrial, SessionPlan, TrialPhase, BLOCK_SIZE, MAIN_BLOCKS, TRAINING_TRIALS};
pub use record::TrialRecord;
pub use targets::{direction_vector, generate_target_set, DisplayConfig, Target, CATEGORY_QUOTA, TARGETS_PER_DIRECTION};
pub use task::{
    step_task, DisplayId, StepOutcome, TaskConfig, TaskEvent, TaskPhase, TaskState, TouchKind, TrialEvent,
    TrialEventKind,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("target width must be positive, got {0}")]
    InvalidWidth(f64),
    #[error("target distance must be non-negative, got {0}")]
    InvalidDistance(f64),
    #[error("ID {0} outside the category range (1.5, 5.5]")]
    IdOutOfRange(f64),
    #[error("accuracy undefined for zero attempts")]
    UndefinedAccuracy,
    #[error("invalid display config: {0}")]
    Config(String),
    #[error("event at t={got} precedes previous event at t={last}")]
    OutOfOrder { last: f64, got: f64 },
}

/// The three compared input methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Direct touch on the large display.
    PT,
    /// One-to-one drag on the phone.
    ST,
    /// Height-modulated gain above the phone.
    ZM,
}

impl Method {
    /// Canonical enumeration order used for counterbalancing.
    pub const ALL: [Method; 3] = [Method::PT, Method::ST, Method::ZM];

    /// Column order of analysis reports.
    pub const REPORT_ORDER: [Method; 3] = [Method::ZM, Method::ST, Method::PT];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::PT => "PT",
            Method::ST => "ST",
            Method::ZM => "ZM",
        }
    }

    pub(crate) fn code(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "PT" => Ok(Method::PT),
            "ST" => Ok(Method::ST),
            "ZM" => Ok(Method::ZM),
            _ => Err(format!("unknown method `{s}` (expected PT, ST or ZM)")),
        }
    }
}

/// Shannon index of difficulty, `log2(D/W + 1)`, in bits.
pub fn fitts_id(distance: f64, width: f64) -> Result<f64, ExperimentError> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(ExperimentError::InvalidWidth(width));
    }
    if !(distance >= 0.0) || !distance.is_finite() {
        return Err(ExperimentError::InvalidDistance(distance));
    }
    Ok((distance / width + 1.0).log2())
}

/// Category `k` covers `(k - 0.5, k + 0.5]`, for k in 2..=5.
pub fn id_category(id: f64) -> Result<u8, ExperimentError> {
    if !(id > 1.5 && id <= 5.5) {
        return Err(ExperimentError::IdOutOfRange(id));
    }
    Ok((2..=5).find(|&k| id <= f64::from(k) + 0.5).unwrap_or(5))
}

/// Hits over attempts.
pub fn accuracy(hits: u64, misses: u64) -> Result<f64, ExperimentError> {
    let total = hits + misses;
    if total == 0 {
        return Err(ExperimentError::UndefinedAccuracy);
    }
    Ok(hits as f64 / total as f64)
}
