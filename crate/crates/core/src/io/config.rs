//! Session and batch configuration (JSON). Every key is optional; missing
//! keys take the documented defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentError, AgentParams};
use crate::experiment::{plan_session, Method, SessionPlan};
use crate::session::{SessionEngine, SessionError, SessionSetup};
use crate::transfer::{TransferError, ZoomBounds};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "CDGAIN_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    /// Method of a served session.
    pub method: Method,
    pub seed: u64,
    /// Subject index; picks the counterbalanced method order and shuffle.
    pub subject: u32,
    /// Limits a served session to its first `trials` main trials.
    pub trials: Option<usize>,
    /// Number of synthetic subjects in a batch run.
    pub subjects: u32,
    pub setup: SessionSetup,
    pub zoom: ZoomBounds,
    pub agent: AgentParams,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            method: Method::ZM,
            seed: 1,
            subject: 0,
            trials: None,
            subjects: 20,
            setup: SessionSetup::default(),
            zoom: ZoomBounds::default(),
            agent: AgentParams::default(),
        }
    }
}

fn transfer_field(e: TransferError) -> ConfigError {
    match e {
        TransferError::InvalidParams { field: f @ ("h_min" | "h_max"), reason } => invalid(format!("setup.calibration.{f}"), reason),
        TransferError::InvalidParams { field, reason } => invalid(format!("setup.{field}"), reason),
        other => invalid("setup", other.to_string()),
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.setup;
        let d = &s.display;
        for (field, v) in [("setup.display.width", d.width), ("setup.display.height", d.height)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(field, format!("must be positive, got {v}")));
            }
        }
        d.validate().map_err(|e| invalid("setup.display", e.to_string()))?;
        let c = s.calibration;
        if !(c.h_min >= 0.0 && c.h_min.is_finite()) {
            return Err(invalid("setup.calibration.h_min", format!("must be non-negative, got {}", c.h_min)));
        }
        if !(c.h_max > c.h_min && c.h_max.is_finite()) {
            return Err(invalid("setup.calibration.h_max", format!("must exceed h_min ({}), got {}", c.h_min, c.h_max)));
        }
        s.zmap().map_err(transfer_field)?;
        for (field, v) in [("setup.tracking_margin", s.tracking_margin), ("setup.max_jump", s.max_jump)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(field, format!("must be positive, got {v}")));
            }
        }
        if !(s.tap_slop >= 0.0 && s.tap_slop.is_finite()) {
            return Err(invalid("setup.tap_slop", "must be non-negative"));
        }
        self.zoom.validate().map_err(|e| invalid("zoom", e.to_string()))?;
        self.agent.validate().map_err(|e| match e {
            AgentError::InvalidParams { field, reason } => invalid(format!("agent.{field}"), reason),
            other => invalid("agent", other.to_string()),
        })?;
        if self.subjects == 0 {
            return Err(invalid("subjects", "must be at least 1"));
        }
        if self.trials == Some(0) {
            return Err(invalid("trials", "must be at least 1"));
        }
        Ok(())
    }

    pub fn plan(&self) -> Result<SessionPlan, SessionError> {
        Ok(plan_session(self.subject, &self.setup.display, self.seed)?)
    }

    /// Engine for a served session of `self.method`, limited to `self.trials`.
    pub fn build_engine(&self) -> Result<SessionEngine, SessionError> {
        let plan = self.plan()?;
        let mut trials = plan.for_method(self.method).map(|m| m.main.clone()).unwrap_or_default();
        if let Some(n) = self.trials {
            trials.truncate(n);
        }
        SessionEngine::new(self.setup.engine_config(self.method, self.subject, self.seed)?, trials)
    }
}

/// Parses and validates a JSON config.
pub fn parse_config(text: &str) -> Result<SessionConfig, ConfigError> {
    let cfg: SessionConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SessionConfig, ConfigError> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::DisplayConfig;

    fn field_of(text: &str) -> String {
        match parse_config(text) {
            Err(ConfigError::Invalid { field, .. }) => field,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_object_is_default() {
        assert_eq!(parse_config("{}").unwrap(), SessionConfig::default());
    }

    #[test]
    fn heights_must_be_ordered() {
        let f = field_of(r#"{"setup": {"calibration": {"h_min": 0.1, "h_max": 0.05}}}"#);
        assert_eq!(f, "setup.calibration.h_max");
    }

    #[test]
    fn output_span_must_not_be_smaller() {
        let f = field_of(r#"{"setup": {"input_span": 0.5, "output_span": 0.1}}"#);
        assert_eq!(f, "setup.output_span");
    }

    #[test]
    fn agent_fields_are_named() {
        assert_eq!(field_of(r#"{"agent": {"fitts_b": 0}}"#), "agent.fitts_b");
        assert_eq!(field_of(r#"{"agent": {"endpoint_noise_sigma": -1}}"#), "agent.endpoint_noise_sigma");
    }

    #[test]
    fn unknown_keys_and_bad_json_are_parse_errors() {
        assert!(matches!(parse_config(r#"{"metod": "PT"}"#), Err(ConfigError::Parse { .. })));
        assert!(matches!(parse_config("{\n  \"seed\": ,\n}"), Err(ConfigError::Parse { line: 2, .. })));
    }

    #[test]
    fn partial_display_override() {
        let c = parse_config(
            r#"{"method": "PT", "setup": {"display": {"width": 0.6, "height": 0.34,
                "phone": {"center": [0.0, 0.0], "width": 0.1, "height": 0.06},
                "start_point": [0.0, 0.0], "start_width": 0.02, "min_target_width": 0.01}}}"#,
        )
        .unwrap();
        assert_eq!(c.setup.display.width, 0.6);
        assert_eq!(c.method, Method::PT);
    }

    #[test]
    fn nested_sections_take_defaults_per_key() {
        let c = parse_config(r#"{"setup": {"display": {"width": 0.6}}, "zoom": {"min": 0.1}}"#).unwrap();
        assert_eq!(c.setup.display.width, 0.6);
        assert_eq!(c.setup.display.height, DisplayConfig::default().height);
        assert_eq!(c.zoom, ZoomBounds { min: 0.1, max: 1.0 });
        assert!(parse_config(r#"{"setup": {"display": {"widht": 0.6}}}"#).is_err());
    }
}
