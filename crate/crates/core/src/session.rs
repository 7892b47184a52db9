//! Per-session driver: one input sample in, one mapped output out.
//!
//! Each sample passes through the optional tracker-to-scene transform, the
//! finger filter, the method's transfer function and finally the task state
//! machine. The wire server and the synthetic agent both go through here, so
//! a given sample sequence yields the same trial records on either path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{
    DisplayConfig, DisplayId, ExperimentError, Method, PlannedTrial, TaskConfig, TaskEvent, TaskState, TouchKind, TrialEvent,
    TrialRecord,
};
use crate::geometry::{apply_transform_point, RigidTransform, Vec2, Vec3};
use crate::tracking::{calibrate_height, FingerFilterConfig, FingerTracker, HeightCalibration, MarkerFrame, TrackingError};
use crate::transfer::{zmap_gain, zmap_step, GainVariant, MapperState, TransferError, ZMappingParams};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("sample time {got} is not after previous sample time {last}")]
    NonMonotone { last: f64, got: f64 },
    #[error("non-finite input sample")]
    NonFinite,
    #[error("invalid session setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Tracking(#[from] TrackingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Touch {
    Down,
    Up,
    #[default]
    None,
}

/// Finger position (scene frame, meters; z is height above the display) with
/// the touch state change, if any, at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    #[serde(default)]
    pub touch: Touch,
}

impl InputSample {
    pub fn new(t: f64, p: Vec3, touch: Touch) -> Self {
        Self { t, x: p.x, y: p.y, z: p.z, touch }
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }
}

/// Environment point under the input, with the gain and zoom in effect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappedOutput {
    pub t: f64,
    pub fx: f64,
    pub fy: f64,
    pub gain: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepResult {
    pub mapped: Option<MappedOutput>,
    pub event: Option<TrialEvent>,
    pub record: Option<TrialRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub task: TaskConfig,
    pub zmap: ZMappingParams,
    pub finger_filter: Option<FingerFilterConfig>,
    pub transform: Option<RigidTransform>,
}

impl EngineConfig {
    /// Working volume above the whole display, up to `roi_top` meters.
    pub fn default_filter(task: &TaskConfig, roi_top: f64) -> FingerFilterConfig {
        let r = task.display.rect();
        FingerFilterConfig {
            roi_min: r.min().extend(-0.02),
            roi_max: r.max().extend(roi_top),
            max_jump: 0.05,
        }
    }
}

/// Everything about the apparatus a session needs besides the method and the
/// trial list. Agent runs and served sessions build their engines from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSetup {
    pub display: DisplayConfig,
    pub calibration: HeightCalibration,
    pub gain_variant: GainVariant,
    /// Z-Mapping input span; defaults to the phone width.
    pub input_span: Option<f64>,
    /// Z-Mapping output span; defaults to the display width.
    pub output_span: Option<f64>,
    /// Height of the tracking volume above `calibration.h_max`. Lifting past
    /// it releases the Z-Mapping clutch.
    pub tracking_margin: f64,
    /// Largest accepted per-frame finger displacement.
    pub max_jump: f64,
    pub disabled_display_counts_as_miss: bool,
    pub tap_slop: f64,
    /// Tracker-to-scene transform applied to incoming positions.
    pub transform: Option<RigidTransform>,
}

impl Default for SessionSetup {
    fn default() -> Self {
        Self {
            display: DisplayConfig::default(),
            calibration: HeightCalibration { h_min: 0.01, h_max: 0.11 },
            gain_variant: GainVariant::default(),
            input_span: None,
            output_span: None,
            tracking_margin: 0.05,
            max_jump: 0.05,
            disabled_display_counts_as_miss: false,
            tap_slop: crate::experiment::task::default_tap_slop(),
            transform: None,
        }
    }
}

impl SessionSetup {
    pub fn zmap(&self) -> Result<ZMappingParams, TransferError> {
        let c = self.calibration;
        let s_s = self.input_span.unwrap_or(self.display.phone.width);
        let s_l = self.output_span.unwrap_or(self.display.width);
        Ok(ZMappingParams::new(c.h_min, c.h_max, s_s, s_l)?.with_variant(self.gain_variant))
    }

    pub fn roi_top(&self) -> f64 {
        self.calibration.h_max + self.tracking_margin
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        self.display.validate()?;
        HeightCalibration::new(self.calibration.h_min, self.calibration.h_max)?;
        self.zmap()?;
        if !(self.tracking_margin > 0.0 && self.max_jump > 0.0 && self.tap_slop >= 0.0) {
            return Err(SessionError::Setup("tracking_margin and max_jump must be positive, tap_slop non-negative".into()));
        }
        Ok(())
    }

    pub fn engine_config(&self, method: Method, subject: u32, seed: u64) -> Result<EngineConfig, SessionError> {
        self.validate()?;
        let task = TaskConfig {
            disabled_display_counts_as_miss: self.disabled_display_counts_as_miss,
            tap_slop: self.tap_slop,
            ..TaskConfig::new(method, self.display, subject, seed)
        };
        let mut filter = EngineConfig::default_filter(&task, self.roi_top());
        filter.max_jump = self.max_jump;
        Ok(EngineConfig { task, zmap: self.zmap()?, finger_filter: Some(filter), transform: self.transform })
    }
}

#[derive(Debug, Clone)]
pub struct SessionEngine {
    cfg: EngineConfig,
    task: TaskState,
    mapper: MapperState,
    /// Drag translation for the phone-touch method.
    drag_offset: Vec2,
    drag_last: Option<Vec2>,
    tracker: Option<FingerTracker>,
    /// Whether the mapper has been aligned with the finger yet.
    aligned: bool,
    last_t: Option<f64>,
    calib_low: Vec<f64>,
    calib_high: Vec<f64>,
}

impl SessionEngine {
    pub fn new(cfg: EngineConfig, trials: Vec<PlannedTrial>) -> Result<Self, SessionError> {
        cfg.zmap.validate()?;
        let tracker = cfg.finger_filter.map(FingerTracker::new).transpose()?;
        let bounds = cfg.task.display.rect();
        Ok(Self {
            cfg,
            task: TaskState::new(cfg.task, trials),
            mapper: MapperState::new(Vec2::ZERO).with_bounds(bounds),
            drag_offset: Vec2::ZERO,
            drag_last: None,
            tracker,
            aligned: false,
            last_t: None,
            calib_low: Vec::new(),
            calib_high: Vec::new(),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn task(&self) -> &TaskState {
        &self.task
    }

    pub fn is_finished(&self) -> bool {
        self.task.is_finished()
    }

    pub fn calibration_sample(&mut self, high: bool, z: f64) {
        if high {
            self.calib_high.push(z);
        } else {
            self.calib_low.push(z);
        }
    }

    /// Applies the recorded height calibration to the Z-Mapping parameters.
    pub fn finish_calibration(&mut self) -> Result<HeightCalibration, SessionError> {
        let cal = calibrate_height(&self.calib_low, &self.calib_high)?;
        let zmap = ZMappingParams { h_min: cal.h_min, h_max: cal.h_max, ..self.cfg.zmap };
        zmap.validate()?;
        // keep the volume's headroom above the new top height
        if let Some(f) = self.cfg.finger_filter.as_mut() {
            f.roi_max.z = cal.h_max + (f.roi_max.z - self.cfg.zmap.h_max);
            self.tracker = Some(FingerTracker::new(*f)?);
        }
        self.cfg.zmap = zmap;
        self.calib_low.clear();
        self.calib_high.clear();
        Ok(cal)
    }

    fn display_at(&self, p: Vec2) -> DisplayId {
        match self.cfg.task.method {
            Method::PT => DisplayId::Large,
            Method::ST | Method::ZM if self.cfg.task.display.phone.contains(p) => DisplayId::Phone,
            _ => DisplayId::Large,
        }
    }

    pub fn process(&mut self, s: &InputSample) -> Result<StepResult, SessionError> {
        if !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite() && s.z.is_finite()) {
            return Err(SessionError::NonFinite);
        }
        if let Some(last) = self.last_t {
            if !(s.t > last) {
                return Err(SessionError::NonMonotone { last, got: s.t });
            }
        }
        self.last_t = Some(s.t);

        let p = match &self.cfg.transform {
            Some(tf) => apply_transform_point(tf, s.position()),
            None => s.position(),
        };
        let xy = p.xy();
        let display = self.display_at(xy);

        let (f, gain) = match self.cfg.task.method {
            Method::PT => (xy, 1.0),
            Method::ST => {
                if display == DisplayId::Phone && s.touch == Touch::Down {
                    self.drag_last = Some(xy);
                } else if let Some(prev) = self.drag_last {
                    self.drag_offset -= xy - prev;
                    self.drag_last = (s.touch != Touch::Up).then_some(xy);
                }
                self.task.set_view_offset(self.drag_offset);
                (xy + self.drag_offset, 1.0)
            }
            Method::ZM => {
                let tracked = match self.tracker.as_mut() {
                    Some(tr) => tr.update(&MarkerFrame { timestamp: s.t, markers: vec![p] }).is_some(),
                    None => true,
                };
                if tracked {
                    if !self.aligned {
                        self.mapper.reset_to(xy);
                        self.aligned = true;
                    }
                    let (m, f) = zmap_step(self.mapper, p, &self.cfg.zmap)?;
                    self.mapper = m;
                    self.task.set_view_offset(f - xy);
                    (f, zmap_gain(p.z, &self.cfg.zmap))
                } else {
                    // out of the working volume: hold output, re-prime on return
                    self.mapper.unprime();
                    (self.mapper.mapped(), zmap_gain(p.z, &self.cfg.zmap))
                }
            }
        };

        let kind = match s.touch {
            Touch::Down => TouchKind::Down,
            Touch::Up => TouchKind::Up,
            Touch::None => TouchKind::Sample,
        };
        let out = self.task.step(&TaskEvent { kind, position: xy, display, time: s.t })?;

        let mut mapped = MappedOutput { t: s.t, fx: f.x, fy: f.y, gain, scale: 1.0 };
        if self.task.take_reset() {
            self.reset_environment(p);
            mapped.fx = xy.x;
            mapped.fy = xy.y;
        }
        Ok(StepResult { mapped: Some(mapped), event: out.event, record: out.record })
    }

    /// Returns the environment to its starting location with the input at `p`.
    fn reset_environment(&mut self, p: Vec3) {
        self.drag_offset = Vec2::ZERO;
        self.drag_last = None;
        let bounds = self.cfg.task.display.rect();
        self.mapper = MapperState::new(p.xy()).with_bounds(bounds);
        if let Ok((m, _)) = zmap_step(self.mapper, p, &self.cfg.zmap) {
            self.mapper = m;
        }
        self.task.set_view_offset(Vec2::ZERO);
    }
}

/// Runs a whole sample sequence and collects the emitted records.
pub fn run_samples(engine: &mut SessionEngine, samples: &[InputSample]) -> Result<Vec<TrialRecord>, SessionError> {
    let mut records = Vec::new();
    for s in samples {
        if let Some(r) = engine.process(s)?.record {
            records.push(r);
        }
    }
    Ok(records)
}
