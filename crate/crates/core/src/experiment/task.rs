//! Red/green acquisition task.
//!
//! A trial starts with the red start target shown. A tap on it arms the
//! trial: the goal turns green and the movement-time clock starts at that
//! touch-up. Tapping inside the green circle on the active display completes
//! the trial; tapping outside it counts a miss. Completion resets the
//! environment to its starting location and shows the next red target.
//!
//! Event positions are physical contact locations in display coordinates.
//! The environment point under a contact is `position + view_offset`, where
//! the offset is maintained by whatever transfer function drives the view.

use serde::{Deserialize, Serialize};

use super::plan::{PlannedTrial, TrialPhase};
use super::record::TrialRecord;
use super::targets::DisplayConfig;
use super::{ExperimentError, Method};
use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TouchKind {
    Down,
    Up,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplayId {
    Large,
    Phone,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskEvent {
    pub kind: TouchKind,
    pub position: Vec2,
    pub display: DisplayId,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskPhase {
    Idle,
    RedShown,
    GreenActive,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialEventKind {
    /// Red target selected, green target active.
    Armed,
    Miss,
    Acquired,
}

/// Notification emitted on each state-changing touch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialEvent {
    pub kind: TrialEventKind,
    pub trial: usize,
    pub mt_s: Option<f64>,
    pub misses: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepOutcome {
    pub record: Option<TrialRecord>,
    pub event: Option<TrialEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub method: Method,
    pub display: DisplayConfig,
    /// Whether touch-ups on the disabled display count as misses while the
    /// green target is active.
    #[serde(default)]
    pub disabled_display_counts_as_miss: bool,
    /// A touch that travels further than this between down and up is a drag,
    /// not a selection.
    #[serde(default = "default_tap_slop")]
    pub tap_slop: f64,
    pub subject: u32,
    pub seed: u64,
}

pub(crate) fn default_tap_slop() -> f64 {
    0.005
}

impl TaskConfig {
    pub fn new(method: Method, display: DisplayConfig, subject: u32, seed: u64) -> Self {
        Self { method, display, disabled_display_counts_as_miss: false, tap_slop: default_tap_slop(), subject, seed }
    }

    /// Display on which selections are accepted for this method.
    pub fn active_display(&self) -> DisplayId {
        match self.method {
            Method::PT => DisplayId::Large,
            Method::ST | Method::ZM => DisplayId::Phone,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskState {
    cfg: TaskConfig,
    trials: Vec<PlannedTrial>,
    next: usize,
    phase: TaskPhase,
    view_offset: Vec2,
    last_time: Option<f64>,
    armed_at: f64,
    misses: u32,
    touch_origin: Option<Vec2>,
    reset_pending: bool,
}

impl TaskState {
    pub fn new(cfg: TaskConfig, trials: Vec<PlannedTrial>) -> Self {
        let phase = if trials.is_empty() { TaskPhase::Finished } else { TaskPhase::Idle };
        Self {
            cfg,
            trials,
            next: 0,
            phase,
            view_offset: Vec2::ZERO,
            last_time: None,
            armed_at: 0.0,
            misses: 0,
            touch_origin: None,
            reset_pending: false,
        }
    }

    pub fn config(&self) -> &TaskConfig {
        &self.cfg
    }

    pub fn phase(&self) -> TaskPhase {
        self.phase
    }

    pub fn current_trial(&self) -> Option<&PlannedTrial> {
        self.trials.get(self.next)
    }

    pub fn completed(&self) -> usize {
        self.next
    }

    pub fn total(&self) -> usize {
        self.trials.len()
    }

    pub fn misses(&self) -> u32 {
        self.misses
    }

    pub fn view_offset(&self) -> Vec2 {
        self.view_offset
    }

    /// Updates the translation between physical and environment coordinates.
    pub fn set_view_offset(&mut self, offset: Vec2) {
        self.view_offset = offset;
    }

    /// True once after each acquisition: the driver must reset its transfer
    /// state so the environment returns to the starting location.
    pub fn take_reset(&mut self) -> bool {
        std::mem::take(&mut self.reset_pending)
    }

    pub fn is_finished(&self) -> bool {
        self.phase == TaskPhase::Finished
    }

    pub fn step(&mut self, ev: &TaskEvent) -> Result<StepOutcome, ExperimentError> {
        if let Some(last) = self.last_time {
            if ev.time < last || ev.time.is_nan() {
                return Err(ExperimentError::OutOfOrder { last, got: ev.time });
            }
        }
        self.last_time = Some(ev.time);
        if self.phase == TaskPhase::Idle {
            self.phase = TaskPhase::RedShown;
        }
        let active = ev.display == self.cfg.active_display();

        match ev.kind {
            TouchKind::Sample => Ok(StepOutcome::default()),
            TouchKind::Down => {
                self.touch_origin = Some(ev.position);
                Ok(StepOutcome::default())
            }
            TouchKind::Up => {
                let travel = self.touch_origin.take().map_or(0.0, |o| (ev.position - o).norm());
                if !active {
                    if self.phase == TaskPhase::GreenActive && self.cfg.disabled_display_counts_as_miss {
                        return Ok(self.miss());
                    }
                    return Ok(StepOutcome::default());
                }
                if travel > self.cfg.tap_slop {
                    return Ok(StepOutcome::default());
                }
                let env = ev.position + self.view_offset;
                Ok(self.select(env, ev.time))
            }
        }
    }

    fn miss(&mut self) -> StepOutcome {
        self.misses += 1;
        StepOutcome {
            record: None,
            event: Some(TrialEvent { kind: TrialEventKind::Miss, trial: self.next, mt_s: None, misses: self.misses }),
        }
    }

    fn select(&mut self, env: Vec2, time: f64) -> StepOutcome {
        match self.phase {
            TaskPhase::RedShown => {
                let start = self.cfg.display.start_point;
                if (env - start).norm() > self.cfg.display.start_width / 2.0 {
                    return StepOutcome::default();
                }
                self.phase = TaskPhase::GreenActive;
                self.armed_at = time;
                self.misses = 0;
                StepOutcome {
                    record: None,
                    event: Some(TrialEvent { kind: TrialEventKind::Armed, trial: self.next, mt_s: None, misses: 0 }),
                }
            }
            TaskPhase::GreenActive => {
                let planned = self.trials[self.next];
                if !planned.target.contains(env) {
                    return self.miss();
                }
                let mt = time - self.armed_at;
                let t = planned.target;
                let record = (planned.phase == TrialPhase::Main).then(|| TrialRecord {
                    method: self.cfg.method,
                    block: planned.block,
                    trial: planned.trial_index,
                    direction: t.direction,
                    distance: t.distance,
                    width: t.width,
                    id_value: t.id_value,
                    id_category: t.category(),
                    movement_time: mt,
                    misses: self.misses,
                    hit: true,
                    seed: self.cfg.seed,
                    subject: self.cfg.subject,
                });
                let event =
                    TrialEvent { kind: TrialEventKind::Acquired, trial: self.next, mt_s: Some(mt), misses: self.misses };
                self.next += 1;
                self.misses = 0;
                self.view_offset = Vec2::ZERO;
                self.reset_pending = true;
                self.phase = if self.next < self.trials.len() { TaskPhase::RedShown } else { TaskPhase::Finished };
                StepOutcome { record, event: Some(event) }
            }
            TaskPhase::Idle | TaskPhase::Finished => StepOutcome::default(),
        }
    }
}

/// Functional form of [`TaskState::step`].
pub fn step_task(mut state: TaskState, ev: &TaskEvent) -> Result<(TaskState, Option<TrialRecord>), ExperimentError> {
    let out = state.step(ev)?;
    Ok((state, out.record))
}
