//! Synthetic participant.
//!
//! Movement time follows a Fitts model in motor space: each method turns the
//! display distance into the distance the finger actually travels, and the
//! time budget is spent along minimum-jerk segments. The agent only emits
//! touch and position samples; trial records come from the session engine.

mod trajectory;

pub use trajectory::min_jerk;

use log::debug;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use trajectory::Timeline;

use crate::experiment::{fitts_id, ExperimentError, Method, PlannedTrial, SessionPlan, Target, TrialRecord};
use crate::geometry::{invert_transform_point, Rect, Vec2, Vec3};
use crate::rng::{derive_rng, stream};
use crate::session::{InputSample, SessionEngine, SessionError, SessionSetup, Touch};
use crate::transfer::{zmap_gain, TransferError, ZMappingParams};

/// Floor on the sampled primary movement time, seconds.
const MIN_MOVEMENT_TIME: f64 = 0.05;
/// Time weight of a press or release relative to one meter of travel.
const PRESS_WEIGHT: f64 = 0.01;
/// Distance kept between a stroke and the phone edge.
const STROKE_MARGIN: f64 = 0.008;
const HOVER_LIFT: f64 = 0.02;
/// How far above the tracking volume the finger goes to clutch.
const CLUTCH_CLEARANCE: f64 = 0.03;
const TAP_DWELL: f64 = 0.08;
const MAX_SCATTER_DRAWS: usize = 64;
/// Endpoints closer than this to the target rim are redrawn so that the
/// agent's hit decision cannot disagree with the engine's.
const RIM_GUARD: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("target {index} at ({x:.4}, {y:.4}) is unreachable on this display")]
    Unreachable { index: usize, x: f64, y: f64 },
    #[error("the start point must lie inside the phone for {0}")]
    StartOffPhone(Method),
    #[error("trial {trial} of {method} produced {records} records instead of one")]
    Desync { method: Method, trial: usize, records: usize },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
}

/// Z-Mapping hover height as a fraction of the calibrated span, growing with
/// target distance: `clamp(base + per_meter * D, 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcPolicy {
    pub base: f64,
    pub per_meter: f64,
}

impl ArcPolicy {
    pub fn fraction(&self, distance: f64) -> f64 {
        (self.base + self.per_meter * distance).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentParams {
    /// Fitts intercept, seconds.
    pub fitts_a: f64,
    /// Fitts slope, seconds per bit.
    pub fitts_b: f64,
    /// Gaussian noise on each sampled movement time, seconds.
    pub mt_noise_sigma: f64,
    /// Per-axis endpoint scatter as a fraction of the target width.
    pub endpoint_noise_sigma: f64,
    /// Extra seconds per re-stroke.
    pub clutch_penalty: f64,
    pub zmap_arc_height_policy: ArcPolicy,
    /// Pause before tapping the start target, seconds.
    pub reaction_time: f64,
    /// Samples per second.
    pub sample_rate: f64,
    /// Misses after which the next attempt lands on the target center.
    pub max_retries: u32,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            fitts_a: 0.25,
            fitts_b: 0.2,
            mt_noise_sigma: 0.05,
            endpoint_noise_sigma: 0.2,
            clutch_penalty: 0.15,
            zmap_arc_height_policy: ArcPolicy { base: 0.3, per_meter: 3.0 },
            reaction_time: 0.35,
            sample_rate: 100.0,
            max_retries: 5,
        }
    }
}

impl AgentParams {
    /// Noise-free agent: movement time is exactly `a + b * ID` in motor space.
    pub fn deterministic() -> Self {
        Self { mt_noise_sigma: 0.0, endpoint_noise_sigma: 0.0, clutch_penalty: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |field, reason: &str| Err(AgentError::InvalidParams { field, reason: reason.into() });
        if !(self.fitts_b > 0.0 && self.fitts_b.is_finite()) {
            return bad("fitts_b", "must be positive");
        }
        if !self.fitts_a.is_finite() {
            return bad("fitts_a", "must be finite");
        }
        for (field, v) in [
            ("mt_noise_sigma", self.mt_noise_sigma),
            ("endpoint_noise_sigma", self.endpoint_noise_sigma),
            ("clutch_penalty", self.clutch_penalty),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(field, "must be non-negative");
            }
        }
        if !(self.reaction_time > 0.0 && self.reaction_time.is_finite()) {
            return bad("reaction_time", "must be positive");
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad("sample_rate", "must be positive");
        }
        let p = self.zmap_arc_height_policy;
        if !(p.base.is_finite() && p.per_meter.is_finite()) {
            return bad("zmap_arc_height_policy", "must be finite");
        }
        Ok(())
    }
}

/// How a method turns a display-space movement into finger travel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorPlan {
    /// Lateral finger travel, meters.
    pub distance: f64,
    /// Fitts ID of `distance` against the target width.
    pub id: f64,
    /// Display displacement per unit finger displacement during the movement.
    pub gain: f64,
    pub strokes: usize,
    /// Hover height of the Z-Mapping strokes.
    pub arc_height: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedTrialOutcome {
    pub movement_time: f64,
    pub misses: u32,
    pub plan: MotorPlan,
    /// Everything the agent emitted for the trial, start target included.
    pub samples: Vec<InputSample>,
}

impl SimulatedTrialOutcome {
    pub fn trajectory(&self) -> Vec<(f64, Vec3)> {
        self.samples.iter().map(|s| (s.t, s.position())).collect()
    }
}

/// Strokes of a clutched movement of length `len` along `v` from `c`. The
/// first stroke starts at `c`; later ones restart behind it.
#[derive(Debug, Clone, Copy)]
struct StrokeLayout {
    n: usize,
    len: f64,
    fwd: f64,
    back: f64,
    scale: f64,
}

impl StrokeLayout {
    fn new(len: f64, fwd: f64, back: f64) -> Self {
        if len <= fwd {
            return Self { n: 1, len, fwd, back, scale: 1.0 };
        }
        let n = 1 + ((len - fwd) / (fwd + back)).ceil() as usize;
        let scale = len / (fwd + (n - 1) as f64 * (fwd + back));
        Self { n, len, fwd, back, scale }
    }

    /// Start and end offsets along the stroke direction.
    fn stroke(&self, i: usize) -> (f64, f64) {
        match (self.n, i) {
            (1, _) => (0.0, self.len),
            (_, 0) => (0.0, self.fwd * self.scale),
            _ => (-self.back * self.scale, self.fwd * self.scale),
        }
    }
}

/// Distance from `c` to the phone edge along `v`, less the stroke margin.
fn phone_reach(phone: &Rect, c: Vec2, v: Vec2) -> f64 {
    let (lo, hi) = (phone.min(), phone.max());
    let mut r = f64::INFINITY;
    for (comp, lo, hi, c) in [(v.x, lo.x, hi.x, c.x), (v.y, lo.y, hi.y, c.y)] {
        if comp.abs() < 1e-12 {
            continue;
        }
        let space = if comp > 0.0 { hi - c } else { c - lo };
        r = r.min((space - STROKE_MARGIN) / comp.abs());
    }
    r
}

fn check_target(setup: &SessionSetup, target: &Target) -> Result<Vec2, AgentError> {
    let unreachable = || AgentError::Unreachable { index: target.index, x: target.center.x, y: target.center.y };
    if !(target.width > 0.0 && target.distance > 0.0 && setup.display.rect().contains(target.center)) {
        return Err(unreachable());
    }
    (target.center - setup.display.start_point).normalized().ok_or_else(unreachable)
}

fn stroke_layout(setup: &SessionSetup, method: Method, v: Vec2, len: f64) -> Result<StrokeLayout, AgentError> {
    let c = setup.display.start_point;
    let (fwd, back) = (phone_reach(&setup.display.phone, c, v), phone_reach(&setup.display.phone, c, -v));
    if !(fwd > 0.0 && back > 0.0) {
        return Err(AgentError::StartOffPhone(method));
    }
    Ok(StrokeLayout::new(len, fwd, back))
}

/// Motor-space plan for reaching `target` with `method`.
pub fn motor_plan(setup: &SessionSetup, method: Method, target: &Target, params: &AgentParams) -> Result<MotorPlan, AgentError> {
    let u = check_target(setup, target)?;
    let d = target.distance;
    let (distance, gain, strokes, arc_height) = match method {
        Method::PT => (d, 1.0, 1, None),
        Method::ST => (d, 1.0, stroke_layout(setup, method, -u, d)?.n, None),
        Method::ZM => {
            let zmap = setup.zmap()?;
            let z = zmap.h_min + params.zmap_arc_height_policy.fraction(d) * (zmap.h_max - zmap.h_min);
            let g = zmap_gain(z, &zmap);
            (d / g, g, stroke_layout(setup, method, u, d / g)?.n, Some(z))
        }
    };
    Ok(MotorPlan { distance, id: fitts_id(distance, target.width)?, gain, strokes, arc_height })
}

/// One piece of the movement; its duration is a share of the phase budget.
struct Seg {
    to: Vec3,
    lift: f64,
    end: Touch,
    weight: f64,
    clutch: bool,
}

fn seg(to: Vec3, lift: f64, end: Touch, travel: f64) -> Seg {
    Seg { to, lift, end, weight: travel + PRESS_WEIGHT, clutch: false }
}

fn emit(tl: &mut Timeline, segs: Vec<Seg>, budget: f64, clutch_penalty: f64) {
    let total: f64 = segs.iter().map(|s| s.weight).sum();
    for s in segs {
        let extra = if s.clutch { clutch_penalty } else { 0.0 };
        tl.segment(s.to, budget * s.weight / total + extra, s.lift, s.end);
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

struct TrialSim<'a> {
    setup: &'a SessionSetup,
    zmap: ZMappingParams,
    params: &'a AgentParams,
    method: Method,
    target: &'a Target,
    /// Height at which the finger touches the surface.
    z_touch: f64,
}

impl TrialSim<'_> {
    fn movement_time(&self, id: f64, rng: &mut ChaCha8Rng) -> f64 {
        let noise = if self.params.mt_noise_sigma > 0.0 { self.params.mt_noise_sigma * gauss(rng) } else { 0.0 };
        (self.params.fitts_a + self.params.fitts_b * id + noise).max(MIN_MOVEMENT_TIME)
    }

    /// Endpoint offset of the finger around `base` and whether it selects the
    /// target. `gain` converts finger offset to display offset.
    fn scatter(&self, base: Vec2, gain: f64, exact: bool, rng: &mut ChaCha8Rng) -> (Vec2, bool) {
        let sigma = self.params.endpoint_noise_sigma * self.target.width;
        if exact || sigma == 0.0 {
            return (Vec2::ZERO, true);
        }
        let half = self.target.width / 2.0;
        let phone = self.setup.display.phone;
        let inner = Rect::new(phone.center, phone.width - 2e-6, phone.height - 2e-6);
        for _ in 0..MAX_SCATTER_DRAWS {
            let e = Vec2::new(gauss(rng), gauss(rng)) * sigma;
            let r = (e * gain).norm();
            if (r - half).abs() < RIM_GUARD {
                continue;
            }
            if self.method != Method::PT && !inner.contains(base + e) {
                continue;
            }
            return (e, r <= half);
        }
        (Vec2::ZERO, true)
    }

    fn start_tap(&self, tl: &mut Timeline) {
        let c = self.setup.display.start_point.extend(self.z_touch);
        let travel = (c - tl.position()).norm();
        let lift = if self.method == Method::ZM { 0.0 } else { HOVER_LIFT };
        tl.segment(c, (travel / 0.5).max(0.15), lift, Touch::None);
        tl.segment(c, self.params.reaction_time, 0.0, Touch::Down);
        tl.segment(c, TAP_DWELL, 0.0, Touch::Up);
    }

    /// Primary movement from the start target. Returns the finger position the
    /// endpoint scatter is applied around, the scatter and the hit flag.
    fn primary(&self, tl: &mut Timeline, plan: &MotorPlan, rng: &mut ChaCha8Rng) -> Result<(Vec2, Vec2, bool), AgentError> {
        let c2 = self.setup.display.start_point;
        let c = c2.extend(self.z_touch);
        let u = check_target(self.setup, self.target)?;
        let budget = self.movement_time(plan.id, rng);
        let exact = self.params.max_retries == 0;
        let mut segs = Vec::new();
        let base = match self.method {
            Method::PT => {
                let base = self.target.center;
                let (e, hit) = self.scatter(base, 1.0, exact, rng);
                let to = (base + e).extend(self.z_touch);
                segs.push(seg(to, HOVER_LIFT + 0.1 * self.target.distance, Touch::Down, (to - c).norm()));
                segs.push(seg(to, 0.0, Touch::Up, 0.0));
                emit(tl, segs, budget, self.params.clutch_penalty);
                return Ok((base, e, hit));
            }
            Method::ST => {
                // drag the scene by -D u so the target ends up under the start point
                let v = -u;
                let layout = stroke_layout(self.setup, self.method, v, plan.distance)?;
                for i in 0..layout.n {
                    let (a, b) = layout.stroke(i);
                    let (start, end) = ((c2 + v * a).extend(self.z_touch), (c2 + v * b).extend(self.z_touch));
                    if i == 0 {
                        segs.push(seg(start, 0.0, Touch::Down, 0.0));
                    } else {
                        let hop = (start - tl_pos(&segs, c)).norm();
                        segs.push(Seg { clutch: true, ..seg(start, HOVER_LIFT, Touch::Down, hop) });
                    }
                    segs.push(seg(end, 0.0, Touch::Up, b - a));
                }
                c2
            }
            Method::ZM => {
                let z = plan.arc_height.unwrap_or(self.zmap.h_max);
                let clutch_z = self.setup.roi_top() + CLUTCH_CLEARANCE;
                let layout = stroke_layout(self.setup, self.method, u, plan.distance)?;
                let mut end = c2;
                for i in 0..layout.n {
                    let (a, b) = layout.stroke(i);
                    let start = c2 + u * a;
                    if i == 0 {
                        segs.push(seg(start.extend(z), 0.0, Touch::None, z - self.z_touch));
                    } else {
                        segs.push(Seg { clutch: true, ..seg(end.extend(clutch_z), 0.0, Touch::None, clutch_z - z) });
                        segs.push(seg(start.extend(clutch_z), 0.0, Touch::None, (start - end).norm()));
                        segs.push(seg(start.extend(z), 0.0, Touch::None, clutch_z - z));
                    }
                    end = c2 + u * b;
                    segs.push(seg(end.extend(z), 0.0, Touch::None, b - a));
                }
                segs.push(seg(end.extend(self.z_touch), 0.0, Touch::None, z - self.z_touch));
                end
            }
        };
        let gain = self.touch_gain();
        let (e, hit) = self.scatter(base, gain, exact, rng);
        let to = (base + e).extend(self.z_touch);
        let lift = if self.method == Method::ZM { 0.0 } else { HOVER_LIFT };
        segs.push(seg(to, lift, Touch::Down, (to - tl_pos(&segs, c)).norm()));
        segs.push(seg(to, 0.0, Touch::Up, 0.0));
        emit(tl, segs, budget, self.params.clutch_penalty);
        Ok((base, e, hit))
    }

    fn touch_gain(&self) -> f64 {
        match self.method {
            Method::ZM => zmap_gain(self.z_touch, &self.zmap),
            _ => 1.0,
        }
    }

    /// Corrective sub-movement after a miss at offset `e` from `base`.
    fn correct(&self, tl: &mut Timeline, base: Vec2, e: Vec2, exact: bool, rng: &mut ChaCha8Rng) -> Result<(Vec2, bool), AgentError> {
        let gain = self.touch_gain();
        let id = fitts_id((e * gain).norm().max(f64::MIN_POSITIVE), self.target.width)?;
        let budget = self.movement_time(id, rng);
        let (e2, hit) = self.scatter(base, gain, exact, rng);
        let to = (base + e2).extend(self.z_touch);
        let lift = if self.method == Method::ZM { 0.0 } else { 0.5 * HOVER_LIFT };
        let segs = vec![seg(to, lift, Touch::Down, (e2 - e).norm()), seg(to, 0.0, Touch::Up, 0.0)];
        emit(tl, segs, budget, 0.0);
        Ok((e2, hit))
    }

    /// Full trial from wherever the finger is; returns (plan, MT, misses).
    fn run(&self, tl: &mut Timeline, rng: &mut ChaCha8Rng) -> Result<(MotorPlan, f64, u32), AgentError> {
        let plan = motor_plan(self.setup, self.method, self.target, self.params)?;
        self.start_tap(tl);
        let armed = tl.time();
        let (base, mut e, mut hit) = self.primary(tl, &plan, rng)?;
        let mut misses = 0;
        while !hit {
            misses += 1;
            let exact = misses >= self.params.max_retries;
            (e, hit) = self.correct(tl, base, e, exact, rng)?;
        }
        if plan.strokes > 1 {
            debug!("{} target {}: {} strokes", self.method, self.target.index, plan.strokes);
        }
        Ok((plan, tl.time() - armed, misses))
    }
}

/// Position the finger will be at after the segments queued so far.
fn tl_pos(segs: &[Seg], start: Vec3) -> Vec3 {
    segs.last().map_or(start, |s| s.to)
}

fn to_tracker_frame(setup: &SessionSetup, samples: &mut [InputSample]) {
    if let Some(tf) = &setup.transform {
        for s in samples {
            let p = invert_transform_point(tf, s.position());
            (s.x, s.y, s.z) = (p.x, p.y, p.z);
        }
    }
}

fn sim<'a>(setup: &'a SessionSetup, method: Method, target: &'a Target, params: &'a AgentParams) -> Result<TrialSim<'a>, AgentError> {
    params.validate()?;
    setup.validate()?;
    let zmap = setup.zmap()?;
    Ok(TrialSim { setup, zmap, params, method, target, z_touch: zmap.h_min })
}

/// Simulates one trial on its own, starting at t = 0 with the finger resting
/// on the start target. The emitted samples include the start-target tap.
pub fn simulate_trial(
    setup: &SessionSetup,
    method: Method,
    target: &Target,
    params: &AgentParams,
    seed: u64,
) -> Result<SimulatedTrialOutcome, AgentError> {
    let sim = sim(setup, method, target, params)?;
    let mut rng = derive_rng(seed, &[stream::AGENT]);
    let mut tl = Timeline::new(0.0, setup.display.start_point.extend(sim.z_touch), params.sample_rate);
    let (plan, movement_time, misses) = sim.run(&mut tl, &mut rng)?;
    let mut samples = tl.into_samples();
    to_tracker_frame(setup, &mut samples);
    Ok(SimulatedTrialOutcome { movement_time, misses, plan, samples })
}

/// Agent input for one method's trial list, driven through a live engine so
/// that every trial is known to produce exactly one record. Returns the
/// samples (tracker frame) and the records they produced.
pub fn simulate_method(
    setup: &SessionSetup,
    method: Method,
    subject: u32,
    plan_seed: u64,
    trials: &[PlannedTrial],
    params: &AgentParams,
    seed: u64,
) -> Result<(Vec<InputSample>, Vec<TrialRecord>), AgentError> {
    params.validate()?;
    let mut engine = SessionEngine::new(setup.engine_config(method, subject, plan_seed)?, trials.to_vec())?;
    let zmap = setup.zmap()?;
    let mut t = 0.0;
    let mut pos = setup.display.start_point.extend(zmap.h_min);
    let mut all = Vec::new();
    let mut records = Vec::with_capacity(trials.len());
    for trial in trials {
        let sim = sim(setup, method, &trial.target, params)?;
        let path = [stream::AGENT, u64::from(subject), method.code(), trial.trial_index as u64];
        let mut rng = derive_rng(seed, &path);
        let mut tl = Timeline::new(t, pos, params.sample_rate);
        sim.run(&mut tl, &mut rng)?;
        (t, pos) = (tl.time(), tl.position());
        let mut samples = tl.into_samples();
        to_tracker_frame(setup, &mut samples);
        let before = records.len();
        for s in &samples {
            if let Some(r) = engine.process(s)?.record {
                records.push(r);
            }
        }
        if records.len() - before != 1 {
            return Err(AgentError::Desync { method, trial: trial.trial_index, records: records.len() - before });
        }
        all.extend(samples);
    }
    Ok((all, records))
}

/// Runs every main trial of `plan` through the session engine, method by
/// method in counterbalanced order, and returns the engine's records.
pub fn simulate_session(
    plan: &SessionPlan,
    setup: &SessionSetup,
    params: &AgentParams,
    seed: u64,
) -> Result<Vec<TrialRecord>, AgentError> {
    let mut records = Vec::with_capacity(plan.methods.iter().map(|m| m.main.len()).sum());
    for &method in &plan.method_order {
        let Some(mp) = plan.for_method(method) else { continue };
        let (_, r) = simulate_method(setup, method, plan.subject_index, plan.seed, &mp.main, params, seed)?;
        records.extend(r);
    }
    Ok(records)
}
