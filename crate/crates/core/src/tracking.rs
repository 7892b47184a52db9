//! Marker-frame processing: picking the finger marker out of a frame, the
//! three-marker rigid-body rule, and the per-user height calibration.

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;

/// Fewest visible markers with which a rigid body is still tracked.
pub const MIN_RIGID_BODY_MARKERS: usize = 3;

/// Default number of samples required per calibration pose.
pub const DEFAULT_MIN_CALIBRATION_SAMPLES: usize = 10;

/// Two candidates closer than this to `prev` in distance are a tie.
const TIE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TrackingError {
    #[error("invalid filter config: {0}")]
    InvalidConfig(String),
    #[error("rigid body needs at least {MIN_RIGID_BODY_MARKERS} markers, expected_count = {0}")]
    RigidBodyConfig(usize),
    #[error("calibration failed: h_max {h_max} must exceed h_min {h_min}")]
    CalibrationFailed { h_min: f64, h_max: f64 },
    #[error("insufficient calibration data in {pose} pose: {got} samples, need {need}")]
    InsufficientData { pose: &'static str, got: usize, need: usize },
    #[error("line {line}: {message}")]
    Stream { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One tracker frame: a timestamp and every visible marker position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerFrame {
    #[serde(rename = "t")]
    pub timestamp: f64,
    #[serde(with = "marker_list")]
    pub markers: Vec<Vec3>,
}

mod marker_list {
    use super::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[Vec3], s: S) -> Result<S::Ok, S::Error> {
        m.iter().map(|v| v.to_array()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec3>, D::Error> {
        Ok(Vec::<[f64; 3]>::deserialize(d)?.into_iter().map(Vec3::from).collect())
    }
}

/// Axis-aligned working volume and per-frame jump gate for the finger marker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerFilterConfig {
    pub roi_min: Vec3,
    pub roi_max: Vec3,
    pub max_jump: f64,
}

impl FingerFilterConfig {
    pub fn validate(&self) -> Result<(), TrackingError> {
        let (lo, hi) = (self.roi_min, self.roi_max);
        if !(lo.x < hi.x && lo.y < hi.y && lo.z < hi.z) {
            return Err(TrackingError::InvalidConfig("roi_min must be below roi_max on every axis".into()));
        }
        if !(self.max_jump > 0.0) {
            return Err(TrackingError::InvalidConfig(format!("max_jump must be positive, got {}", self.max_jump)));
        }
        Ok(())
    }

    pub fn in_roi(&self, p: Vec3) -> bool {
        let (lo, hi) = (self.roi_min, self.roi_max);
        p.is_finite() && (lo.x..=hi.x).contains(&p.x) && (lo.y..=hi.y).contains(&p.y) && (lo.z..=hi.z).contains(&p.z)
    }
}

/// Picks the finger marker from `frame`.
///
/// Without a previous position the frame must contain exactly one marker in
/// the ROI. With one, the nearest ROI marker within `max_jump` of `prev` wins.
/// Ties and empty candidate sets yield `None`; the caller keeps its last
/// known position.
pub fn filter_finger_marker(frame: &MarkerFrame, prev: Option<Vec3>, cfg: &FingerFilterConfig) -> Option<Vec3> {
    let mut candidates = frame.markers.iter().copied().filter(|m| cfg.in_roi(*m));
    let Some(prev) = prev else {
        let first = candidates.next()?;
        return candidates.next().is_none().then_some(first);
    };

    let mut best: Option<(f64, Vec3)> = None;
    let mut tied = false;
    for m in candidates {
        let d = (m - prev).norm();
        if d > cfg.max_jump {
            continue;
        }
        match best {
            Some((bd, _)) if (d - bd).abs() <= TIE_TOLERANCE => tied = true,
            Some((bd, _)) if d > bd => {}
            _ => {
                best = Some((d, m));
                tied = false;
            }
        }
    }
    if tied {
        None
    } else {
        best.map(|(_, m)| m)
    }
}

/// A rigid body stays tracked while at least three of its markers are seen.
pub fn validate_rigid_body(frame: &MarkerFrame, expected_count: usize) -> Result<bool, TrackingError> {
    if expected_count < MIN_RIGID_BODY_MARKERS {
        return Err(TrackingError::RigidBodyConfig(expected_count));
    }
    let visible = frame.markers.iter().filter(|m| m.is_finite()).count().min(expected_count);
    Ok(visible >= MIN_RIGID_BODY_MARKERS)
}

/// Per-user finger height range above the input surface, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightCalibration {
    pub h_min: f64,
    pub h_max: f64,
}

impl HeightCalibration {
    pub fn new(h_min: f64, h_max: f64) -> Result<Self, TrackingError> {
        if !(h_max > h_min && h_min >= 0.0 && h_max.is_finite()) {
            return Err(TrackingError::CalibrationFailed { h_min, h_max });
        }
        Ok(Self { h_min, h_max })
    }

    pub fn span(&self) -> f64 {
        self.h_max - self.h_min
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Medians of the low-pose and high-pose height recordings, with the default
/// minimum of ten samples per pose.
pub fn calibrate_height(low: &[f64], high: &[f64]) -> Result<HeightCalibration, TrackingError> {
    calibrate_height_with(low, high, DEFAULT_MIN_CALIBRATION_SAMPLES)
}

pub fn calibrate_height_with(low: &[f64], high: &[f64], min_samples: usize) -> Result<HeightCalibration, TrackingError> {
    let need = min_samples.max(1);
    for (pose, seg) in [("low", low), ("high", high)] {
        let got = seg.iter().filter(|z| z.is_finite()).count();
        if got < need {
            return Err(TrackingError::InsufficientData { pose, got, need });
        }
    }
    let finite = |s: &[f64]| s.iter().copied().filter(|z| z.is_finite()).collect::<Vec<_>>();
    let (h_min, h_max) = (median(&finite(low)), median(&finite(high)));
    if h_max <= h_min {
        return Err(TrackingError::CalibrationFailed { h_min, h_max });
    }
    HeightCalibration::new(h_min.max(0.0), h_max)
}

/// Reads a JSON-lines marker stream, enforcing strictly increasing timestamps.
pub fn read_marker_stream<R: BufRead>(reader: R) -> Result<Vec<MarkerFrame>, TrackingError> {
    let mut frames: Vec<MarkerFrame> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let frame: MarkerFrame =
            serde_json::from_str(&line).map_err(|e| TrackingError::Stream { line: i + 1, message: e.to_string() })?;
        if let Some(last) = frames.last() {
            if !(frame.timestamp > last.timestamp) {
                return Err(TrackingError::Stream {
                    line: i + 1,
                    message: format!("timestamp {} not after {}", frame.timestamp, last.timestamp),
                });
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Stateful finger tracker over a marker stream. Holds the last accepted
/// position when a frame yields no unambiguous candidate.
#[derive(Debug, Clone)]
pub struct FingerTracker {
    cfg: FingerFilterConfig,
    last: Option<Vec3>,
    lost: bool,
    rejected: usize,
}

/// Consecutive rejected frames after which the finger counts as lost.
pub const MAX_REJECT_STREAK: usize = 3;

impl FingerTracker {
    pub fn new(cfg: FingerFilterConfig) -> Result<Self, TrackingError> {
        cfg.validate()?;
        Ok(Self { cfg, last: None, lost: false, rejected: 0 })
    }

    /// Returns the accepted finger position, or `None` when the frame was
    /// rejected (the previous position still stands).
    pub fn update(&mut self, frame: &MarkerFrame) -> Option<Vec3> {
        // after a loss the jump gate no longer applies: the first unique ROI
        // marker re-acquires the finger
        let prev = if self.lost { None } else { self.last };
        match filter_finger_marker(frame, prev, &self.cfg) {
            Some(p) => {
                self.last = Some(p);
                self.lost = false;
                self.rejected = 0;
                Some(p)
            }
            None => {
                self.rejected += 1;
                if self.rejected >= MAX_REJECT_STREAK || !frame.markers.iter().any(|m| self.cfg.in_roi(*m)) {
                    self.lost = true;
                }
                None
            }
        }
    }

    pub fn last(&self) -> Option<Vec3> {
        self.last
    }

    pub fn is_lost(&self) -> bool {
        self.lost || self.last.is_none()
    }
}
