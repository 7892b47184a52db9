//! Control-display transfer functions: direct, scaled (1:N), height-driven
//! gain (Z-Mapping) and zoom about the point under the finger (Z-Scaling).
//!
//! Terminology: the *C-D ratio* is motor displacement over display
//! displacement; the *gain* is its reciprocal, the factor applied to motor
//! displacement to obtain display displacement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{perpendicular_foot, GeometryError, Plane, Rect, Vec2, Vec3};

/// Lower bound on any gain produced by [`zmap_gain`].
pub const GAIN_FLOOR: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransferError {
    #[error("C-D ratio undefined for zero display displacement")]
    UndefinedRatio,
    #[error("gain must be positive and finite, got {0}")]
    InvalidGain(f64),
    #[error("scale must be positive, got {0}")]
    InvalidScale(f64),
    #[error("scale {value} outside configured bounds [{min}, {max}]")]
    ScaleOutOfBounds { value: f64, min: f64, max: f64 },
    #[error("invalid z-mapping parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("non-finite input sample")]
    NonFinite,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Motor displacement divided by display displacement. Always positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CdRatio(f64);

impl CdRatio {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Display displacement per unit motor displacement.
    pub fn gain(self) -> f64 {
        1.0 / self.0
    }
}

pub fn cd_ratio(delta_motor: f64, delta_display: f64) -> Result<CdRatio, TransferError> {
    if delta_display == 0.0 {
        return Err(TransferError::UndefinedRatio);
    }
    let r = (delta_motor / delta_display).abs();
    if !(r.is_finite() && r > 0.0) {
        return Err(TransferError::UndefinedRatio);
    }
    Ok(CdRatio(r))
}

/// One-to-one mapping.
pub fn map_direct(p: Vec2) -> Vec2 {
    p
}

/// Uniform gain mapping, `display = gain * motor`. The 1:N reading with
/// `H(N) = 1/N` is `map_scaled(p, 1.0 / n)`.
pub fn map_scaled(p: Vec2, gain: f64) -> Result<Vec2, TransferError> {
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(TransferError::InvalidGain(gain));
    }
    Ok(p * gain)
}

/// Which height-to-gain formula Z-Mapping uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainVariant {
    /// `G(z) = 1 + (s_l/s_s - 1) * clamp((z - h_min)/(h_max - h_min), 0, 1)`:
    /// 1:1 at the lowest height, a full input stroke covers the full output
    /// span at the highest.
    #[default]
    EndpointNormalized,
    /// `H(z) = 1 + z * N / M` with `N = h_max - h_min`, `M = s_l / s_s`,
    /// applied to the raw height in meters.
    RawHeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZMappingParams {
    pub h_min: f64,
    pub h_max: f64,
    /// Extent of the small input surface, `s_s`.
    pub input_span: f64,
    /// Extent of the large output space, `s_l`.
    pub output_span: f64,
    #[serde(default)]
    pub variant: GainVariant,
}

impl ZMappingParams {
    pub fn new(h_min: f64, h_max: f64, input_span: f64, output_span: f64) -> Result<Self, TransferError> {
        let p = Self { h_min, h_max, input_span, output_span, variant: GainVariant::EndpointNormalized };
        p.validate()?;
        Ok(p)
    }

    pub fn with_variant(mut self, variant: GainVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<(), TransferError> {
        let bad = |field, reason: &str| Err(TransferError::InvalidParams { field, reason: reason.to_string() });
        for (field, v) in [
            ("h_min", self.h_min),
            ("h_max", self.h_max),
            ("input_span", self.input_span),
            ("output_span", self.output_span),
        ] {
            if !v.is_finite() {
                return bad(field, "must be finite");
            }
        }
        if self.h_max <= self.h_min {
            return bad("h_max", "must exceed h_min");
        }
        if self.input_span <= 0.0 {
            return bad("input_span", "must be positive");
        }
        if self.output_span < self.input_span {
            return bad("output_span", "must be at least input_span");
        }
        Ok(())
    }

    /// `s_l / s_s`, the gain reached at `h_max` by the endpoint-normalized form.
    pub fn span_ratio(&self) -> f64 {
        self.output_span / self.input_span
    }
}

pub fn zmap_gain(z: f64, params: &ZMappingParams) -> f64 {
    let g = match params.variant {
        GainVariant::EndpointNormalized => {
            let t = ((z - params.h_min) / (params.h_max - params.h_min)).clamp(0.0, 1.0);
            1.0 + (params.span_ratio() - 1.0) * t
        }
        GainVariant::RawHeight => {
            let n = params.h_max - params.h_min;
            1.0 + z * n / params.span_ratio()
        }
    };
    if g.is_finite() {
        g.max(GAIN_FLOOR)
    } else {
        GAIN_FLOOR
    }
}

/// Per-session Z-Mapping state: the previous mapped position and raw sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapperState {
    f_prev: Vec2,
    p_prev: Option<Vec3>,
    bounds: Option<Rect>,
}

impl MapperState {
    /// Unprimed state that will emit `f0` on its first sample.
    pub fn new(f0: Vec2) -> Self {
        Self { f_prev: f0, p_prev: None, bounds: None }
    }

    /// Clamps every mapped output into `bounds`.
    pub fn with_bounds(mut self, bounds: Rect) -> Self {
        self.bounds = Some(bounds);
        self.f_prev = bounds.clamp(self.f_prev);
        self
    }

    pub fn mapped(&self) -> Vec2 {
        self.f_prev
    }

    pub fn last_sample(&self) -> Option<Vec3> {
        self.p_prev
    }

    pub fn is_initialized(&self) -> bool {
        self.p_prev.is_some()
    }

    /// Forgets the last sample so the next one re-primes, keeping the output.
    pub fn unprime(&mut self) {
        self.p_prev = None;
    }

    pub fn reset_to(&mut self, f0: Vec2) {
        self.p_prev = None;
        self.f_prev = self.bounds.map_or(f0, |b| b.clamp(f0));
    }
}

/// `f_t = f_{t-1} + dp_xy * G(p_z)`, evaluated at the current sample's height.
/// The first sample only primes the state.
pub fn zmap_step(state: MapperState, p_t: Vec3, params: &ZMappingParams) -> Result<(MapperState, Vec2), TransferError> {
    if !p_t.is_finite() {
        return Err(TransferError::NonFinite);
    }
    let Some(p_prev) = state.p_prev else {
        let next = MapperState { p_prev: Some(p_t), ..state };
        return Ok((next, next.f_prev));
    };
    let dp = (p_t - p_prev).xy();
    let mut f = if dp == Vec2::ZERO { state.f_prev } else { state.f_prev + dp * zmap_gain(p_t.z, params) };
    if let Some(b) = state.bounds {
        f = b.clamp(f);
    }
    let next = MapperState { f_prev: f, p_prev: Some(p_t), bounds: state.bounds };
    Ok((next, f))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZoomBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for ZoomBounds {
    fn default() -> Self {
        Self { min: 0.05, max: 1.0 }
    }
}

impl ZoomBounds {
    pub fn validate(&self) -> Result<(), TransferError> {
        if !(self.min > 0.0 && self.max >= self.min && self.max.is_finite()) {
            return Err(TransferError::InvalidParams {
                field: "zoom_bounds",
                reason: format!("need 0 < min <= max, got [{}, {}]", self.min, self.max),
            });
        }
        Ok(())
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.min && s <= self.max
    }
}

/// Uniform scale of the environment plus the translation that keeps the point
/// under the finger fixed.
///
/// An environment point `p` is rendered at `s * (p - c) + c + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZScaleState {
    pub scale: f64,
    pub env_center: Vec3,
    pub env_translation: Vec3,
    pub bounds: ZoomBounds,
}

impl ZScaleState {
    pub fn new(env_center: Vec3, bounds: ZoomBounds) -> Result<Self, TransferError> {
        bounds.validate()?;
        if !bounds.contains(1.0) {
            return Err(TransferError::ScaleOutOfBounds { value: 1.0, min: bounds.min, max: bounds.max });
        }
        Ok(Self { scale: 1.0, env_center, env_translation: Vec3::ZERO, bounds })
    }

    /// Rendered location of the environment center.
    pub fn rendered_center(&self) -> Vec3 {
        self.env_center + self.env_translation
    }
}

/// Rescales the environment to `s_new` while keeping the environment point
/// beneath the finger (its foot on the screen plane) in place.
pub fn zscale_step(state: &ZScaleState, s_new: f64, p_i: Vec3, screen: &Plane) -> Result<ZScaleState, TransferError> {
    if !(s_new > 0.0) || !s_new.is_finite() {
        return Err(TransferError::InvalidScale(s_new));
    }
    if !state.bounds.contains(s_new) {
        return Err(TransferError::ScaleOutOfBounds { value: s_new, min: state.bounds.min, max: state.bounds.max });
    }
    if !p_i.is_finite() {
        return Err(TransferError::NonFinite);
    }
    if s_new == state.scale {
        return Ok(*state);
    }
    let p_f = perpendicular_foot(p_i, screen)?;
    // scale the rendered scene about its rendered center by the relative factor
    let c = state.rendered_center();
    let p_fs = (s_new / state.scale) * (p_f - c) + c;
    let c_s = c - (p_fs - p_f);
    Ok(ZScaleState { scale: s_new, env_translation: c_s - state.env_center, ..*state })
}

/// Display-space location of environment point `p_env`.
pub fn env_point_after(state: &ZScaleState, p_env: Vec3) -> Vec3 {
    state.scale * (p_env - state.env_center) + state.env_center + state.env_translation
}

/// Environment point currently rendered at display location `q`.
pub fn env_point_under(state: &ZScaleState, q: Vec3) -> Vec3 {
    (q - state.env_center - state.env_translation) / state.scale + state.env_center
}
