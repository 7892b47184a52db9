use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{fitts_id, id_category, ExperimentError};
use crate::geometry::{Rect, Vec2};
use crate::rng::{derive_rng, stream};

pub const TARGETS_PER_DIRECTION: usize = 15;

/// Targets per ID category 2, 3, 4, 5 within one direction.
pub const CATEGORY_QUOTA: [usize; 4] = [4, 4, 4, 3];

/// Keeps drawn IDs strictly inside their category so that recomputing the ID
/// from the solved (D, W) pair cannot cross a boundary.
const CATEGORY_EPS: f64 = 1e-6;

/// Large display geometry, origin at the display center, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisplayConfig {
    pub width: f64,
    pub height: f64,
    /// Phone screen lying on the large display.
    pub phone: Rect,
    /// Location of the red start target.
    pub start_point: Vec2,
    /// Diameter of the red start target.
    pub start_width: f64,
    pub min_target_width: f64,
}

impl Default for DisplayConfig {
    /// 23" 16:9 touch monitor (0.509 x 0.286 m active area) with a 4.7"
    /// phone screen placed centrally in landscape orientation.
    fn default() -> Self {
        Self {
            width: 0.509,
            height: 0.286,
            phone: Rect::new(Vec2::ZERO, 0.104, 0.0585),
            start_point: Vec2::ZERO,
            start_width: 0.02,
            min_target_width: 0.01,
        }
    }
}

impl DisplayConfig {
    pub fn rect(&self) -> Rect {
        Rect::new(Vec2::ZERO, self.width, self.height)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let err = |m: String| Err(ExperimentError::Config(m));
        if !(self.width > 0.0 && self.height > 0.0 && self.width.is_finite() && self.height.is_finite()) {
            return err(format!("display size must be positive, got {} x {}", self.width, self.height));
        }
        if !(self.min_target_width > 0.0) {
            return err("min_target_width must be positive".into());
        }
        if !(self.start_width > 0.0) {
            return err("start_width must be positive".into());
        }
        if !(self.phone.width > 0.0 && self.phone.height > 0.0) {
            return err("phone size must be positive".into());
        }
        if !self.rect().contains_rect(&self.phone) {
            return err("phone rect must lie inside the display".into());
        }
        if !self.rect().contains(self.start_point) {
            return err("start point must lie inside the display".into());
        }
        Ok(())
    }

    /// Free space from the start point to the display edge along each axis,
    /// as (negative side, positive side) pairs for x and y.
    fn extents(&self) -> [(f64, f64); 2] {
        let (lo, hi) = (self.rect().min(), self.rect().max());
        let s = self.start_point;
        [(s.x - lo.x, hi.x - s.x), (s.y - lo.y, hi.y - s.y)]
    }

    /// Largest D along `u` for which a target of width `w` keeps a clearance
    /// of its radius to every edge (center at least `w` from the edge).
    fn reach(&self, u: Vec2, w: f64) -> f64 {
        let mut d = f64::INFINITY;
        for (comp, (neg, pos)) in [u.x, u.y].into_iter().zip(self.extents()) {
            if comp.abs() < 1e-12 {
                continue;
            }
            let lim = if comp > 0.0 { pos } else { neg };
            d = d.min((lim - w) / comp.abs());
        }
        d
    }

    /// Largest D whose target of ID `id` (so `W = D / (2^id - 1)`) fits.
    fn distance_for_id(&self, u: Vec2, id: f64) -> f64 {
        let k = 1.0 / (id.exp2() - 1.0);
        let mut d = f64::INFINITY;
        for (comp, (neg, pos)) in [u.x, u.y].into_iter().zip(self.extents()) {
            if comp.abs() < 1e-12 {
                // perpendicular axis: only the width must fit on both sides
                d = d.min(neg.min(pos) / k);
                continue;
            }
            let lim = if comp > 0.0 { pos } else { neg };
            d = d.min(lim / (comp.abs() + k));
        }
        d
    }

    /// Highest ID reachable in direction `dir` with the minimum target width.
    pub fn ceiling_id(&self, dir: u8) -> Result<f64, ExperimentError> {
        let u = direction_vector(self, dir);
        let d = self.reach(u, self.min_target_width);
        if !(d > 0.0) {
            return Err(ExperimentError::Config(format!("direction {dir} has no room for a minimum-width target")));
        }
        fitts_id(d, self.min_target_width)
    }
}

/// Unit direction `dir` (0..8, counter-clockwise from +x in 45 degree steps).
///
/// Axis directions are exact; diagonal ones point at the corner of the
/// region reachable by minimum-width targets, which is where the highest
/// IDs of the design live.
pub fn direction_vector(cfg: &DisplayConfig, dir: u8) -> Vec2 {
    let dir = dir % 8;
    let [(nx, px), (ny, py)] = cfg.extents();
    let w = cfg.min_target_width;
    let v = match dir {
        0 => Vec2::new(1.0, 0.0),
        2 => Vec2::new(0.0, 1.0),
        4 => Vec2::new(-1.0, 0.0),
        6 => Vec2::new(0.0, -1.0),
        1 => Vec2::new(px - w, py - w),
        3 => Vec2::new(-(nx - w), py - w),
        5 => Vec2::new(-(nx - w), -(ny - w)),
        _ => Vec2::new(px - w, -(ny - w)),
    };
    v.normalized().unwrap_or(Vec2::new(1.0, 0.0))
}

/// A circular goal, positioned relative to the start point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    /// Position in the canonical target set.
    pub index: usize,
    pub center: Vec2,
    /// Diameter, meters.
    pub width: f64,
    pub direction: u8,
    /// Distance from the start point, meters.
    pub distance: f64,
    pub id_value: f64,
}

impl Target {
    pub fn category(&self) -> u8 {
        id_category(self.id_value).unwrap_or(5)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (p - self.center).norm() <= self.width / 2.0
    }
}

fn place(cfg: &DisplayConfig, dir: u8, nominal_id: f64, ceiling: f64) -> Result<(f64, f64), ExperimentError> {
    let u = direction_vector(cfg, dir);
    if nominal_id >= ceiling {
        let w = cfg.min_target_width;
        return Ok((cfg.reach(u, w), w));
    }
    let d = cfg.distance_for_id(u, nominal_id);
    let w = d / (nominal_id.exp2() - 1.0);
    Ok((d, w.max(cfg.min_target_width)))
}

/// Builds the canonical 120-target set: 15 per direction, spread over ID
/// categories 2..5 by [`CATEGORY_QUOTA`]. Categories a direction cannot reach
/// hand their quota to its highest reachable category, whose first target
/// sits at the direction's ceiling ID.
pub fn generate_target_set(cfg: &DisplayConfig, seed: u64) -> Result<Vec<Target>, ExperimentError> {
    cfg.validate()?;
    let mut rng = derive_rng(seed, &[stream::TARGETS]);
    let mut out = Vec::with_capacity(8 * TARGETS_PER_DIRECTION);

    for dir in 0..8u8 {
        let ceiling = cfg.ceiling_id(dir)?;
        if ceiling <= 2.0 - 0.5 + CATEGORY_EPS {
            return Err(ExperimentError::Config(format!(
                "display too small: direction {dir} cannot host category-2 targets (max ID {ceiling:.3})"
            )));
        }
        let top = id_category(ceiling.min(5.5))?;
        let mut quota = [0usize; 4];
        for (i, q) in CATEGORY_QUOTA.iter().enumerate() {
            let cat = (i as u8 + 2).min(top);
            quota[usize::from(cat - 2)] += q;
        }

        for (i, &n) in quota.iter().enumerate() {
            let cat = i as f64 + 2.0;
            let lo = cat - 0.5 + CATEGORY_EPS;
            let hi = (cat + 0.5 - CATEGORY_EPS).min(ceiling);
            for j in 0..n {
                let pinned = (i as u8 + 2) == top && j == 0;
                let nominal = if pinned || hi <= lo { ceiling } else { rng.random_range(lo..hi) };
                let (d, w) = place(cfg, dir, nominal, ceiling)?;
                let u = direction_vector(cfg, dir);
                out.push(Target {
                    index: out.len(),
                    center: cfg.start_point + u * d,
                    width: w,
                    direction: dir,
                    distance: d,
                    id_value: fitts_id(d, w)?,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_ceilings() {
        let cfg = DisplayConfig::default();
        let corner = cfg.ceiling_id(1).unwrap();
        let side = cfg.ceiling_id(0).unwrap();
        assert!((corner - 4.85).abs() < 0.02, "corner ceiling {corner}");
        assert!((side - 4.67).abs() < 0.02, "side ceiling {side}");
        for d in [1, 3, 5, 7] {
            assert!((cfg.ceiling_id(d).unwrap() - corner).abs() < 1e-12);
        }
    }

    #[test]
    fn placement_hits_nominal_id() {
        let cfg = DisplayConfig::default();
        for dir in 0..8 {
            let ceiling = cfg.ceiling_id(dir).unwrap();
            for id in [1.6, 2.0, 3.3, ceiling - 0.01] {
                let (d, w) = place(&cfg, dir, id, ceiling).unwrap();
                assert!((fitts_id(d, w).unwrap() - id).abs() < 1e-9, "dir {dir} id {id}");
                assert!(w >= cfg.min_target_width - 1e-15);
            }
        }
    }

    #[test]
    fn targets_stay_inside_display() {
        let cfg = DisplayConfig::default();
        let r = cfg.rect();
        for t in generate_target_set(&cfg, 3).unwrap() {
            let half = t.width / 2.0;
            let inner = Rect::new(r.center, r.width - 2.0 * half, r.height - 2.0 * half);
            assert!(inner.contains(t.center), "{t:?}");
        }
    }

    #[test]
    fn tiny_display_is_rejected() {
        let cfg = DisplayConfig {
            width: 0.04,
            height: 0.04,
            phone: Rect::new(Vec2::ZERO, 0.01, 0.01),
            ..DisplayConfig::default()
        };
        assert!(matches!(generate_target_set(&cfg, 0), Err(ExperimentError::Config(_))));
    }
}
