use crate::geometry::Vec3;
use crate::session::{InputSample, Touch};

/// Largest spatial step between consecutive emitted samples, meters. Keeps
/// fast movements well inside the tracker's jump gate.
const MAX_STEP: f64 = 0.01;

/// Minimum-jerk position profile: `10 t^3 - 15 t^4 + 6 t^5` on [0, 1].
pub fn min_jerk(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// Append-only sample stream with a moving finger.
#[derive(Debug, Clone)]
pub(crate) struct Timeline {
    t: f64,
    pos: Vec3,
    rate: f64,
    samples: Vec<InputSample>,
}

impl Timeline {
    pub fn new(t0: f64, pos: Vec3, rate: f64) -> Self {
        Self { t: t0, pos, rate, samples: Vec::new() }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn position(&self) -> Vec3 {
        self.pos
    }

    /// Moves to `to` over `dur` seconds along a minimum-jerk profile, raising
    /// the path by up to `lift` mid-way. The last sample carries `end`.
    pub fn segment(&mut self, to: Vec3, dur: f64, lift: f64, end: Touch) {
        debug_assert!(dur > 0.0);
        let from = self.pos;
        let len = (to - from).norm() + 2.0 * lift;
        let n = ((dur * self.rate).ceil() as usize).max((len / MAX_STEP).ceil() as usize).max(1);
        for k in 1..=n {
            let (t, p, touch) = if k == n {
                (self.t + dur, to, end)
            } else {
                let tau = k as f64 / n as f64;
                let s = min_jerk(tau);
                let mut p = from + (to - from) * s;
                p.z += lift * 4.0 * s * (1.0 - s);
                (self.t + dur * tau, p, Touch::None)
            };
            self.samples.push(InputSample::new(t, p, touch));
        }
        self.t += dur;
        self.pos = to;
    }

    pub fn into_samples(self) -> Vec<InputSample> {
        self.samples
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_endpoints_and_symmetry() {
        assert_eq!(min_jerk(0.0), 0.0);
        assert_eq!(min_jerk(1.0), 1.0);
        assert!((min_jerk(0.5) - 0.5).abs() < 1e-15);
        for i in 1..50 {
            let t = i as f64 / 100.0;
            assert!((min_jerk(t) + min_jerk(1.0 - t) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn segment_ends_exactly() {
        let mut tl = Timeline::new(1.0, Vec3::ZERO, 100.0);
        let to = Vec3::new(0.1, -0.02, 0.0);
        tl.segment(to, 0.3, 0.02, Touch::Down);
        let s = tl.into_samples();
        let last = s.last().unwrap();
        assert_eq!(last.position(), to);
        assert_eq!(last.t, 1.3);
        assert_eq!(last.touch, Touch::Down);
        assert!(s.windows(2).all(|w| w[1].t > w[0].t));
        assert!(s.iter().rev().skip(1).all(|x| x.touch == Touch::None));
    }

    #[test]
    fn vertical_segment_keeps_xy_bitwise() {
        let mut tl = Timeline::new(0.0, Vec3::new(0.0123, -0.0456, 0.01), 100.0);
        tl.segment(Vec3::new(0.0123, -0.0456, 0.2), 0.2, 0.0, Touch::None);
        assert!(tl.into_samples().iter().all(|s| s.x == 0.0123 && s.y == -0.0456));
    }
}
