//! Piecewise-linear signal schedules.

/// A signal defined by `(time, value)` knots, linearly interpolated and
/// clamped outside the covered span. Two knots at the same time encode a
/// step that takes effect exactly at that instant; test frequency profiles
/// prefer short ramps over true steps so that grid-locked rotors see a
/// finite rate of change.
#[derive(Debug, Clone)]
pub struct Schedule {
    points: Vec<(f64, f64)>,
}

impl Schedule {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        assert!(!points.is_empty(), "schedule needs at least one knot");
        assert!(
            points.windows(2).all(|w| w[0].0 <= w[1].0),
            "knot times must be non-decreasing"
        );
        Self { points }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(vec![(0.0, value)])
    }

    /// A hold at `base`, then a linear excursion to `target` starting at
    /// `t_start_s` and completing in `ramp_s`.
    pub fn ramp_to(base: f64, target: f64, t_start_s: f64, ramp_s: f64) -> Self {
        assert!(ramp_s > 0.0, "ramp duration must be positive");
        Self::new(vec![
            (0.0, base),
            (t_start_s, base),
            (t_start_s + ramp_s, target),
        ])
    }

    pub fn value(&self, t_s: f64) -> f64 {
        let idx = self.points.partition_point(|p| p.0 <= t_s);
        if idx == 0 {
            return self.points[0].1;
        }
        if idx == self.points.len() {
            return self.points[idx - 1].1;
        }
        let (t0, v0) = self.points[idx - 1];
        let (t1, v1) = self.points[idx];
        if t1 <= t0 {
            return v0;
        }
        v0 + (v1 - v0) * (t_s - t0) / (t1 - t0)
    }

    /// Rate of change of the active segment; zero on holds and outside the
    /// covered span. Grid-locked rotors need this as the true rate the
    /// frequency trajectory imposes.
    pub fn slope(&self, t_s: f64) -> f64 {
        let idx = self.points.partition_point(|p| p.0 <= t_s);
        if idx == 0 || idx == self.points.len() {
            return 0.0;
        }
        let (t0, v0) = self.points[idx - 1];
        let (t1, v1) = self.points[idx];
        if t1 <= t0 {
            return 0.0;
        }
        (v1 - v0) / (t1 - t0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_clamps() {
        let s = Schedule::new(vec![(0.0, 50.0), (10.0, 50.0), (12.0, 49.8)]);
        assert_eq!(s.value(-5.0), 50.0);
        assert_eq!(s.value(5.0), 50.0);
        assert!((s.value(11.0) - 49.9).abs() < 1e-12);
        assert_eq!(s.value(12.0), 49.8);
        assert_eq!(s.value(100.0), 49.8);
    }

    #[test]
    fn duplicate_knot_times_step_at_the_instant() {
        let s = Schedule::new(vec![(0.0, 1.0), (5.0, 1.0), (5.0, 2.0)]);
        assert_eq!(s.value(4.999), 1.0);
        assert_eq!(s.value(5.0), 2.0);
        assert_eq!(s.value(6.0), 2.0);
    }

    #[test]
    fn ramp_to_reaches_the_target_on_time() {
        let s = Schedule::ramp_to(50.0, 49.8, 10.0, 0.1);
        assert_eq!(s.value(10.0), 50.0);
        assert!((s.value(10.05) - 49.9).abs() < 1e-12);
        assert_eq!(s.value(10.1), 49.8);
    }

    #[test]
    fn slope_follows_the_active_segment() {
        let s = Schedule::ramp_to(50.0, 49.8, 10.0, 0.5);
        assert_eq!(s.slope(5.0), 0.0);
        assert!((s.slope(10.2) - (-0.4)).abs() < 1e-12);
        assert_eq!(s.slope(11.0), 0.0);
    }
}
