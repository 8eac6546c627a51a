//! Guide-vane governor: PID with permanent droop and a servo model.
//!
//! The droop is realised as a target shift, so with integral action the
//! closed loop settles where the delivered power differs from the schedule
//! by exactly `-df / (droop * f_n) * p_base`. The servo contributes a slew
//! limit and position limits; the integrator is back-calculated against the
//! position limits and frozen while the slew limit binds, so neither
//! saturation winds it up.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct GovernorParams {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Permanent droop; zero disables the frequency shift entirely.
    pub permanent_droop_pu: f64,
    /// Servo slew limit, opening per second.
    pub servo_rate_pu_s: f64,
    pub y_min_pu: f64,
    pub y_max_pu: f64,
}

/// What the governor is asked to hold this step.
#[derive(Debug, Clone, Copy)]
pub enum GovernorObjective {
    /// Track a power schedule; a frequency measurement engages the droop.
    Power {
        p_ref_w: f64,
        p_meas_w: f64,
        f_meas_hz: Option<f64>,
    },
    /// Track shaft speed (start-up, islanded operation, strategy switch).
    Speed { n_ref_rpm: f64, n_meas_rpm: f64 },
}

#[derive(Debug, Clone)]
pub struct Governor {
    pub params: GovernorParams,
    p_base_w: f64,
    f_n_hz: f64,
    integral_pu: f64,
    prev_error_pu: Option<f64>,
    y_pu: f64,
}

impl Governor {
    pub fn new(params: GovernorParams, p_base_w: f64, f_n_hz: f64, y0_pu: f64) -> Self {
        assert!(params.y_min_pu < params.y_max_pu);
        assert!(params.servo_rate_pu_s > 0.0);
        assert!(p_base_w > 0.0 && f_n_hz > 0.0);
        let y_pu = y0_pu.clamp(params.y_min_pu, params.y_max_pu);
        Governor {
            params,
            p_base_w,
            f_n_hz,
            integral_pu: y_pu,
            prev_error_pu: None,
            y_pu,
        }
    }

    /// Re-seed so the governor holds `y_pu` when the error is zero.
    pub fn hold_at(&mut self, y_pu: f64) {
        self.y_pu = y_pu.clamp(self.params.y_min_pu, self.params.y_max_pu);
        self.integral_pu = self.y_pu;
        self.prev_error_pu = None;
    }

    pub fn position_pu(&self) -> f64 {
        self.y_pu
    }

    /// Advance one step and return the new servo position.
    pub fn step(&mut self, objective: GovernorObjective, dt_s: f64) -> f64 {
        assert!(dt_s > 0.0);
        let error_pu = match objective {
            GovernorObjective::Power {
                p_ref_w,
                p_meas_w,
                f_meas_hz,
            } => {
                let mut target = p_ref_w;
                if let Some(f) = f_meas_hz {
                    if self.params.permanent_droop_pu > 0.0 {
                        target -= (f - self.f_n_hz)
                            / (self.params.permanent_droop_pu * self.f_n_hz)
                            * self.p_base_w;
                    }
                }
                (target - p_meas_w) / self.p_base_w
            }
            GovernorObjective::Speed {
                n_ref_rpm,
                n_meas_rpm,
            } => (n_ref_rpm - n_meas_rpm) / n_ref_rpm,
        };
        assert!(error_pu.is_finite(), "governor fed a non-finite measurement");

        let derivative = match self.prev_error_pu {
            Some(prev) => (error_pu - prev) / dt_s,
            None => 0.0,
        };
        self.prev_error_pu = Some(error_pu);

        let mut integral = self.integral_pu + self.params.ki * error_pu * dt_s;
        let u = self.params.kp * error_pu + integral + self.params.kd * derivative;
        let u_sat = u.clamp(self.params.y_min_pu, self.params.y_max_pu);
        // Position limit binding: bleed the excess back out of the integrator.
        integral -= u - u_sat;

        let max_dy = self.params.servo_rate_pu_s * dt_s;
        let gap = u_sat - self.y_pu;
        let slew_bound = gap.abs() > max_dy;
        // Slew limit binding with the error still pushing the same way:
        // integrating further only builds overshoot for the release.
        if slew_bound && error_pu * gap > 0.0 {
            integral = self.integral_pu;
        }
        self.integral_pu = integral;
        self.y_pu += gap.clamp(-max_dy, max_dy);
        self.y_pu
    }
}
