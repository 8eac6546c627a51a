//! Electrical coupling of a unit to the grid, per technology.
//!
//! Fixed-speed machines are synchronously locked: the rotor follows grid
//! frequency exactly and the electrical power is whatever balances the
//! shaft, including the inertial exchange during frequency transients.
//! Variable-speed machines exchange power through a converter modelled as
//! a first-order lag on the power setpoint; the rotor then obeys the swing
//! equation, decoupled from grid frequency.

use serde::{Deserialize, Serialize};

/// Exact discrete update of a first-order lag for piecewise-constant input:
/// `state_next = state + (1 - exp(-dt/tau)) * (input - state)`.
pub fn first_order_lag_step(state: f64, input: f64, tau_s: f64, dt_s: f64) -> f64 {
    if tau_s <= 0.0 {
        input
    } else {
        state + (1.0 - (-dt_s / tau_s).exp()) * (input - state)
    }
}

/// Admissible speed band of a variable-speed machine.
///
/// `steady_*` bounds trigger supervisory action (control strategy switch);
/// the transient band extends them by `transient_margin` and crossing it is
/// either a compliance violation or, below a stall floor, a hard abort.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SpeedLimits {
    pub steady_min_rpm: f64,
    pub steady_max_rpm: f64,
    /// Relative transient allowance beyond the steady band (e.g. 0.02).
    pub transient_margin: f64,
    /// Speed below which converter control is lost and the run aborts.
    pub stall_rpm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeedStatus {
    InWindow,
    BelowSteady,
    AboveSteady,
    BelowTransient,
    AboveTransient,
    Stalled,
}

impl SpeedLimits {
    pub fn transient_min_rpm(&self) -> f64 {
        self.steady_min_rpm * (1.0 - self.transient_margin)
    }

    pub fn transient_max_rpm(&self) -> f64 {
        self.steady_max_rpm * (1.0 + self.transient_margin)
    }

    pub fn check(&self, n_rpm: f64) -> SpeedStatus {
        if n_rpm < self.stall_rpm {
            SpeedStatus::Stalled
        } else if n_rpm < self.transient_min_rpm() {
            SpeedStatus::BelowTransient
        } else if n_rpm > self.transient_max_rpm() {
            SpeedStatus::AboveTransient
        } else if n_rpm < self.steady_min_rpm {
            SpeedStatus::BelowSteady
        } else if n_rpm > self.steady_max_rpm {
            SpeedStatus::AboveSteady
        } else {
            SpeedStatus::InWindow
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_reaches_63_percent_after_one_time_constant() {
        // 10 MW setpoint step through a 100 ms converter lag, stepped at
        // 10 ms: after 100 ms the response sits at 1 - 1/e of the step.
        let dt = 0.01;
        let tau = 0.1;
        let mut p = 0.0;
        for _ in 0..10 {
            p = first_order_lag_step(p, 10.0e6, tau, dt);
        }
        let expected = 10.0e6 * (1.0 - (-1.0f64).exp());
        assert!(
            (p - expected).abs() < 1e-6 * expected,
            "exact discretisation must land on the analytic lag response"
        );
    }

    #[test]
    fn zero_lag_passes_the_input_through() {
        assert_eq!(first_order_lag_step(3.0, 7.0, 0.0, 0.01), 7.0);
    }

    #[test]
    fn speed_window_classification() {
        let limits = SpeedLimits {
            steady_min_rpm: 350.0,
            steady_max_rpm: 381.0,
            transient_margin: 0.02,
            stall_rpm: 187.5,
        };
        assert_eq!(limits.check(365.5), SpeedStatus::InWindow);
        assert_eq!(limits.check(349.0), SpeedStatus::BelowSteady);
        assert_eq!(limits.check(384.0), SpeedStatus::AboveSteady);
        assert_eq!(limits.check(342.0), SpeedStatus::BelowTransient);
        assert_eq!(limits.check(390.0), SpeedStatus::AboveTransient);
        assert_eq!(limits.check(100.0), SpeedStatus::Stalled);
        assert!((limits.transient_min_rpm() - 343.0).abs() < 1e-9);
    }
}
