//! Inertia emulation for converter-decoupled units.
//!
//! A grid-locked rotor exchanges `d/dt (J omega^2 / 2)` with the grid as
//! frequency moves. At nominal speed that is `tau_m * p_base * (df/dt) / f_n`,
//! so commanding the negative of it makes a converter-fed unit indistinguishable
//! from a synchronous one during frequency ramps.

use serde::{Deserialize, Serialize};

use crate::machine::first_order_lag_step;

/// Swing-equation power for a measured rate of change of frequency.
pub fn inertial_power_w(tau_m_s: f64, p_base_w: f64, rocof_hz_s: f64, f_n_hz: f64) -> f64 {
    -tau_m_s * p_base_w * rocof_hz_s / f_n_hz
}

/// Finite-difference frequency derivative smoothed by a first-order filter.
/// Differentiation amplifies measurement noise; the filter window is the
/// knob that trades response delay against that amplification.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RocofEstimatorParams {
    pub filter_tau_s: f64,
}

impl Default for RocofEstimatorParams {
    fn default() -> Self {
        RocofEstimatorParams { filter_tau_s: 0.1 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RocofEstimator {
    params: RocofEstimatorParams,
    last_f_hz: Option<f64>,
    rocof_hz_s: f64,
}

impl RocofEstimator {
    pub fn new(params: RocofEstimatorParams) -> Self {
        assert!(params.filter_tau_s >= 0.0);
        RocofEstimator {
            params,
            last_f_hz: None,
            rocof_hz_s: 0.0,
        }
    }

    pub fn step(&mut self, f_hz: f64, dt_s: f64) -> f64 {
        assert!(f_hz.is_finite() && dt_s > 0.0);
        let raw = match self.last_f_hz {
            Some(prev) => (f_hz - prev) / dt_s,
            None => 0.0,
        };
        self.last_f_hz = Some(f_hz);
        self.rocof_hz_s =
            first_order_lag_step(self.rocof_hz_s, raw, self.params.filter_tau_s, dt_s);
        self.rocof_hz_s
    }
}

/// Estimator plus swing-equation gain, packaged as one controller.
#[derive(Debug, Clone, Copy)]
pub struct InertiaEmulation {
    pub tau_m_s: f64,
    pub p_base_w: f64,
    pub f_n_hz: f64,
    estimator: RocofEstimator,
}

impl InertiaEmulation {
    pub fn new(tau_m_s: f64, p_base_w: f64, f_n_hz: f64, params: RocofEstimatorParams) -> Self {
        InertiaEmulation {
            tau_m_s,
            p_base_w,
            f_n_hz,
            estimator: RocofEstimator::new(params),
        }
    }

    pub fn step(&mut self, f_meas_hz: f64, dt_s: f64) -> f64 {
        let rocof = self.estimator.step(f_meas_hz, dt_s);
        inertial_power_w(self.tau_m_s, self.p_base_w, rocof, self.f_n_hz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{rpm_to_rad_s, RotorInertia};

    #[test]
    fn flat_frequency_commands_nothing() {
        let mut ctrl = InertiaEmulation::new(7.9, 395.0e6, 50.0, RocofEstimatorParams::default());
        for _ in 0..100 {
            assert_eq!(ctrl.step(50.0, 0.01), 0.0);
        }
    }

    #[test]
    fn ramp_response_matches_the_rotor_it_imitates() {
        // Independent oracle: the power a grid-locked rotor of the same
        // time constant releases at nominal speed, J * omega_n * domega/dt
        // with J built from tau_m. For tau_m = 7.9 s on a 395 MW base and
        // a -1 Hz/s ramp that is 62.41 MW.
        let inertia = RotorInertia::from_mechanical_time_constant(7.9, 395.0e6, 375.0);
        let omega_n = rpm_to_rad_s(375.0);
        let domega_dt = -1.0 / 50.0 * omega_n;
        let rotor_w = -inertia.j_kgm2 * omega_n * domega_dt;
        assert!((rotor_w - 62.41e6).abs() < 0.005e6);

        let mut ctrl = InertiaEmulation::new(7.9, 395.0e6, 50.0, RocofEstimatorParams::default());
        let dt = 0.001;
        let mut cmd = 0.0;
        for k in 0..1000 {
            let f = 50.0 - (k as f64 + 1.0) * dt;
            cmd = ctrl.step(f, dt);
        }
        // One second into the ramp the 100 ms estimator has converged.
        assert!(
            (cmd - rotor_w).abs() / rotor_w < 1e-3,
            "command {cmd} vs rotor {rotor_w}"
        );
    }

    #[test]
    fn command_scales_with_the_time_constant() {
        let rocof = -0.7;
        let single = inertial_power_w(7.9, 395.0e6, rocof, 50.0);
        let double = inertial_power_w(15.8, 395.0e6, rocof, 50.0);
        assert!((double - 2.0 * single).abs() < 1e-6 * single.abs());
    }
}
