//! Containment-reserve droop law: power against frequency deviation.

use serde::{Deserialize, Serialize};

/// Stateless droop characteristic. Outside the deadband the command is
/// `-df / (droop * f_n) * p_base`, clamped to the contracted reserve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct FcrController {
    pub droop_pu: f64,
    pub deadband_hz: f64,
    pub reserve_w: f64,
    pub f_n_hz: f64,
    pub p_base_w: f64,
}

impl FcrController {
    pub fn command_w(&self, f_meas_hz: f64) -> f64 {
        assert!(f_meas_hz.is_finite());
        let df = f_meas_hz - self.f_n_hz;
        if df.abs() <= self.deadband_hz {
            return 0.0;
        }
        (-df / (self.droop_pu * self.f_n_hz) * self.p_base_w)
            .clamp(-self.reserve_w, self.reserve_w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Pump at 3.5 % droop on a 390 MW base with a 45 MW contracted band.
    fn pump_band() -> FcrController {
        FcrController {
            droop_pu: 0.035,
            deadband_hz: 0.0,
            reserve_w: 45.0e6,
            f_n_hz: 50.0,
            p_base_w: 390.0e6,
        }
    }

    #[test]
    fn nominal_frequency_commands_nothing() {
        assert_eq!(pump_band().command_w(50.0), 0.0);
    }

    #[test]
    fn pump_droop_reproduces_the_contracted_band() {
        // 3.5 % droop, 390 MW base, -200 mHz: 0.2 / 1.75 * 390 = 44.57 MW,
        // within a percent of the 45 MW band it was sized for.
        let cmd = pump_band().command_w(49.8);
        assert!((cmd - 0.2 / (0.035 * 50.0) * 390.0e6).abs() < 1.0);
        assert!((cmd - 45.0e6).abs() / 45.0e6 < 0.01);
    }

    #[test]
    fn extreme_deviation_clamps_at_the_reserve() {
        assert_eq!(pump_band().command_w(48.0), 45.0e6);
        assert_eq!(pump_band().command_w(52.0), -45.0e6);
    }

    #[test]
    fn deadband_gates_small_deviations() {
        let ctrl = FcrController {
            deadband_hz: 0.01,
            ..pump_band()
        };
        assert_eq!(ctrl.command_w(50.009), 0.0);
        assert!(ctrl.command_w(50.011) < 0.0);
    }

    proptest! {
        #[test]
        fn command_is_odd_in_the_deviation(df in 0.0f64..2.0) {
            let ctrl = FcrController { deadband_hz: 0.02, ..pump_band() };
            let sum = ctrl.command_w(50.0 + df) + ctrl.command_w(50.0 - df);
            // Floating rounding of 50 +/- df is not perfectly symmetric, so
            // allow the last few bits.
            prop_assert!(sum.abs() <= 1e-6 * ctrl.command_w(50.0 - df).abs().max(1.0));
        }

        #[test]
        fn command_is_exactly_linear_between_deadband_and_clamp(df in -2.0f64..2.0) {
            let ctrl = FcrController { deadband_hz: 0.02, ..pump_band() };
            let f = 50.0 + df;
            let cmd = ctrl.command_w(f);
            prop_assert!(cmd.abs() <= ctrl.reserve_w);
            let dev = f - ctrl.f_n_hz;
            if dev.abs() > ctrl.deadband_hz && cmd.abs() < ctrl.reserve_w {
                let linear = -dev / (ctrl.droop_pu * ctrl.f_n_hz) * ctrl.p_base_w;
                prop_assert_eq!(cmd, linear);
            }
        }
    }
}
