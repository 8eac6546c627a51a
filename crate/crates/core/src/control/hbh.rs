//! Joint hydro-battery control.
//!
//! A small battery rides with the turbine so the guide vanes stop chasing
//! every frequency wiggle: the turbine gets the low-pass trend of the
//! reserve demand (and nothing at all inside its deadband), the battery
//! takes the remainder, and a slow bias steers the battery back toward
//! half charge by shifting load onto the turbine. The battery command is
//! the residual of the turbine command, so the pair always sums to the
//! demand; when the battery saturates, the shortfall spills back to the
//! turbine.

use serde::{Deserialize, Serialize};

use crate::machine::first_order_lag_step;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct HbhJointControl {
    /// Crossover of the turbine/battery split.
    pub split_tau_s: f64,
    /// Inside this band the turbine trend input is zero and the battery
    /// carries the micro-variations alone.
    pub turbine_deadband_hz: f64,
    /// Recentering bias toward soc 0.5, in battery ratings per unit of
    /// state-of-charge error.
    pub soc_recenter_gain_pu: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct HbhSplitter {
    pub params: HbhJointControl,
    turbine_trend_w: f64,
}

impl HbhSplitter {
    pub fn new(params: HbhJointControl) -> Self {
        assert!(params.split_tau_s > 0.0);
        HbhSplitter {
            params,
            turbine_trend_w: 0.0,
        }
    }

    /// Split the reserve demand into (turbine, battery) commands.
    pub fn step(
        &mut self,
        demand_w: f64,
        delta_f_hz: f64,
        soc: f64,
        bess_rated_w: f64,
        dt_s: f64,
    ) -> (f64, f64) {
        let trend_input = if delta_f_hz.abs() <= self.params.turbine_deadband_hz {
            0.0
        } else {
            demand_w
        };
        self.turbine_trend_w = first_order_lag_step(
            self.turbine_trend_w,
            trend_input,
            self.params.split_tau_s,
            dt_s,
        );
        let recenter_w = self.params.soc_recenter_gain_pu * (0.5 - soc) * bess_rated_w;
        let turbine_raw = self.turbine_trend_w + recenter_w;

        let residual = demand_w - turbine_raw;
        let mut battery = residual.clamp(-bess_rated_w, bess_rated_w);
        if soc <= 0.0 {
            battery = battery.min(0.0);
        } else if soc >= 1.0 {
            battery = battery.max(0.0);
        }
        (demand_w - battery, battery)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> HbhJointControl {
        HbhJointControl {
            split_tau_s: 30.0,
            turbine_deadband_hz: 0.02,
            soc_recenter_gain_pu: 0.05,
        }
    }

    #[test]
    fn sustained_demand_migrates_to_the_turbine() {
        let mut split = HbhSplitter::new(params());
        let demand = 1.5e6;
        let dt = 0.1;
        let (mut turbine, mut battery) = (0.0, 0.0);
        for _ in 0..3000 {
            // Ten split time constants of a steady deviation, soc held.
            (turbine, battery) = split.step(demand, -0.1, 0.5, 180.0e3, dt);
        }
        assert!(turbine / demand > 0.99, "turbine carries {turbine}");
        assert!(battery.abs() / demand < 0.01, "battery still at {battery}");
    }

    #[test]
    fn empty_battery_leaves_the_whole_demand_on_the_turbine() {
        let mut split = HbhSplitter::new(params());
        let (turbine, battery) = split.step(1.0e6, -0.1, 0.0, 180.0e3, 0.1);
        assert_eq!(battery, 0.0);
        assert_eq!(turbine, 1.0e6);
    }

    #[test]
    fn low_soc_biases_the_battery_into_charging() {
        let mut split = HbhSplitter::new(params());
        // No demand, quiet frequency, depleted battery: the bias must
        // charge the battery and the turbine must cover that charge.
        let (turbine, battery) = split.step(0.0, 0.0, 0.1, 180.0e3, 0.1);
        assert!(battery < 0.0);
        assert!((turbine + battery).abs() < 1e-9);
    }

    #[test]
    fn guide_vane_travel_shrinks_against_a_turbine_only_baseline() {
        // Paired run on one seeded frequency trace: micro-noise inside the
        // deadband plus a slow excursion through it. Wear proxy is total
        // command travel, the distance the servo would hunt.
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let dt = 0.1;
        // Sized so the battery rating covers the micro-noise band with
        // room to spare; a battery too small to absorb the noise would
        // spill it straight back to the vanes.
        let droop_w_per_hz = 5.0e6;
        let mut split = HbhSplitter::new(params());
        let mut soc = 0.5;
        let rated = 180.0e3;
        let capacity_j = 324.0e6;
        let (mut travel_joint, mut travel_alone) = (0.0, 0.0);
        let (mut prev_joint, mut prev_alone) = (0.0, 0.0);
        for k in 0..18000 {
            let t = k as f64 * dt;
            let micro = rng.random_range(-0.018..0.018);
            let excursion = 0.03 * (t / 120.0 * std::f64::consts::TAU).sin();
            let df = micro + excursion;
            let demand = -droop_w_per_hz * df;
            let (turbine, battery) = split.step(demand, df, soc, rated, dt);
            soc = (soc - battery * dt / capacity_j).clamp(0.0, 1.0);
            travel_joint += (turbine - prev_joint).abs();
            travel_alone += (demand - prev_alone).abs();
            prev_joint = turbine;
            prev_alone = demand;
        }
        assert!(
            travel_joint < 0.25 * travel_alone,
            "joint {travel_joint:.3e} vs alone {travel_alone:.3e}"
        );
    }

    proptest! {
        #[test]
        fn commands_sum_to_the_demand(
            demands in proptest::collection::vec(-2.0e6f64..2.0e6, 1..60),
            soc0 in 0.0f64..1.0,
        ) {
            let mut split = HbhSplitter::new(params());
            let mut soc = soc0;
            for (k, &demand) in demands.iter().enumerate() {
                let df = (k as f64 * 0.7).sin() * 0.05;
                let (turbine, battery) = split.step(demand, df, soc, 180.0e3, 0.1);
                prop_assert!((turbine + battery - demand).abs() <= 1e-6 * demand.abs().max(1.0));
                prop_assert!(battery.abs() <= 180.0e3 + 1e-9);
                soc = (soc - battery * 0.1 / 324.0e6).clamp(0.0, 1.0);
            }
        }
    }
}
