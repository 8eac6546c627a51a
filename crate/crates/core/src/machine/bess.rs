//! Battery energy storage: power-limited, energy-integrating.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct BessParams {
    pub rated_power_w: f64,
    pub energy_capacity_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BessState {
    /// State of charge in [0, 1].
    pub soc: f64,
}

/// Advance the battery by one step.
///
/// Positive power discharges toward the grid.  The delivered power is the
/// command clamped to the power rating and to the energy left in (or the
/// room left of) the store; the state of charge integrates the delivered
/// power exactly, so a zero-mean delivered cycle returns to the initial
/// state of charge.
pub fn bess_step(
    state: BessState,
    p_cmd_w: f64,
    params: BessParams,
    dt_s: f64,
) -> (BessState, f64) {
    let mut p = p_cmd_w.clamp(-params.rated_power_w, params.rated_power_w);
    if p > 0.0 {
        let available = state.soc * params.energy_capacity_j / dt_s;
        p = p.min(available);
    } else {
        let room = (1.0 - state.soc) * params.energy_capacity_j / dt_s;
        p = p.max(-room);
    }
    let soc = (state.soc - p * dt_s / params.energy_capacity_j).clamp(0.0, 1.0);
    (BessState { soc }, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARAMS: BessParams = BessParams {
        rated_power_w: 180.0e3,
        energy_capacity_j: 324.0e6, // 90 kWh
    };

    #[test]
    fn command_beyond_rating_clamps_at_rated_power() {
        let (_, p) = bess_step(BessState { soc: 0.5 }, 500.0e3, PARAMS, 0.01);
        assert_eq!(p, PARAMS.rated_power_w);
        let (_, p) = bess_step(BessState { soc: 0.5 }, -500.0e3, PARAMS, 0.01);
        assert_eq!(p, -PARAMS.rated_power_w);
    }

    #[test]
    fn discharge_at_empty_delivers_nothing() {
        let (state, p) = bess_step(BessState { soc: 0.0 }, 100.0e3, PARAMS, 0.01);
        assert_eq!(p, 0.0);
        assert_eq!(state.soc, 0.0);
    }

    #[test]
    fn charge_at_full_absorbs_nothing() {
        let (state, p) = bess_step(BessState { soc: 1.0 }, -100.0e3, PARAMS, 0.01);
        assert_eq!(p, 0.0);
        assert_eq!(state.soc, 1.0);
    }

    #[test]
    fn soc_integrates_delivered_energy() {
        let dt = 0.01;
        let mut state = BessState { soc: 0.5 };
        let (next, p) = bess_step(state, 162.0e3, PARAMS, dt);
        assert_eq!(p, 162.0e3);
        let expected = 0.5 - p * dt / PARAMS.energy_capacity_j;
        assert!((next.soc - expected).abs() < 1e-15);
        state = next;
        assert!(state.soc < 0.5);
    }

    #[test]
    fn zero_mean_cycle_leaves_soc_unchanged() {
        let dt = 0.01;
        let mut state = BessState { soc: 0.5 };
        // 10 000 steps of a sine command, integer number of periods.
        for k in 0..10_000 {
            let t = k as f64 * dt;
            let cmd = 150.0e3 * (2.0 * std::f64::consts::PI * t / 10.0).sin();
            let (next, _) = bess_step(state, cmd, PARAMS, dt);
            state = next;
        }
        assert!(
            (state.soc - 0.5).abs() < 1e-6,
            "soc drifted to {}",
            state.soc
        );
    }
}
