//! Restoration-reserve setpoint shaping.
//!
//! The dispatcher ramp is not tracked raw: a first-order filter smooths it
//! and the filtered curve doubles as the centre of the compliance envelope.
//! The discrete update is the exact zero-order-hold solution
//! `y += (1 - exp(-dt/tau)) * (u - y)` with the input held at the sample
//! opening each step, so refining dt never changes the steady behaviour.

use serde::{Deserialize, Serialize};

use crate::machine::first_order_lag_step;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct AfrrController {
    /// Contracted reserve band, one-sided.
    pub reserve_band_w: f64,
    pub filter_tau_s: f64,
    /// Duration of the dispatcher ramp across the full band.
    pub ramp_duration_s: f64,
    /// Time to release the band after the test. The sourced test
    /// procedure leaves it unquantified; kept as configuration.
    pub release_time_s: f64,
}

impl AfrrController {
    /// Filter a sampled raw setpoint trace. Output sample k is the filter
    /// state at t = k*dt, seeded on the first sample.
    pub fn filtered_setpoint(&self, raw: &[f64], dt_s: f64) -> Vec<f64> {
        let mut filter = SetpointFilter::new(self.filter_tau_s);
        raw.iter().map(|&u| filter.step(u, dt_s)).collect()
    }
}

/// Streaming form of the setpoint filter; seeds itself on the first sample
/// so a test that starts in steady state has no artificial initial step.
#[derive(Debug, Clone, Copy)]
pub struct SetpointFilter {
    tau_s: f64,
    state: Option<f64>,
}

impl SetpointFilter {
    pub fn new(tau_s: f64) -> Self {
        assert!(tau_s > 0.0);
        SetpointFilter { tau_s, state: None }
    }

    pub fn starting_at(tau_s: f64, initial: f64) -> Self {
        SetpointFilter {
            tau_s,
            state: Some(initial),
        }
    }

    pub fn step(&mut self, raw: f64, dt_s: f64) -> f64 {
        let next = match self.state {
            None => raw,
            Some(prev) => first_order_lag_step(prev, raw, self.tau_s, dt_s),
        };
        self.state = Some(next);
        next
    }
}
