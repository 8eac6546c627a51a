//! Synthetic hill-chart surfaces.
//!
//! Real characteristic measurements are proprietary, so shipped plant
//! descriptions generate their tables from a small analytic surrogate with
//! a plausible Francis-type shape.  The surrogate is tuned per plant through
//! the parameters below; the generated surfaces go through the same grid
//! representation, validation and interpolation as CSV-ingested tables.

use serde::{Deserialize, Serialize};

use super::characteristic::{
    CharacteristicError, MachineCharacteristic, QuadrantTable, References,
};

/// Parameters of the analytic turbine-quadrant surface.
///
/// In per-unit terms, with `nu = n_pu / sqrt(h_pu)`:
///
/// ```text
/// q(n, h, y) = q_scale * y * sqrt(h) * (1 + speed_flow_gain * (1 - nu))
/// eta(n, y)  = eta_max - c_y * (y - y_opt)^2 - c_nu * (nu - nu_opt)^2
/// t(n, h, y) = q * h * eta / n - windage * n^2
/// ```
///
/// The efficiency paraboloid keeps torque monotone in `y` for the defaults;
/// generation re-validates that convention and fails loudly when a tuning
/// breaks it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SyntheticTurbine {
    /// Full-gate per-unit flow at rated speed and head.
    pub q_scale: f64,
    /// Relative flow change per unit of (1 - nu); positive means the flow
    /// drops as the runner speeds up, typical for low specific speeds.
    pub speed_flow_gain: f64,
    pub eta_max: f64,
    pub y_opt: f64,
    pub nu_opt: f64,
    pub c_y: f64,
    pub c_nu: f64,
    /// Windage/friction torque coefficient (per-unit torque at n_pu = 1).
    pub windage: f64,
}

impl Default for SyntheticTurbine {
    fn default() -> Self {
        Self {
            q_scale: 1.0,
            speed_flow_gain: 0.15,
            eta_max: 0.91,
            y_opt: 0.92,
            nu_opt: 0.98,
            c_y: 0.25,
            c_nu: 0.9,
            windage: 0.002,
        }
    }
}

/// Parameters of the analytic pump-quadrant surface.
///
/// The pump curve follows the affinity form `h = shutoff_head * n^2 -
/// curve_coeff * q^2`; the guide vane has no influence on pump flow (the
/// vanes sit at their scheduled position, so input power is set by speed
/// and head alone).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SyntheticPump {
    /// Per-unit shutoff head at n_pu = 1.
    pub shutoff_head_pu: f64,
    /// Per-unit head drop per squared per-unit flow.
    pub curve_coeff: f64,
    pub eta: f64,
    /// Windage torque coefficient, same convention as the turbine side.
    pub windage: f64,
}

impl Default for SyntheticPump {
    fn default() -> Self {
        Self {
            shutoff_head_pu: 1.545,
            curve_coeff: 0.898,
            eta: 0.90,
            windage: 0.002,
        }
    }
}

/// Complete synthetic characteristic description (as embedded in plant
/// configuration files).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SyntheticCharacteristic {
    pub turbine: SyntheticTurbine,
    pub pump: Option<SyntheticPump>,
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step).round() as usize + 1;
    (0..count).map(|i| lo + step * i as f64).collect()
}

impl SyntheticCharacteristic {
    /// Sample the analytic surfaces onto regular grids.
    pub fn generate(
        &self,
        refs: References,
    ) -> Result<MachineCharacteristic, CharacteristicError> {
        let n_axis = axis(0.30, 1.40, 0.05);
        let h_axis = axis(0.60, 1.40, 0.05);
        let y_axis = axis(0.0, 1.0, 0.05);

        let p = &self.turbine;
        let mut q = Vec::with_capacity(n_axis.len() * h_axis.len() * y_axis.len());
        let mut t = Vec::with_capacity(q.capacity());
        for &n in &n_axis {
            for &h in &h_axis {
                let nu = n / h.sqrt();
                for &y in &y_axis {
                    let flow = p.q_scale * y * h.sqrt() * (1.0 + p.speed_flow_gain * (1.0 - nu));
                    let eta = (p.eta_max
                        - p.c_y * (y - p.y_opt).powi(2)
                        - p.c_nu * (nu - p.nu_opt).powi(2))
                    .max(0.05);
                    let torque = flow * h * eta / n - p.windage * n * n;
                    q.push(flow);
                    t.push(torque);
                }
            }
        }
        let turbine = QuadrantTable::new(n_axis, h_axis, y_axis, q, t)?;

        let pump = match &self.pump {
            None => None,
            Some(pp) => {
                let n_axis = axis(0.70, 1.30, 0.025);
                let h_axis = axis(0.60, 1.40, 0.05);
                let y_axis = vec![0.0, 1.0];
                let mut q = Vec::new();
                let mut t = Vec::new();
                for &n in &n_axis {
                    for &h in &h_axis {
                        let head_margin = pp.shutoff_head_pu * n * n - h;
                        let flow = if head_margin > 0.0 {
                            (head_margin / pp.curve_coeff).sqrt()
                        } else {
                            0.0
                        };
                        // Input torque: hydraulic power divided by pump
                        // efficiency, plus windage. Both entries of the
                        // degenerate y axis carry the same value.
                        let torque = -(flow * h / (pp.eta * n) + pp.windage * n * n);
                        for _ in 0..2 {
                            q.push(-flow);
                            t.push(torque);
                        }
                    }
                }
                Some(QuadrantTable::new(n_axis, h_axis, y_axis, q, t)?)
            }
        };

        MachineCharacteristic::new(refs, turbine, pump)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::characteristic::MachineMode;

    fn refs() -> References {
        References {
            n_ref_rpm: 375.0,
            h_ref_m: 420.0,
            q_ref_m3s: 105.0,
        }
    }

    #[test]
    fn generated_surfaces_pass_validation() {
        let synth = SyntheticCharacteristic {
            turbine: SyntheticTurbine::default(),
            pump: Some(SyntheticPump::default()),
        };
        let ch = synth.generate(refs()).unwrap();
        assert!(ch.has_pump_quadrant());
    }

    #[test]
    fn closed_gate_gives_windage_only() {
        let synth = SyntheticCharacteristic {
            turbine: SyntheticTurbine::default(),
            pump: None,
        };
        let ch = synth.generate(refs()).unwrap();
        let op = ch.operating_point(MachineMode::Turbine, 375.0, 420.0, 0.0);
        assert_eq!(op.discharge_m3s, 0.0);
        assert!(op.torque_nm < 0.0);
    }

    #[test]
    fn pump_flow_is_negative_and_grows_with_speed() {
        let synth = SyntheticCharacteristic {
            turbine: SyntheticTurbine::default(),
            pump: Some(SyntheticPump::default()),
        };
        let ch = synth.generate(refs()).unwrap();
        let slow = ch.operating_point(MachineMode::Pump, 350.0, 413.64, 1.0);
        let fast = ch.operating_point(MachineMode::Pump, 381.0, 413.64, 1.0);
        assert!(slow.discharge_m3s < 0.0);
        assert!(fast.discharge_m3s < slow.discharge_m3s);
        assert!(fast.torque_nm < slow.torque_nm);
    }

    #[test]
    fn turbine_discharge_monotone_in_opening_at_fixed_point() {
        let synth = SyntheticCharacteristic {
            turbine: SyntheticTurbine::default(),
            pump: None,
        };
        let ch = synth.generate(refs()).unwrap();
        let mut last = -1.0;
        for i in 0..=10 {
            let y = i as f64 / 10.0;
            let op = ch.operating_point(MachineMode::Turbine, 365.5, 413.64, y);
            assert!(op.discharge_m3s >= last);
            last = op.discharge_m3s;
        }
    }
}
