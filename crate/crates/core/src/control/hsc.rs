//! Plant dispatch when pumping and generating units run simultaneously on
//! the shared waterway. The pump draw and the turbine output partly cancel,
//! which is the whole point: the plant holds a small or negative net power
//! while keeping full modulation range available.

use thiserror::Error;

/// One unit as the dispatcher sees it. Power is signed, motor input
/// negative.
#[derive(Debug, Clone, Copy)]
pub struct HscUnit {
    pub p_set_w: f64,
    pub p_min_w: f64,
    pub p_max_w: f64,
    /// Fixed-speed pumps cannot modulate their input power; their band
    /// collapses onto the setpoint.
    pub modulates: bool,
}

impl HscUnit {
    fn headroom_w(&self, upward: bool) -> f64 {
        if !self.modulates {
            return 0.0;
        }
        if upward {
            self.p_max_w - self.p_set_w
        } else {
            self.p_set_w - self.p_min_w
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DispatchError {
    #[error("plant modulation {delta_mw:.1} MW outside the available band [{down_mw:.1}, {up_mw:.1}] MW")]
    OutOfRange {
        delta_mw: f64,
        down_mw: f64,
        up_mw: f64,
    },
}

/// Distribute a plant-level modulation over the units, proportionally to
/// each unit's headroom in the demanded direction. The proportional rule
/// makes all modulating units saturate together, so the plant band is the
/// exact sum of the unit bands.
pub fn hsc_dispatch(plant_delta_w: f64, units: &[HscUnit]) -> Result<Vec<f64>, DispatchError> {
    for u in units {
        assert!(
            !u.modulates || (u.p_min_w <= u.p_set_w && u.p_set_w <= u.p_max_w),
            "setpoint outside the admissible band"
        );
    }
    let upward = plant_delta_w >= 0.0;
    let total: f64 = units.iter().map(|u| u.headroom_w(upward)).sum();
    if plant_delta_w.abs() > total * (1.0 + 1e-12) {
        let down: f64 = units.iter().map(|u| u.headroom_w(false)).sum();
        let up: f64 = units.iter().map(|u| u.headroom_w(true)).sum();
        return Err(DispatchError::OutOfRange {
            delta_mw: plant_delta_w / 1.0e6,
            down_mw: -down / 1.0e6,
            up_mw: up / 1.0e6,
        });
    }
    Ok(units
        .iter()
        .map(|u| {
            let share = if total > 0.0 {
                plant_delta_w * u.headroom_w(upward) / total
            } else {
                0.0
            };
            u.p_set_w + share
        })
        .collect())
}
