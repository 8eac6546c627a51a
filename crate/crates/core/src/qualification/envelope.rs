//! Delivery-envelope checkers.
//!
//! Each service contract is a short list of rules on the delivered-power
//! trace. A checker reports at most one violation per rule, so a failing
//! scenario reads as a diagnosis rather than a wall of samples. Tightening
//! any limit can only add violations, never remove one; the tests exercise
//! that property on randomised traces because the capability searches
//! depend on it.
//!
//! Traces are `(time, value)` slices with time counted from the activation
//! instant and delivery oriented so that compliant response is positive.

use thiserror::Error;

use crate::config::TestWindows;
use crate::control::SetpointFilter;

use super::Violation;

/// Delivery below this fraction of the contracted capacity counts as
/// returned to rest.
pub const RETURN_THRESHOLD_PU: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvelopeError {
    #[error("trace ends at {end_s:.3} s but the check needs {need_s:.3} s")]
    TraceTooShort { end_s: f64, need_s: f64 },
    #[error("time axis has {times} samples but a value channel has {values}")]
    MismatchedLengths { times: usize, values: usize },
}

/// Primary-reserve delivery rules on a step disturbance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcrLimits {
    /// Tolerance on the delivered reserve, per unit of the reserve.
    pub e_v_pu: f64,
    /// Deadline for the first noticeable response (s).
    pub t_i_max_s: f64,
    /// Deadline for full reserve delivery (s).
    pub t_r_max_s: f64,
    /// Delivery must stay in band out to this time (s).
    pub hold_s: f64,
}

impl Default for FcrLimits {
    fn default() -> Self {
        Self {
            e_v_pu: 0.05,
            t_i_max_s: 2.0,
            t_r_max_s: 30.0,
            hold_s: 120.0,
        }
    }
}

impl FcrLimits {
    pub fn for_windows(windows: &TestWindows) -> Self {
        Self {
            hold_s: windows.fcr_hold_s,
            ..Self::default()
        }
    }
}

/// Secondary-reserve tracking rules on a full-band setpoint ramp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfrrLimits {
    /// Tolerance band around the filtered setpoint, per unit of the
    /// reserve band.
    pub e_v_pu: f64,
    /// Time constant of the setpoint filter that defines the band centre
    /// (s). The checker re-derives the centre from the raw setpoint with
    /// this filter so it cannot drift from the dispatcher's.
    pub filter_tau_s: f64,
    /// Grace period before the band is enforced (s).
    pub t_i_max_s: f64,
    /// End of the enforced window (s).
    pub window_s: f64,
}

impl Default for AfrrLimits {
    fn default() -> Self {
        Self {
            e_v_pu: 0.05,
            filter_tau_s: 20.0,
            t_i_max_s: 2.0,
            window_s: 400.0,
        }
    }
}

impl AfrrLimits {
    pub fn for_windows(windows: &TestWindows) -> Self {
        assert!(
            windows.afrr_window_s > windows.afrr_ramp_s,
            "checked window must outlast the ramp"
        );
        Self {
            window_s: windows.afrr_window_s,
            ..Self::default()
        }
    }
}

/// Fast-reserve delivery rules for one activation cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FfrLimits {
    /// Frequency threshold the delivery is contracted against (Hz);
    /// context for the disturbance, not used on the trace itself.
    pub activation_level_hz: f64,
    /// Deadline for reaching full capacity (s).
    pub full_activation_max_s: f64,
    /// Minimum duration at or above capacity, measured from the instant
    /// full capacity is first reached (s).
    pub support_min_s: f64,
    /// Headroom above capacity before delivery counts as over-injection,
    /// per unit of capacity.
    pub over_delivery_max_pu: f64,
    /// Delivery must be back at rest before this time (s).
    pub cycle_max_s: f64,
}

impl FfrLimits {
    /// Limits for one of the contracted activation levels; `None` when the
    /// framework defines no deadline for `level_hz`.
    pub fn for_level(level_hz: f64) -> Option<Self> {
        crate::control::full_activation_time_s(level_hz).map(|t| Self {
            activation_level_hz: level_hz,
            full_activation_max_s: t,
            support_min_s: 30.0,
            over_delivery_max_pu: 0.20,
            cycle_max_s: 900.0,
        })
    }
}

impl Default for FfrLimits {
    fn default() -> Self {
        Self::for_level(49.7).expect("49.7 Hz is a contracted level")
    }
}

fn check_lengths(time_s: &[f64], values: &[f64]) -> Result<(), EnvelopeError> {
    if time_s.len() == values.len() {
        Ok(())
    } else {
        Err(EnvelopeError::MismatchedLengths {
            times: time_s.len(),
            values: values.len(),
        })
    }
}

fn require_span(time_s: &[f64], need_s: f64) -> Result<(), EnvelopeError> {
    let end_s = time_s.last().copied().unwrap_or(0.0);
    if time_s.is_empty() || end_s < need_s {
        Err(EnvelopeError::TraceTooShort { end_s, need_s })
    } else {
        Ok(())
    }
}

/// First time the trace strictly exceeds `threshold`.
fn crossing_time(time_s: &[f64], values: &[f64], threshold: f64) -> Option<f64> {
    time_s
        .iter()
        .zip(values)
        .find(|&(_, &v)| v > threshold)
        .map(|(&t, _)| t)
}

/// First time the trace reaches `level` (non-strict).
fn reach_time(time_s: &[f64], values: &[f64], level: f64) -> Option<f64> {
    time_s
        .iter()
        .zip(values)
        .find(|&(_, &v)| v >= level)
        .map(|(&t, _)| t)
}

fn deadline_violation(
    quantity: &str,
    reached: Option<f64>,
    deadline_s: f64,
    end_s: f64,
) -> Violation {
    // A trace that never gets there reports the end of the evidence.
    let observed = reached.unwrap_or(end_s);
    Violation {
        time_s: observed,
        quantity: quantity.into(),
        observed,
        bound: deadline_s,
    }
}

/// Grade a primary-reserve trace against `limits`.
///
/// Three rules: delivery strictly above `e_v * reserve` by `t_i_max`,
/// strictly above `(1 - e_v) * reserve` by `t_r_max`, and, once full
/// delivery is reached, within `e_v * reserve` of the reserve out to
/// `hold_s`. The hold rule anchors at the measured full-delivery instant,
/// so a trace that never gets there fails the deadline rule alone.
pub fn check_fcr_envelope(
    time_s: &[f64],
    delta_p_w: &[f64],
    reserve_w: f64,
    limits: &FcrLimits,
) -> Result<Vec<Violation>, EnvelopeError> {
    check_lengths(time_s, delta_p_w)?;
    require_span(time_s, limits.hold_s)?;
    let end_s = *time_s.last().expect("span checked");
    let mut out = Vec::new();

    let first = crossing_time(time_s, delta_p_w, limits.e_v_pu * reserve_w);
    if !first.is_some_and(|t| t <= limits.t_i_max_s) {
        out.push(deadline_violation(
            "initial response time",
            first,
            limits.t_i_max_s,
            end_s,
        ));
    }

    let full = crossing_time(time_s, delta_p_w, (1.0 - limits.e_v_pu) * reserve_w);
    if !full.is_some_and(|t| t <= limits.t_r_max_s) {
        out.push(deadline_violation(
            "full reserve time",
            full,
            limits.t_r_max_s,
            end_s,
        ));
    }

    if let Some(t_full) = full {
        let band = limits.e_v_pu * reserve_w;
        for (&t, &p) in time_s.iter().zip(delta_p_w) {
            if t < t_full || t > limits.hold_s {
                continue;
            }
            let err = (p - reserve_w).abs();
            if err > band {
                out.push(Violation {
                    time_s: t,
                    quantity: "reserve hold band".into(),
                    observed: err,
                    bound: band,
                });
                break;
            }
        }
    }
    Ok(out)
}

/// Grade a secondary-reserve trace against `limits`.
///
/// One rule: past the ramp-in grace, delivery stays within
/// `e_v * reserve_band` of the filtered setpoint for the whole window.
/// `p_w` and `setpoint_w` share a frame (absolute or delta, as long as it
/// is the same one).
pub fn check_afrr_envelope(
    time_s: &[f64],
    p_w: &[f64],
    setpoint_w: &[f64],
    reserve_band_w: f64,
    limits: &AfrrLimits,
) -> Result<Vec<Violation>, EnvelopeError> {
    check_lengths(time_s, p_w)?;
    check_lengths(time_s, setpoint_w)?;
    require_span(time_s, limits.window_s)?;
    let band = limits.e_v_pu * reserve_band_w;
    let mut filter = SetpointFilter::starting_at(limits.filter_tau_s, setpoint_w[0]);
    let mut prev_t = time_s[0];
    let mut out = Vec::new();
    for ((&t, &p), &raw) in time_s.iter().zip(p_w).zip(setpoint_w) {
        let centre = filter.step(raw, t - prev_t);
        prev_t = t;
        if t <= limits.t_i_max_s || t > limits.window_s || !out.is_empty() {
            continue;
        }
        let err = (p - centre).abs();
        if err > band {
            out.push(Violation {
                time_s: t,
                quantity: "tracking band".into(),
                observed: err,
                bound: band,
            });
        }
    }
    Ok(out)
}

/// Grade a fast-reserve trace against `limits`.
///
/// Four rules: full capacity (non-strict) by `full_activation_max`;
/// delivery at or above capacity for `support_min` past the measured
/// full-activation instant (a trace that is cut before the support window
/// closes fails on duration); never more than
/// `(1 + over_delivery_max) * capacity`; and back below
/// [`RETURN_THRESHOLD_PU`] of capacity before `cycle_max`.
pub fn check_ffr_envelope(
    time_s: &[f64],
    delta_p_w: &[f64],
    capacity_w: f64,
    limits: &FfrLimits,
) -> Result<Vec<Violation>, EnvelopeError> {
    check_lengths(time_s, delta_p_w)?;
    require_span(time_s, limits.full_activation_max_s + limits.support_min_s)?;
    let end_s = *time_s.last().expect("span checked");
    let mut out = Vec::new();

    let full = reach_time(time_s, delta_p_w, capacity_w);
    if !full.is_some_and(|t| t <= limits.full_activation_max_s) {
        out.push(deadline_violation(
            "full activation time",
            full,
            limits.full_activation_max_s,
            end_s,
        ));
    }

    if let Some(t_full) = full {
        let support_end = t_full + limits.support_min_s;
        let dip = time_s
            .iter()
            .zip(delta_p_w)
            .find(|&(&t, &p)| t >= t_full && t <= support_end && p < capacity_w);
        if let Some((&t, &p)) = dip {
            out.push(Violation {
                time_s: t,
                quantity: "support level".into(),
                observed: p,
                bound: capacity_w,
            });
        } else if end_s < support_end {
            out.push(Violation {
                time_s: end_s,
                quantity: "support duration".into(),
                observed: end_s - t_full,
                bound: limits.support_min_s,
            });
        }
    }

    let ceiling = (1.0 + limits.over_delivery_max_pu) * capacity_w;
    if let Some((&t, &p)) = time_s.iter().zip(delta_p_w).find(|&(_, &p)| p > ceiling) {
        out.push(Violation {
            time_s: t,
            quantity: "over-delivery".into(),
            observed: p,
            bound: ceiling,
        });
    }

    let rest = RETURN_THRESHOLD_PU * capacity_w;
    if let Some((&t, _)) = time_s
        .iter()
        .zip(delta_p_w)
        .rev()
        .find(|&(_, &p)| p > rest)
    {
        if t >= limits.cycle_max_s {
            out.push(Violation {
                time_s: t,
                quantity: "return to rest".into(),
                observed: t,
                bound: limits.cycle_max_s,
            });
        }
    }
    Ok(out)
}
