//! Fast-reserve activation state machine.
//!
//! Armed, the controller watches for frequency to cross its activation
//! level. On a crossing it ramps the command to full capacity within the
//! activation time the level contracts for, holds it for the support
//! duration, ramps (or steps) back down, and then refuses any new trigger
//! until the recovery window since the trigger has passed. Crossings while
//! not armed are counted as rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// (activation level Hz, maximum full-activation time s) pairs the
/// qualification framework defines.
const ACTIVATION_TABLE: [(f64, f64); 3] = [(49.5, 0.70), (49.6, 1.00), (49.7, 1.30)];

/// Full-activation deadline contracted for an activation level, if the
/// level is one the framework defines.
pub fn full_activation_time_s(level_hz: f64) -> Option<f64> {
    ACTIVATION_TABLE
        .iter()
        .find(|(level, _)| (level_hz - level).abs() < 1e-9)
        .map(|&(_, t)| t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FfrSupport {
    /// Hold full delivery for 5 s; deactivation must be a ramp.
    Short,
    /// Hold for 30 s; stepwise deactivation is allowed.
    Long,
}

impl FfrSupport {
    pub fn hold_s(self) -> f64 {
        match self {
            FfrSupport::Short => 5.0,
            FfrSupport::Long => 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FfrParams {
    pub activation_level_hz: f64,
    pub capacity_w: f64,
    pub support: FfrSupport,
    /// Deactivation slope; `None` steps straight to zero.
    pub deactivation_rate_w_s: Option<f64>,
    /// Lockout from trigger to renewed readiness.
    pub recovery_s: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum FfrConfigError {
    #[error("activation level {0} Hz is not one of 49.5 / 49.6 / 49.7")]
    UnknownActivationLevel(f64),
    #[error("capacity must be positive, got {0} W")]
    NonPositiveCapacity(f64),
    #[error("short support requires a deactivation ramp")]
    ShortSupportNeedsRamp,
}

#[derive(Debug, Clone, Copy)]
enum FfrState {
    Armed,
    /// Time since the trigger.
    Active { t_s: f64 },
    /// Time since the trigger; re-arms at the recovery window.
    Lockout { t_s: f64 },
}

#[derive(Debug, Clone)]
pub struct FfrController {
    params: FfrParams,
    full_activation_s: f64,
    state: FfrState,
    last_f_hz: Option<f64>,
    /// Downward crossings seen while a cycle or lockout was in progress.
    pub rejected_triggers: u32,
}

impl FfrController {
    pub fn new(params: FfrParams) -> Result<Self, FfrConfigError> {
        let full_activation_s = full_activation_time_s(params.activation_level_hz).ok_or(
            FfrConfigError::UnknownActivationLevel(params.activation_level_hz),
        )?;
        if params.capacity_w <= 0.0 {
            return Err(FfrConfigError::NonPositiveCapacity(params.capacity_w));
        }
        if params.support == FfrSupport::Short && params.deactivation_rate_w_s.is_none() {
            return Err(FfrConfigError::ShortSupportNeedsRamp);
        }
        Ok(FfrController {
            params,
            full_activation_s,
            state: FfrState::Armed,
            last_f_hz: None,
            rejected_triggers: 0,
        })
    }

    pub fn full_activation_s(&self) -> f64 {
        self.full_activation_s
    }

    pub fn is_armed(&self) -> bool {
        matches!(self.state, FfrState::Armed)
    }

    fn command_at(&self, t_s: f64) -> f64 {
        let cap = self.params.capacity_w;
        if t_s < self.full_activation_s {
            return cap * t_s / self.full_activation_s;
        }
        let hold_end = self.full_activation_s + self.params.support.hold_s();
        if t_s < hold_end {
            return cap;
        }
        match self.params.deactivation_rate_w_s {
            None => 0.0,
            Some(rate) => (cap - rate * (t_s - hold_end)).max(0.0),
        }
    }

    fn cycle_end_s(&self) -> f64 {
        let hold_end = self.full_activation_s + self.params.support.hold_s();
        match self.params.deactivation_rate_w_s {
            None => hold_end,
            Some(rate) => hold_end + self.params.capacity_w / rate,
        }
    }

    /// Advance one sample; returns the power command for this instant.
    pub fn step(&mut self, f_hz: f64, dt_s: f64) -> f64 {
        assert!(f_hz.is_finite() && dt_s > 0.0);
        let level = self.params.activation_level_hz;
        let crossing = match self.last_f_hz {
            Some(prev) => prev >= level && f_hz < level,
            // A trace that opens below the level counts as a crossing.
            None => f_hz < level,
        };
        self.last_f_hz = Some(f_hz);

        if crossing {
            if matches!(self.state, FfrState::Armed) {
                self.state = FfrState::Active { t_s: 0.0 };
            } else {
                self.rejected_triggers += 1;
            }
        }

        let cmd = match self.state {
            FfrState::Armed | FfrState::Lockout { .. } => 0.0,
            FfrState::Active { t_s } => self.command_at(t_s),
        };

        self.state = match self.state {
            FfrState::Armed => FfrState::Armed,
            FfrState::Active { t_s } => {
                let t = t_s + dt_s;
                if t >= self.cycle_end_s() {
                    FfrState::Lockout { t_s: t }
                } else {
                    FfrState::Active { t_s: t }
                }
            }
            FfrState::Lockout { t_s } => {
                let t = t_s + dt_s;
                if t >= self.params.recovery_s {
                    FfrState::Armed
                } else {
                    FfrState::Lockout { t_s: t }
                }
            }
        };
        cmd
    }
}
