//! Service qualification: drive the plant through one scenario per grid
//! service, grade the delivered power against the service envelope, and
//! search for the largest capability that still complies.
//!
//! Every runner follows the same shape: build the plant from the shared
//! config, initialise a steady operating point, replay a disturbance or
//! setpoint schedule while the technology-appropriate control loops act,
//! then hand the recorded trace to the envelope checker. Capability-type
//! services (FCR, FFR, black start) wrap that trial in a bisection for the
//! largest compliant level; pass/fail services (aFRR, inertia) run once at
//! the contracted level.

pub mod bench;
pub mod envelope;

mod afrr;
mod blackstart;
mod fcr;
mod ffr;
mod inertia;
mod voltvar;

pub use afrr::{run_afrr_test, AfrrVariant};
pub use bench::{largest_passing, Search, TestBench};
pub use blackstart::{black_start_capacity_at, run_black_start_test, BlackStartReport};
pub use fcr::{band_reserve_w, droop_demand_w, run_fcr_test};
pub use ffr::{run_ffr_test, FfrStrategy};
pub use inertia::{run_sync_inertia_test, run_synth_inertia_test};
pub use voltvar::{run_voltvar_test, voltvar_capability_mw};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::TechnologyStack;
use crate::hydraulic::SolveError;
use crate::machine::MachineMode;
use crate::service::ServiceKind;
use crate::sim::{PlantBuildError, SimError, TimeSeries};

/// One envelope breach. Deadline rules report the measured time in seconds
/// as `observed`; band and level rules report watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub time_s: f64,
    pub quantity: String,
    pub observed: f64,
    pub bound: f64,
}

/// Graded result of one service test on one stack and operating mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub service: ServiceKind,
    pub stack: String,
    pub mode: MachineMode,
    pub pass: bool,
    pub capability_mw: f64,
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Companion trace file, filled in when the campaign writes artifacts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<String>,
}

impl ComplianceReport {
    /// `pass` is derived, never chosen: a clean violation list and a
    /// nonzero measured capability.
    pub fn new(
        service: ServiceKind,
        stack: TechnologyStack,
        mode: MachineMode,
        capability_mw: f64,
        violations: Vec<Violation>,
    ) -> Self {
        Self {
            service,
            stack: stack.label(),
            mode,
            pass: violations.is_empty() && capability_mw > 0.0,
            capability_mw,
            violations,
            notes: Vec::new(),
            series: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// A report plus the trace it grades.
#[derive(Debug)]
pub struct ServiceOutcome {
    pub report: ComplianceReport,
    pub series: TimeSeries,
}

/// Hard failures that void a scenario. Envelope non-compliance is not an
/// error; it lands in [`ComplianceReport::violations`].
#[derive(Debug, Error)]
pub enum QualError {
    #[error("plant assembly failed: {0}")]
    Build(#[from] PlantBuildError),
    #[error("steady-state initialisation failed: {0}")]
    Init(#[from] SolveError),
    #[error("simulation aborted: {0}")]
    Sim(#[from] SimError),
    #[error("{0}")]
    Unsupported(String),
    #[error("envelope check rejected the trace: {0}")]
    Envelope(#[from] envelope::EnvelopeError),
    #[error("controller setup failed: {0}")]
    Control(String),
}

/// Whether a (service, stack, mode) cell is physically meaningful. Cells
/// that are meaningful but score zero (a fixed-speed pump offering FCR)
/// still run; cells rejected here render as not-applicable.
pub fn applicable(service: ServiceKind, stack: TechnologyStack, mode: MachineMode) -> bool {
    match service {
        // A synchronously coupled rotor provides inertia as a by-product of
        // being locked to the grid; a converter decouples it.
        ServiceKind::SyncInertia => !stack.variable_speed,
        // Emulated inertia and sub-second reserves need the converter.
        ServiceKind::SynthInertia | ServiceKind::Ffr => stack.variable_speed,
        // Restoration starts in generating mode, and a short-circuit
        // dispatch presumes a grid to trade against.
        ServiceKind::BlackStart => mode == MachineMode::Turbine && !stack.hsc,
        _ => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn applicability_splits_by_coupling() {
        let fs = TechnologyStack::FS;
        let vs = TechnologyStack::VS;
        assert!(applicable(ServiceKind::SyncInertia, fs, MachineMode::Turbine));
        assert!(!applicable(ServiceKind::SyncInertia, vs, MachineMode::Turbine));
        assert!(applicable(ServiceKind::SynthInertia, vs, MachineMode::Pump));
        assert!(!applicable(ServiceKind::Ffr, fs, MachineMode::Turbine));
        assert!(applicable(ServiceKind::Fcr, fs, MachineMode::Pump));
        assert!(!applicable(
            ServiceKind::BlackStart,
            fs,
            MachineMode::Pump
        ));
        assert!(!applicable(
            ServiceKind::BlackStart,
            vs.with_supervisor().with_hsc(),
            MachineMode::Turbine
        ));
    }

    #[test]
    fn pass_is_derived_from_violations_and_capability() {
        let ok = ComplianceReport::new(
            ServiceKind::Fcr,
            TechnologyStack::FS,
            MachineMode::Turbine,
            52.0,
            vec![],
        );
        assert!(ok.pass);
        let zero = ComplianceReport::new(
            ServiceKind::Fcr,
            TechnologyStack::FS,
            MachineMode::Pump,
            0.0,
            vec![],
        );
        assert!(!zero.pass);
        let broken = ComplianceReport::new(
            ServiceKind::Fcr,
            TechnologyStack::FS,
            MachineMode::Turbine,
            52.0,
            vec![Violation {
                time_s: 3.0,
                quantity: "initial response time".into(),
                observed: 3.0,
                bound: 2.0,
            }],
        );
        assert!(!broken.pass);
    }
}
