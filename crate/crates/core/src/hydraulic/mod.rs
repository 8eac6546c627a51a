//! Lumped-parameter waterway model.
//!
//! A plant's conduits are discretized into short segments, each carrying a
//! flow state, joined at head nodes that accumulate storage from conduit
//! compressibility and surge-tank free surfaces. The same network serves the
//! steady-state initializer and the transient solver, so trajectories start
//! from an exact equilibrium of the equations they then integrate.

mod network;
mod solver;
mod steady;

pub use network::{
    MachineBoundary, MachineCondition, Network, NetworkBuilder, PipeGeometry, TankGeometry,
};
pub use solver::StepReport;
pub use steady::{SteadyReport, UnitSteadyResult, UnitSteadySpec, UnitSteadyTarget};

use thiserror::Error;

/// Network construction rejected.
#[derive(Debug, Error)]
pub enum BuildError {
    #[error("duplicate element id `{id}`")]
    DuplicateId { id: String },
    #[error("element `{id}` conflicts with the existing network: {message}")]
    Conflict { id: String, message: String },
    #[error("element `{id}` has invalid geometry: {message}")]
    BadGeometry { id: String, message: String },
    #[error("network has no reservoir to anchor heads")]
    NoReservoir,
    #[error("junction `{name}` has no storage: connect a pipe or surge tank to it")]
    DanglingJunction { name: String },
    #[error("junction `{name}` is not connected to any reservoir")]
    Disconnected { name: String },
}

/// Solution failure. Any of these aborts the simulation that raised it.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("time step {dt_s} s exceeds the shortest segment travel time {limit_s} s")]
    StepTooLarge { dt_s: f64, limit_s: f64 },
    #[error("{context}: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence {
        context: &'static str,
        residual: f64,
        iterations: usize,
    },
    #[error("{context}: solution became non-finite")]
    NonFinite { context: &'static str },
    #[error("surge tank `{id}` level {level_m:.2} m outside [{min_m:.2}, {max_m:.2}] m")]
    TankLevelOutOfRange {
        id: String,
        level_m: f64,
        min_m: f64,
        max_m: f64,
    },
    #[error("steady-state target for unit `{id}` is unreachable: {message}")]
    UnreachableTarget { id: String, message: String },
}
