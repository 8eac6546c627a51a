//! Time-domain simulation of hydropower plant dynamics and a qualification
//! harness that measures how well a given technology stack provides grid
//! ancillary services.
//!
//! The crate is organised bottom-up:
//!
//! * [`hydraulic`] — one-dimensional waterway models (elastic pipes, surge
//!   tanks, reservoirs, valves) solved with a fixed-step implicit
//!   trapezoidal scheme;
//! * [`machine`] — unit dynamics: hill-chart characteristics, the rotating
//!   inertia, the electrical coupling per technology, and a simple battery;
//! * [`control`] — governors, droop/FCR, aFRR setpoint filtering, inertia
//!   emulation, fast frequency reserve, hydraulic short circuit dispatch
//!   and the hybrid battery/turbine split;
//! * [`sim`] — the coupled plant engine that steps waterway, units and
//!   controllers together and records time series;
//! * [`qualification`] — service test scenarios, envelope checkers and
//!   capability searches producing compliance reports;
//! * [`matrix`] — scoring and rendering of the ancillary services matrix;
//! * [`campaign`] — batch runner behind the command line interface.

pub mod config;
pub mod control;
pub mod hydraulic;
pub mod machine;
pub mod service;
pub mod sim;

/// Standard gravity (m/s^2). All head/pressure conversions use this value.
pub const GRAVITY: f64 = 9.81;

/// Water density (kg/m^3).
pub const WATER_DENSITY: f64 = 1000.0;
