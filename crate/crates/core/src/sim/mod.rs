//! Coupled plant engine.
//!
//! [`Plant`] owns the physical states: waterway, one rotor per unit, and an
//! optional battery. Controllers live outside; each call to [`Plant::step`]
//! takes one command per unit (gate opening plus an electrical boundary) and
//! advances everything by one fixed step. That split keeps the engine
//! identical across service tests that wire very different control loops.
//!
//! Electrical conventions are generator-positive: a pumping unit has
//! negative mechanical torque and negative electrical power.

mod recorder;
mod schedule;

pub use recorder::TimeSeries;
pub use schedule::Schedule;

use std::path::Path;

use thiserror::Error;

use crate::config::{BessConfig, PlantConfig};
use crate::hydraulic::{
    BuildError, MachineBoundary, Network, SolveError, SteadyReport, UnitSteadySpec,
    UnitSteadyTarget,
};
use crate::machine::{
    bess_step, first_order_lag_step, locked_rotor_electrical_power, rad_s_to_rpm, rpm_to_rad_s,
    swing_step, BessParams, BessState, CharacteristicError, MachineCharacteristic, MachineMode,
    RotorInertia, SpeedLimits, SpeedStatus,
};

#[derive(Debug, Error)]
pub enum PlantBuildError {
    #[error(transparent)]
    Network(#[from] BuildError),
    #[error("unit `{id}`: {source}")]
    Characteristic {
        id: String,
        #[source]
        source: CharacteristicError,
    },
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Hydraulic(#[from] SolveError),
    /// The rotor fell below the stall floor; a real unit trips well before
    /// this, so the whole scenario is void rather than merely non-compliant.
    #[error("unit `{id}` stalled at {n_rpm:.1} rpm")]
    Stalled { id: String, n_rpm: f64 },
}

/// Electrical boundary of one unit for one step.
#[derive(Debug, Clone, Copy)]
pub enum UnitElectrical {
    /// Synchronous machine on a stiff grid: the rotor is slaved to grid
    /// frequency and exports shaft power plus the kinetic energy released
    /// by the imposed speed change.
    GridLocked { f_hz: f64, rocof_hz_s: f64 },
    /// Converter-fed machine on the grid: the converter executes a power
    /// command (through its response lag) and the rotor integrates the
    /// mismatch against hydraulic torque.
    ConverterPower { p_cmd_w: f64 },
    /// Islanded operation feeding a constant-power load. The rotor carries
    /// the imbalance; for a synchronous unit the island frequency is the
    /// shaft speed scaled to nominal, for a converter-fed unit the
    /// converter forms the island and the shaft speed floats.
    Island { p_load_w: f64 },
    /// Disconnected and dewatered.
    Idle,
}

#[derive(Debug, Clone, Copy)]
pub struct UnitCommand {
    pub mode: MachineMode,
    /// Gate opening for this step (already servo-limited by the governor).
    pub y_pu: f64,
    pub electrical: UnitElectrical,
}

/// Initial condition request for one unit.
#[derive(Debug, Clone, Copy)]
pub enum UnitStart {
    Off,
    On {
        mode: MachineMode,
        /// Speed (rpm); an initial guess when the target solves for speed.
        n_rpm: f64,
        /// Opening guess in [0, 1].
        y_guess_pu: f64,
        target: UnitSteadyTarget,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct UnitOutput {
    pub n_rpm: f64,
    pub p_mech_w: f64,
    pub p_elec_w: f64,
    pub discharge_m3s: f64,
    pub head_net_m: f64,
    pub y_pu: f64,
    /// `None` for idle units.
    pub speed: Option<SpeedStatus>,
    pub extrapolated: bool,
}

#[derive(Debug, Clone)]
pub struct PlantStepOutput {
    pub units: Vec<UnitOutput>,
    pub newton_iterations: usize,
}

pub struct PlantUnit {
    pub id: String,
    pub characteristic: MachineCharacteristic,
    pub inertia: RotorInertia,
    pub limits: SpeedLimits,
    pub synchronous_rpm: f64,
    pub converter_lag_s: f64,
    pub rated_power_w: f64,
    /// Shaft speed (rpm). Slaved to frequency under [`UnitElectrical::GridLocked`],
    /// integrated by the swing equation otherwise.
    pub n_rpm: f64,
    /// Electrical power exported in the last step (W, generator-positive).
    pub p_elec_w: f64,
    conv_lag_w: f64,
}

impl PlantUnit {
    /// Island frequency implied by the shaft speed of a synchronous unit.
    pub fn shaft_frequency_hz(&self, f_n_hz: f64) -> f64 {
        self.n_rpm / self.synchronous_rpm * f_n_hz
    }

    /// Kinetic energy stored in the rotor right now.
    pub fn kinetic_energy_j(&self) -> f64 {
        self.inertia.kinetic_energy_j(rpm_to_rad_s(self.n_rpm))
    }
}

pub struct BessRuntime {
    pub params: BessParams,
    pub state: BessState,
    response_tau_s: f64,
    lag_w: f64,
}

impl BessRuntime {
    pub fn from_config(config: &BessConfig) -> Self {
        Self {
            params: config.params(),
            state: BessState {
                soc: config.initial_soc,
            },
            response_tau_s: config.response_tau_s,
            lag_w: 0.0,
        }
    }

    /// Track the power command through the converter lag, then draw on the
    /// cells. Returns the power actually delivered (positive discharging).
    pub fn step(&mut self, p_cmd_w: f64, dt_s: f64) -> f64 {
        self.lag_w = first_order_lag_step(self.lag_w, p_cmd_w, self.response_tau_s, dt_s);
        let (next, delivered) = bess_step(self.state, self.lag_w, self.params, dt_s);
        self.state = next;
        delivered
    }

    pub fn soc(&self) -> f64 {
        self.state.soc
    }
}

pub struct Plant {
    pub f_n_hz: f64,
    pub network: Network,
    units: Vec<PlantUnit>,
    pub bess: Option<BessRuntime>,
}

impl Plant {
    /// Assemble waterway, units and battery. Machine slot `i` in the
    /// network belongs to `units[i]`. CSV characteristics resolve against
    /// `base_dir` (the plant file's directory).
    pub fn from_config(config: &PlantConfig, base_dir: &Path) -> Result<Self, PlantBuildError> {
        let network = config.build_network()?;
        let mut units = Vec::with_capacity(config.units.len());
        for u in &config.units {
            let characteristic =
                u.build_characteristic(base_dir)
                    .map_err(|source| PlantBuildError::Characteristic {
                        id: u.id.clone(),
                        source,
                    })?;
            units.push(PlantUnit {
                id: u.id.clone(),
                characteristic,
                inertia: u.rotor_inertia(),
                limits: u.speed_limits(),
                synchronous_rpm: u.speed_rpm.synchronous_rpm,
                converter_lag_s: u.converter_lag_s,
                rated_power_w: u.rated_power_w(),
                n_rpm: u.speed_rpm.synchronous_rpm,
                p_elec_w: 0.0,
                conv_lag_w: 0.0,
            });
        }
        Ok(Self {
            f_n_hz: config.plant.f_n_hz,
            network,
            units,
            bess: config.bess.as_ref().map(BessRuntime::from_config),
        })
    }

    pub fn units(&self) -> &[PlantUnit] {
        &self.units
    }

    pub fn unit(&self, index: usize) -> &PlantUnit {
        &self.units[index]
    }

    /// Solve the coupled steady state and adopt it as the initial condition.
    /// Returns the report so callers can seed their governors with the
    /// converged openings and speeds.
    pub fn init_steady(&mut self, starts: &[UnitStart]) -> Result<SteadyReport, SolveError> {
        assert_eq!(starts.len(), self.units.len(), "one start per unit");
        let specs: Vec<UnitSteadySpec<'_>> = self
            .units
            .iter()
            .zip(starts)
            .map(|(unit, start)| match *start {
                UnitStart::Off => UnitSteadySpec::Dewatered,
                UnitStart::On {
                    mode,
                    n_rpm,
                    y_guess_pu,
                    target,
                } => UnitSteadySpec::Coupled {
                    characteristic: &unit.characteristic,
                    mode,
                    n_rpm,
                    y: y_guess_pu,
                    target,
                },
            })
            .collect();
        let report = self.network.steady_state(&specs)?;
        drop(specs);
        for (unit, (start, result)) in self.units.iter_mut().zip(starts.iter().zip(&report.units))
        {
            match start {
                UnitStart::Off => {
                    unit.n_rpm = 0.0;
                    unit.p_elec_w = 0.0;
                    unit.conv_lag_w = 0.0;
                }
                UnitStart::On { .. } => {
                    unit.n_rpm = result.n_rpm;
                    unit.p_elec_w = result.shaft_power_w;
                    unit.conv_lag_w = result.shaft_power_w;
                }
            }
        }
        Ok(report)
    }

    /// Advance the whole plant by one step.
    pub fn step(&mut self, commands: &[UnitCommand], dt_s: f64) -> Result<PlantStepOutput, SimError> {
        assert_eq!(commands.len(), self.units.len(), "one command per unit");

        // Grid-locked rotors move with the imposed frequency; fix their
        // speed first so the hydraulic boundary sees it.
        for (unit, cmd) in self.units.iter_mut().zip(commands) {
            if let UnitElectrical::GridLocked { f_hz, .. } = cmd.electrical {
                unit.n_rpm = f_hz / self.f_n_hz * unit.synchronous_rpm;
            }
        }

        let boundaries: Vec<MachineBoundary<'_>> = self
            .units
            .iter()
            .zip(commands)
            .map(|(unit, cmd)| match cmd.electrical {
                UnitElectrical::Idle => MachineBoundary::Dewatered,
                _ => MachineBoundary::Coupled {
                    characteristic: &unit.characteristic,
                    mode: cmd.mode,
                    n_rpm: unit.n_rpm,
                    y: cmd.y_pu,
                },
            })
            .collect();
        let report = self.network.step(&boundaries, dt_s)?;
        drop(boundaries);

        let mut outputs = Vec::with_capacity(self.units.len());
        for ((unit, cmd), condition) in self
            .units
            .iter_mut()
            .zip(commands)
            .zip(&report.machines)
        {
            let omega = rpm_to_rad_s(unit.n_rpm);
            let torque = condition.torque_nm;
            let p_mech_w = torque * omega;
            let mut integrated = false;
            let p_elec_w = match cmd.electrical {
                UnitElectrical::GridLocked { rocof_hz_s, .. } => {
                    let domega_dt = rocof_hz_s / self.f_n_hz * rpm_to_rad_s(unit.synchronous_rpm);
                    locked_rotor_electrical_power(torque, omega, domega_dt, unit.inertia)
                }
                UnitElectrical::ConverterPower { p_cmd_w } => {
                    unit.conv_lag_w =
                        first_order_lag_step(unit.conv_lag_w, p_cmd_w, unit.converter_lag_s, dt_s);
                    integrated = true;
                    unit.conv_lag_w
                }
                UnitElectrical::Island { p_load_w } => {
                    integrated = true;
                    p_load_w
                }
                UnitElectrical::Idle => 0.0,
            };
            if integrated {
                let t_elec = p_elec_w / omega;
                unit.n_rpm = rad_s_to_rpm(swing_step(omega, torque, t_elec, unit.inertia, dt_s));
            }
            unit.p_elec_w = p_elec_w;

            let speed = match cmd.electrical {
                UnitElectrical::Idle => None,
                _ => Some(unit.limits.check(unit.n_rpm)),
            };
            if integrated && speed == Some(SpeedStatus::Stalled) {
                return Err(SimError::Stalled {
                    id: unit.id.clone(),
                    n_rpm: unit.n_rpm,
                });
            }
            outputs.push(UnitOutput {
                n_rpm: unit.n_rpm,
                p_mech_w,
                p_elec_w,
                discharge_m3s: condition.discharge_m3s,
                head_net_m: condition.head_net_m,
                y_pu: cmd.y_pu,
                speed,
                extrapolated: condition.extrapolated,
            });
        }

        Ok(PlantStepOutput {
            units: outputs,
            newton_iterations: report.newton_iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn reference_plant() -> Plant {
        let path =
            Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/plants/reference.toml");
        let config = PlantConfig::from_path(&path).unwrap();
        Plant::from_config(&config, path.parent().unwrap_or(&PathBuf::from("."))).unwrap()
    }

    fn both_at_power(p_w: f64, n_rpm: f64) -> [UnitStart; 2] {
        [
            UnitStart::On {
                mode: MachineMode::Turbine,
                n_rpm,
                y_guess_pu: 0.8,
                target: UnitSteadyTarget::Power { p_w },
            },
            UnitStart::On {
                mode: MachineMode::Turbine,
                n_rpm,
                y_guess_pu: 0.8,
                target: UnitSteadyTarget::Power { p_w },
            },
        ]
    }

    #[test]
    fn steady_init_hits_the_power_target() {
        let mut plant = reference_plant();
        let report = plant.init_steady(&both_at_power(300.0e6, 375.0)).unwrap();
        for result in &report.units {
            assert!((result.shaft_power_w - 300.0e6).abs() < 1.0e3);
            assert!(result.y > 0.1 && result.y < 1.0);
        }
        assert!((plant.unit(0).p_elec_w - 300.0e6).abs() < 1.0e3);
    }

    #[test]
    fn frozen_commands_hold_the_steady_state() {
        let mut plant = reference_plant();
        let report = plant.init_steady(&both_at_power(300.0e6, 375.0)).unwrap();
        let y = report.units[0].y;
        let commands = [
            UnitCommand {
                mode: MachineMode::Turbine,
                y_pu: y,
                electrical: UnitElectrical::GridLocked {
                    f_hz: 50.0,
                    rocof_hz_s: 0.0,
                },
            },
            UnitCommand {
                mode: MachineMode::Turbine,
                y_pu: report.units[1].y,
                electrical: UnitElectrical::GridLocked {
                    f_hz: 50.0,
                    rocof_hz_s: 0.0,
                },
            },
        ];
        for _ in 0..200 {
            let out = plant.step(&commands, 0.01).unwrap();
            for unit in &out.units {
                assert!(
                    (unit.p_elec_w - 300.0e6).abs() < 0.01e6,
                    "steady state drifted: {} W",
                    unit.p_elec_w
                );
            }
        }
    }

    #[test]
    fn grid_locked_rotor_releases_kinetic_energy_under_falling_frequency() {
        let mut plant = reference_plant();
        let report = plant.init_steady(&both_at_power(300.0e6, 375.0)).unwrap();
        let y = [report.units[0].y, report.units[1].y];
        // 1 Hz/s downward ramp: each unit should add about
        // tau_m * P_rated / f_n = 7.9 * 395 MW / 50 = 62.4 MW on top of
        // its (slowly re-equilibrating) shaft power.
        let dt = 0.01;
        let mut boost = 0.0;
        for k in 0..50 {
            let f = 50.0 - 1.0 * dt * (k + 1) as f64;
            let commands = [
                UnitCommand {
                    mode: MachineMode::Turbine,
                    y_pu: y[0],
                    electrical: UnitElectrical::GridLocked {
                        f_hz: f,
                        rocof_hz_s: -1.0,
                    },
                },
                UnitCommand {
                    mode: MachineMode::Turbine,
                    y_pu: y[1],
                    electrical: UnitElectrical::GridLocked {
                        f_hz: f,
                        rocof_hz_s: -1.0,
                    },
                },
            ];
            let out = plant.step(&commands, dt).unwrap();
            boost = out.units[0].p_elec_w - out.units[0].p_mech_w;
        }
        let expected = 7.9 * 395.0e6 / 50.0;
        assert!(
            (boost - expected).abs() < 0.03 * expected,
            "inertial boost {boost:.3e} vs expected {expected:.3e}"
        );
    }

    #[test]
    fn converter_unit_swing_conserves_energy() {
        let mut plant = reference_plant();
        let report = plant.init_steady(&both_at_power(300.0e6, 365.5)).unwrap();
        let y = [report.units[0].y, report.units[1].y];
        let dt = 0.01;
        let e0 = plant.unit(0).kinetic_energy_j();
        let mut absorbed = 0.0;
        // Demand 40 MW above the hydraulic input; the rotor must supply it.
        for _ in 0..200 {
            let commands = [
                UnitCommand {
                    mode: MachineMode::Turbine,
                    y_pu: y[0],
                    electrical: UnitElectrical::ConverterPower { p_cmd_w: 340.0e6 },
                },
                UnitCommand {
                    mode: MachineMode::Turbine,
                    y_pu: y[1],
                    electrical: UnitElectrical::ConverterPower { p_cmd_w: 300.0e6 },
                },
            ];
            let out = plant.step(&commands, dt).unwrap();
            absorbed += (out.units[0].p_mech_w - out.units[0].p_elec_w) * dt;
        }
        let de = plant.unit(0).kinetic_energy_j() - e0;
        assert!(de < 0.0, "rotor should have slowed");
        assert!(
            (de - absorbed).abs() < 0.02 * de.abs(),
            "energy mismatch: dE = {de:.3e}, integrated = {absorbed:.3e}"
        );
        // The companion unit saw no command change and keeps its speed.
        assert!((plant.unit(1).n_rpm - report.units[1].n_rpm).abs() < 0.5);
    }

    #[test]
    fn island_overload_decelerates_the_rotor() {
        let mut plant = reference_plant();
        let report = plant.init_steady(&both_at_power(250.0e6, 375.0)).unwrap();
        let y = [report.units[0].y, report.units[1].y];
        let mut last = plant.unit(0).n_rpm;
        for _ in 0..100 {
            let commands = [
                UnitCommand {
                    mode: MachineMode::Turbine,
                    y_pu: y[0],
                    electrical: UnitElectrical::Island { p_load_w: 280.0e6 },
                },
                UnitCommand {
                    mode: MachineMode::Turbine,
                    y_pu: y[1],
                    electrical: UnitElectrical::GridLocked {
                        f_hz: 50.0,
                        rocof_hz_s: 0.0,
                    },
                },
            ];
            let out = plant.step(&commands, 0.01).unwrap();
            assert!(out.units[0].n_rpm <= last + 1e-9);
            last = out.units[0].n_rpm;
        }
        assert!(last < 375.0);
    }

    #[test]
    fn idle_unit_passes_no_flow_and_reports_no_speed() {
        let mut plant = reference_plant();
        plant
            .init_steady(&[
                UnitStart::On {
                    mode: MachineMode::Turbine,
                    n_rpm: 375.0,
                    y_guess_pu: 0.8,
                    target: UnitSteadyTarget::Power { p_w: 300.0e6 },
                },
                UnitStart::Off,
            ])
            .unwrap();
        let commands = [
            UnitCommand {
                mode: MachineMode::Turbine,
                y_pu: 0.75,
                electrical: UnitElectrical::GridLocked {
                    f_hz: 50.0,
                    rocof_hz_s: 0.0,
                },
            },
            UnitCommand {
                mode: MachineMode::Turbine,
                y_pu: 0.0,
                electrical: UnitElectrical::Idle,
            },
        ];
        let out = plant.step(&commands, 0.01).unwrap();
        assert_eq!(out.units[1].discharge_m3s, 0.0);
        assert_eq!(out.units[1].p_elec_w, 0.0);
        assert!(out.units[1].speed.is_none());
    }

    #[test]
    fn stall_aborts_the_run() {
        let mut plant = reference_plant();
        let report = plant.init_steady(&both_at_power(200.0e6, 365.5)).unwrap();
        let y = [report.units[0].y, report.units[1].y];
        let commands = [
            UnitCommand {
                mode: MachineMode::Turbine,
                y_pu: y[0],
                // Far beyond what the water can sustain: drags the rotor down.
                electrical: UnitElectrical::Island { p_load_w: 900.0e6 },
            },
            UnitCommand {
                mode: MachineMode::Turbine,
                y_pu: y[1],
                electrical: UnitElectrical::GridLocked {
                    f_hz: 50.0,
                    rocof_hz_s: 0.0,
                },
            },
        ];
        let mut stalled = false;
        for _ in 0..20_000 {
            match plant.step(&commands, 0.01) {
                Ok(_) => {}
                Err(SimError::Stalled { id, n_rpm }) => {
                    assert_eq!(id, "unit1");
                    assert!(n_rpm < 0.55 * 375.0);
                    stalled = true;
                    break;
                }
                Err(other) => panic!("unexpected failure mode: {other}"),
            }
        }
        assert!(stalled, "overload never stalled the unit");
    }
}
