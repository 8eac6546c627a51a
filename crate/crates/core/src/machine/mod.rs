//! Unit dynamics: hill-chart characteristics, rotating inertia, electrical
//! coupling and battery storage.

pub mod bess;
pub mod characteristic;
pub mod coupling;
pub mod swing;
pub mod synthetic;

pub use bess::{bess_step, BessParams, BessState};
pub use characteristic::{
    CharacteristicError, MachineCharacteristic, MachineMode, OperatingPoint, QuadrantTable,
    References, TableSample,
};
pub use coupling::{first_order_lag_step, SpeedLimits, SpeedStatus};
pub use swing::{
    locked_rotor_electrical_power, rad_s_to_rpm, rpm_to_rad_s, swing_step, RotorInertia,
};
pub use synthetic::{SyntheticCharacteristic, SyntheticPump, SyntheticTurbine};
