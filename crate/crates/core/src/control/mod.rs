//! Controllers: governor, reserve droop laws, setpoint shaping, fast
//! reserve activation, inertia emulation, and the plant-level dispatch
//! schemes for mixed pump/turbine and hydro-battery operation.

pub mod afrr;
pub mod fcr;
pub mod ffr;
pub mod governor;
pub mod hbh;
pub mod hsc;
pub mod inertia;

pub use afrr::{AfrrController, SetpointFilter};
pub use fcr::FcrController;
pub use ffr::{full_activation_time_s, FfrConfigError, FfrController, FfrParams, FfrSupport};
pub use governor::{Governor, GovernorObjective, GovernorParams};
pub use hbh::{HbhJointControl, HbhSplitter};
pub use hsc::{hsc_dispatch, DispatchError, HscUnit};
pub use inertia::{inertial_power_w, InertiaEmulation, RocofEstimator, RocofEstimatorParams};
