//! On-disk descriptions: plant files, campaign manifests, technology stacks.
//!
//! A plant file is a complete, self-contained description of one site:
//! waterway topology, unit ratings and ranges, machine characteristics and
//! controller tunings. A campaign manifest points at a plant file and lists
//! the technology stacks and services to evaluate. All relative paths in a
//! manifest resolve against the manifest's own directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{GovernorParams, HbhJointControl, RocofEstimatorParams};
use crate::hydraulic::{BuildError, Network, NetworkBuilder, PipeGeometry, TankGeometry};
use crate::machine::{
    BessParams, CharacteristicError, MachineCharacteristic, References, RotorInertia, SpeedLimits,
    SyntheticPump, SyntheticTurbine,
};
use crate::service::ServiceKind;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// The embedded message carries the parser's line/column diagnostics.
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path} is invalid:\n{}", diagnostics.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid {
        path: String,
        diagnostics: Vec<Diagnostic>,
    },
}

/// One validation finding: where in the document, and what is wrong.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub at: String,
    pub message: String,
}

impl Diagnostic {
    fn new(at: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            at: at.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.at, self.message)
    }
}

/// Finite and strictly positive; NaN and infinities fail validation.
fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

fn non_negative(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

// ---------------------------------------------------------------------------
// Technology stacks
// ---------------------------------------------------------------------------

/// Which control structure and operating ranges a run uses. Parsed from
/// strings like `FS`, `VS+SPPS` or `FS+SPPS+HBH`: the first token picks the
/// speed architecture, the rest toggle the supervisor (SPPS), hydraulic
/// short circuit (HSC) and battery hybrid (HBH) features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TechnologyStack {
    pub variable_speed: bool,
    pub supervisor: bool,
    pub hsc: bool,
    pub hbh: bool,
}

impl TechnologyStack {
    pub const FS: TechnologyStack = TechnologyStack {
        variable_speed: false,
        supervisor: false,
        hsc: false,
        hbh: false,
    };
    pub const VS: TechnologyStack = TechnologyStack {
        variable_speed: true,
        supervisor: false,
        hsc: false,
        hbh: false,
    };

    pub fn with_supervisor(mut self) -> Self {
        self.supervisor = true;
        self
    }

    pub fn with_hsc(mut self) -> Self {
        self.hsc = true;
        self
    }

    pub fn with_hbh(mut self) -> Self {
        self.hbh = true;
        self
    }

    /// Canonical token form, e.g. `VS+SPPS+HSC`.
    pub fn label(&self) -> String {
        let mut out = String::from(if self.variable_speed { "VS" } else { "FS" });
        if self.supervisor {
            out.push_str("+SPPS");
        }
        if self.hsc {
            out.push_str("+HSC");
        }
        if self.hbh {
            out.push_str("+HBH");
        }
        out
    }
}

impl fmt::Display for TechnologyStack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadStack(pub String);

impl fmt::Display for BadStack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "bad technology stack `{}`: expected FS or VS, optionally \
             followed by +SPPS, +HSC, +HBH",
            self.0
        )
    }
}

impl std::error::Error for BadStack {}

impl FromStr for TechnologyStack {
    type Err = BadStack;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut tokens = s.split('+').map(|t| t.trim().to_ascii_uppercase());
        let mut stack = match tokens.next().as_deref() {
            Some("FS") => TechnologyStack::FS,
            Some("VS") => TechnologyStack::VS,
            _ => return Err(BadStack(s.to_string())),
        };
        for token in tokens {
            let flag = match token.as_str() {
                "SPPS" => &mut stack.supervisor,
                "HSC" => &mut stack.hsc,
                "HBH" => &mut stack.hbh,
                _ => return Err(BadStack(s.to_string())),
            };
            if std::mem::replace(flag, true) {
                return Err(BadStack(s.to_string()));
            }
        }
        Ok(stack)
    }
}

impl TryFrom<String> for TechnologyStack {
    type Error = BadStack;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<TechnologyStack> for String {
    fn from(stack: TechnologyStack) -> String {
        stack.label()
    }
}

// ---------------------------------------------------------------------------
// Plant description
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub plant: PlantMeta,
    pub waterway: WaterwayConfig,
    pub units: Vec<UnitConfig>,
    pub bess: Option<BessConfig>,
    #[serde(default)]
    pub control: ControlConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlantMeta {
    pub name: String,
    pub f_n_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct WaterwayConfig {
    #[serde(default)]
    pub reservoirs: Vec<ReservoirConfig>,
    #[serde(default)]
    pub pipes: Vec<PipeConfig>,
    #[serde(default)]
    pub surge_tanks: Vec<SurgeTankConfig>,
    #[serde(default)]
    pub valves: Vec<ValveConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReservoirConfig {
    pub id: String,
    pub junction: String,
    pub elevation_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PipeConfig {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length_m: f64,
    pub diameter_m: f64,
    pub wave_speed_ms: f64,
    pub friction_factor: f64,
    pub n_segments: usize,
}

impl PipeConfig {
    pub fn geometry(&self) -> PipeGeometry {
        PipeGeometry {
            length_m: self.length_m,
            diameter_m: self.diameter_m,
            wave_speed_ms: self.wave_speed_ms,
            friction_factor: self.friction_factor,
            n_segments: self.n_segments,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SurgeTankConfig {
    pub id: String,
    pub junction: String,
    pub cross_section_m2: f64,
    pub base_elevation_m: f64,
    pub min_level_m: f64,
    pub max_level_m: f64,
    pub throttle_k: Option<f64>,
}

impl SurgeTankConfig {
    pub fn geometry(&self) -> TankGeometry {
        TankGeometry {
            cross_section_m2: self.cross_section_m2,
            base_elevation_m: self.base_elevation_m,
            min_level_m: self.min_level_m,
            max_level_m: self.max_level_m,
            throttle_k: self.throttle_k,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ValveConfig {
    pub id: String,
    pub from: String,
    pub to: Option<String>,
    pub discharge_elevation_m: Option<f64>,
    pub k_v: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpeedRange {
    pub min_rpm: f64,
    pub middle_rpm: f64,
    pub max_rpm: f64,
    pub synchronous_rpm: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HeadRange {
    pub min_m: f64,
    pub max_m: f64,
}

/// Closed power interval in MW; pump ranges are negative (consumption).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PowerRange {
    pub min_mw: f64,
    pub max_mw: f64,
}

impl PowerRange {
    pub fn width_mw(&self) -> f64 {
        self.max_mw - self.min_mw
    }

    pub fn midpoint_mw(&self) -> f64 {
        0.5 * (self.min_mw + self.max_mw)
    }

    pub fn contains(&self, other: &PowerRange) -> bool {
        self.min_mw <= other.min_mw && self.max_mw >= other.max_mw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableSpeedKind {
    /// Doubly fed induction machine: narrow speed band around synchronous.
    Dfim,
    /// Full-size frequency converter: wide band down to the stall floor.
    Fsfc,
}

impl VariableSpeedKind {
    pub fn label(self) -> &'static str {
        match self {
            VariableSpeedKind::Dfim => "DFIM",
            VariableSpeedKind::Fsfc => "FSFC",
        }
    }
}

/// Maximum active power assumed when computing reactive capability,
/// per architecture and mode. Converter-fed operation can push the active
/// ceiling above the synchronous rating, costing reactive margin.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VoltVarConfig {
    pub turbine_p_max_mw: f64,
    pub vs_turbine_p_max_mw: Option<f64>,
    pub pump_p_max_mw: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CharacteristicSource {
    /// Generated from the analytic surrogate surfaces.
    Synthetic {
        turbine: SyntheticTurbine,
        pump: Option<SyntheticPump>,
    },
    /// Long-format grid `n_pu,h_pu,y_pu,q_pu,t_pu`; path relative to the
    /// plant file.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct UnitConfig {
    pub id: String,
    /// Penstock-side junction.
    pub from: String,
    /// Draft-tube-side junction.
    pub to: String,
    pub rated_power_mw: f64,
    pub rated_apparent_power_mva: f64,
    /// Mechanical time constant on the rated-power base (s).
    pub tau_m_s: f64,
    pub speed_rpm: SpeedRange,
    pub head_m: HeadRange,
    /// Admissible band without supervisor assistance.
    pub turbine_power_mw: PowerRange,
    /// Band the supervisor unlocks (must contain the plain band).
    pub supervisor_turbine_power_mw: Option<PowerRange>,
    pub pump_power_mw: Option<PowerRange>,
    /// Variable-speed architecture this unit can run as; `None` = fixed only.
    pub variable_speed: Option<VariableSpeedKind>,
    #[serde(default)]
    pub grid_forming_capable: bool,
    /// Power the converter can carry when it forms an island (MW). A doubly
    /// fed machine only routes slip power through its converter, so its
    /// grid-forming ceiling sits well below the stator rating; `None` means
    /// the full apparent rating (full-size converter).
    pub converter_rating_mw: Option<f64>,
    #[serde(default = "default_converter_lag")]
    pub converter_lag_s: f64,
    /// Stall floor as a fraction of synchronous speed (FSFC hard abort).
    #[serde(default = "default_stall_fraction")]
    pub stall_fraction: f64,
    /// Transient allowance beyond the steady speed band (relative).
    #[serde(default = "default_transient_margin")]
    pub transient_speed_margin: f64,
    pub voltvar: Option<VoltVarConfig>,
    pub references: References,
    pub characteristic: CharacteristicSource,
}

fn default_converter_lag() -> f64 {
    0.1
}

fn default_stall_fraction() -> f64 {
    0.5
}

fn default_transient_margin() -> f64 {
    0.02
}

impl UnitConfig {
    pub fn rated_power_w(&self) -> f64 {
        self.rated_power_mw * 1.0e6
    }

    /// Island-mode power ceiling of the converter in watts.
    pub fn converter_rating_w(&self) -> f64 {
        self.converter_rating_mw
            .unwrap_or(self.rated_apparent_power_mva)
            * 1.0e6
    }

    pub fn rotor_inertia(&self) -> RotorInertia {
        RotorInertia::from_mechanical_time_constant(
            self.tau_m_s,
            self.rated_power_w(),
            self.speed_rpm.synchronous_rpm,
        )
    }

    pub fn speed_limits(&self) -> SpeedLimits {
        SpeedLimits {
            steady_min_rpm: self.speed_rpm.min_rpm,
            steady_max_rpm: self.speed_rpm.max_rpm,
            transient_margin: self.transient_speed_margin,
            stall_rpm: self.stall_fraction * self.speed_rpm.synchronous_rpm,
        }
    }

    /// Turbine band admissible under the given stack.
    pub fn turbine_range(&self, stack: TechnologyStack) -> PowerRange {
        if stack.supervisor {
            self.supervisor_turbine_power_mw
                .unwrap_or(self.turbine_power_mw)
        } else {
            self.turbine_power_mw
        }
    }

    /// Active-power ceiling used for the reactive capability circle.
    pub fn voltvar_p_max_mw(&self, variable_speed: bool, pump: bool) -> f64 {
        let vv = self.voltvar;
        if pump {
            vv.and_then(|v| v.pump_p_max_mw)
                .unwrap_or(self.rated_power_mw)
        } else if variable_speed {
            vv.and_then(|v| v.vs_turbine_p_max_mw)
                .or(vv.map(|v| v.turbine_p_max_mw))
                .unwrap_or(self.rated_power_mw)
        } else {
            vv.map(|v| v.turbine_p_max_mw)
                .unwrap_or(self.rated_power_mw)
        }
    }

    /// Realise the characteristic tables; CSV paths resolve against
    /// `base_dir` (the plant file's directory).
    pub fn build_characteristic(
        &self,
        base_dir: &Path,
    ) -> Result<MachineCharacteristic, CharacteristicError> {
        match &self.characteristic {
            CharacteristicSource::Synthetic { turbine, pump } => {
                crate::machine::SyntheticCharacteristic {
                    turbine: turbine.clone(),
                    pump: pump.clone(),
                }
                .generate(self.references)
            }
            CharacteristicSource::Csv { path } => {
                MachineCharacteristic::from_csv(&base_dir.join(path), self.references)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BessConfig {
    pub rated_power_mw: f64,
    pub energy_capacity_mwh: f64,
    #[serde(default = "default_soc")]
    pub initial_soc: f64,
    #[serde(default = "default_bess_lag")]
    pub response_tau_s: f64,
}

fn default_soc() -> f64 {
    0.5
}

fn default_bess_lag() -> f64 {
    0.05
}

impl BessConfig {
    pub fn params(&self) -> BessParams {
        BessParams {
            rated_power_w: self.rated_power_mw * 1.0e6,
            energy_capacity_j: self.energy_capacity_mwh * 3.6e9,
        }
    }
}

// ---------------------------------------------------------------------------
// Controller tunings
// ---------------------------------------------------------------------------

/// Droop law settings; the reserve itself is per-test.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DroopSettings {
    pub droop_pu: f64,
    pub deadband_hz: f64,
    /// Time to walk the command from zero to full reserve (s). Keeps the
    /// initial-response and full-reserve deadlines honest without stepping
    /// the whole reserve through the plant at once.
    #[serde(default = "default_activation_ramp_s")]
    pub activation_ramp_s: f64,
}

fn default_activation_ramp_s() -> f64 {
    20.0
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AfrrSettings {
    pub filter_tau_s: f64,
    pub ramp_duration_s: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FfrSettings {
    /// Lockout between provision cycles (s).
    pub recovery_s: f64,
    /// Deactivation ramp rate for short-support delivery (W/s).
    pub deactivation_rate_w_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    /// Fixed-speed power/droop loop acting on the guide vanes.
    pub governor: GovernorParams,
    /// Variable-speed shaft loop: the converter owes the grid its power
    /// setpoint, so the vanes regulate speed instead.
    pub speed_governor: GovernorParams,
    pub fcr: DroopSettings,
    pub pump_fcr: DroopSettings,
    pub afrr: AfrrSettings,
    pub ffr: FfrSettings,
    pub rocof: RocofEstimatorParams,
    /// Vane bias per rpm of shaft-speed error while the converter holds a
    /// power objective; recharges the rotor without touching grid output.
    pub vs_recenter_mw_per_rpm: f64,
    pub hbh: Option<HbhJointControl>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            governor: GovernorParams {
                kp: 1.2,
                ki: 0.35,
                kd: 0.0,
                permanent_droop_pu: 0.0085,
                servo_rate_pu_s: 0.1,
                y_min_pu: 0.0,
                y_max_pu: 1.0,
            },
            speed_governor: GovernorParams {
                kp: 4.0,
                ki: 0.8,
                kd: 0.0,
                permanent_droop_pu: 0.0,
                servo_rate_pu_s: 0.1,
                y_min_pu: 0.0,
                y_max_pu: 1.0,
            },
            fcr: DroopSettings {
                droop_pu: 0.0085,
                deadband_hz: 0.01,
                activation_ramp_s: 20.0,
            },
            pump_fcr: DroopSettings {
                droop_pu: 0.035,
                deadband_hz: 0.01,
                activation_ramp_s: 20.0,
            },
            afrr: AfrrSettings {
                filter_tau_s: 20.0,
                ramp_duration_s: 300.0,
            },
            ffr: FfrSettings {
                recovery_s: 900.0,
                deactivation_rate_w_s: None,
            },
            rocof: RocofEstimatorParams { filter_tau_s: 0.1 },
            vs_recenter_mw_per_rpm: 2.0,
            hbh: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Loading, validation, assembly
// ---------------------------------------------------------------------------

impl PlantConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        read_toml(path)
    }

    /// Load, then insist on zero diagnostics.
    pub fn load_validated(path: &Path) -> Result<Self, ConfigError> {
        let config: PlantConfig = read_toml(path)?;
        let base_dir = path.parent().unwrap_or(Path::new("."));
        let diagnostics = config.validate(base_dir);
        if diagnostics.is_empty() {
            Ok(config)
        } else {
            Err(ConfigError::Invalid {
                path: path.display().to_string(),
                diagnostics,
            })
        }
    }

    /// Full schema and invariant check; no simulation. `base_dir` anchors
    /// relative characteristic paths.
    pub fn validate(&self, base_dir: &Path) -> Vec<Diagnostic> {
        let mut out = Vec::new();

        if !positive(self.plant.f_n_hz) {
            out.push(Diagnostic::new(
                "plant.f_n_hz",
                format!("nominal frequency must be positive, got {}", self.plant.f_n_hz),
            ));
        }
        if self.units.is_empty() {
            out.push(Diagnostic::new("units", "at least one unit is required"));
        }

        for (i, unit) in self.units.iter().enumerate() {
            let at = |field: &str| format!("units[{i}] ({}) {field}", unit.id);
            if self.units[..i].iter().any(|u| u.id == unit.id) {
                out.push(Diagnostic::new(format!("units[{i}]"), format!("duplicate unit id `{}`", unit.id)));
            }
            let s = &unit.speed_rpm;
            if !(positive(s.min_rpm) && s.min_rpm < s.middle_rpm && s.middle_rpm < s.max_rpm) {
                out.push(Diagnostic::new(
                    at("speed_rpm"),
                    format!(
                        "need 0 < min < middle < max, got {} / {} / {}",
                        s.min_rpm, s.middle_rpm, s.max_rpm
                    ),
                ));
            }
            if !(s.synchronous_rpm >= s.min_rpm && s.synchronous_rpm <= s.max_rpm) {
                out.push(Diagnostic::new(
                    at("speed_rpm.synchronous_rpm"),
                    format!(
                        "synchronous speed {} outside [{}, {}]",
                        s.synchronous_rpm, s.min_rpm, s.max_rpm
                    ),
                ));
            }
            if !(positive(unit.head_m.min_m) && unit.head_m.min_m < unit.head_m.max_m) {
                out.push(Diagnostic::new(
                    at("head_m"),
                    format!("need 0 < min < max, got {} / {}", unit.head_m.min_m, unit.head_m.max_m),
                ));
            }
            if !positive(unit.tau_m_s) {
                out.push(Diagnostic::new(
                    at("tau_m_s"),
                    "mechanical time constant must be positive",
                ));
            }
            if !positive(unit.rated_power_mw) {
                out.push(Diagnostic::new(at("rated_power_mw"), "must be positive"));
            }
            if !(unit.rated_apparent_power_mva >= unit.rated_power_mw
                && unit.rated_apparent_power_mva.is_finite())
            {
                out.push(Diagnostic::new(
                    at("rated_apparent_power_mva"),
                    format!(
                        "apparent rating {} below active rating {}",
                        unit.rated_apparent_power_mva, unit.rated_power_mw
                    ),
                ));
            }
            if let Some(cr) = unit.converter_rating_mw {
                if !positive(cr) || cr > unit.rated_apparent_power_mva {
                    out.push(Diagnostic::new(
                        at("converter_rating_mw"),
                        format!(
                            "converter rating {} must be positive and at most the {} MVA \
                             apparent rating",
                            cr, unit.rated_apparent_power_mva
                        ),
                    ));
                }
            }
            let t = &unit.turbine_power_mw;
            if !(t.min_mw >= 0.0 && t.min_mw < t.max_mw) {
                out.push(Diagnostic::new(
                    at("turbine_power_mw"),
                    format!("band [{}, {}] is empty or negative", t.min_mw, t.max_mw),
                ));
            }
            if let Some(ext) = &unit.supervisor_turbine_power_mw {
                if !ext.contains(t) {
                    out.push(Diagnostic::new(
                        at("supervisor_turbine_power_mw"),
                        format!(
                            "supervisor band [{}, {}] must contain the plain band [{}, {}]",
                            ext.min_mw, ext.max_mw, t.min_mw, t.max_mw
                        ),
                    ));
                }
            }
            if let Some(p) = &unit.pump_power_mw {
                if !(p.min_mw < p.max_mw && p.max_mw <= 0.0) {
                    out.push(Diagnostic::new(
                        at("pump_power_mw"),
                        format!(
                            "pump band [{}, {}] is empty or not a consumption range",
                            p.min_mw, p.max_mw
                        ),
                    ));
                }
            }
            if !(unit.stall_fraction > 0.0 && unit.stall_fraction < 1.0) {
                out.push(Diagnostic::new(
                    at("stall_fraction"),
                    "must lie strictly between 0 and 1",
                ));
            }
            if !(0.0..=0.2).contains(&unit.transient_speed_margin) {
                out.push(Diagnostic::new(
                    at("transient_speed_margin"),
                    "must lie in [0, 0.2]",
                ));
            }
            if let Some(vv) = &unit.voltvar {
                for (name, value) in [
                    ("turbine_p_max_mw", Some(vv.turbine_p_max_mw)),
                    ("vs_turbine_p_max_mw", vv.vs_turbine_p_max_mw),
                    ("pump_p_max_mw", vv.pump_p_max_mw),
                ] {
                    if let Some(v) = value {
                        if v.is_nan() || v > unit.rated_apparent_power_mva {
                            out.push(Diagnostic::new(
                                at(&format!("voltvar.{name}")),
                                format!(
                                    "active ceiling {} exceeds the {} MVA apparent rating",
                                    v, unit.rated_apparent_power_mva
                                ),
                            ));
                        }
                    }
                }
            }
            if let Err(e) = unit.references.validate() {
                out.push(Diagnostic::new(at("references"), e.to_string()));
            }
            if let CharacteristicSource::Csv { path } = &unit.characteristic {
                if !base_dir.join(path).is_file() {
                    out.push(Diagnostic::new(
                        at("characteristic.path"),
                        format!("no such file: {}", base_dir.join(path).display()),
                    ));
                }
            }
        }

        if let Some(bess) = &self.bess {
            if !positive(bess.rated_power_mw) {
                out.push(Diagnostic::new("bess.rated_power_mw", "must be positive"));
            }
            if !positive(bess.energy_capacity_mwh) {
                out.push(Diagnostic::new("bess.energy_capacity_mwh", "must be positive"));
            }
            if !(0.0..=1.0).contains(&bess.initial_soc) {
                out.push(Diagnostic::new("bess.initial_soc", "must lie in [0, 1]"));
            }
            if !non_negative(bess.response_tau_s) {
                out.push(Diagnostic::new("bess.response_tau_s", "must be non-negative"));
            }
        }

        // Topology errors (dangling junctions, duplicate ids, bad geometry)
        // come from assembling the network skeleton; cheap, no simulation.
        if let Err(e) = self.build_network() {
            out.push(Diagnostic::new("waterway", e.to_string()));
        }

        out
    }

    /// Assemble the waterway; machine slot `i` belongs to `units[i]`.
    pub fn build_network(&self) -> Result<Network, BuildError> {
        let mut builder = NetworkBuilder::new();
        for r in &self.waterway.reservoirs {
            builder.add_reservoir(&r.id, &r.junction, r.elevation_m)?;
        }
        for p in &self.waterway.pipes {
            builder.add_pipe(&p.id, &p.from, &p.to, p.geometry())?;
        }
        for t in &self.waterway.surge_tanks {
            builder.add_surge_tank(&t.id, &t.junction, t.geometry())?;
        }
        for v in &self.waterway.valves {
            builder.add_valve(&v.id, &v.from, v.to.as_deref(), v.discharge_elevation_m, v.k_v)?;
        }
        for unit in &self.units {
            builder.add_machine(&unit.id, &unit.from, &unit.to)?;
        }
        builder.build()
    }
}

// ---------------------------------------------------------------------------
// Campaign manifest
// ---------------------------------------------------------------------------

/// Desk-scale test windows. Grid codes demand far longer holds (15 to 30
/// minutes for FCR); the defaults keep the battery tractable and every
/// window stretches back to full scale through the manifest.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TestWindows {
    pub fcr_hold_s: f64,
    /// Setpoint hold before the ramp begins.
    pub afrr_start_hold_s: f64,
    pub afrr_ramp_s: f64,
    /// Total checked window (ramp time plus settling allowance).
    pub afrr_window_s: f64,
}

impl Default for TestWindows {
    fn default() -> Self {
        Self {
            fcr_hold_s: 120.0,
            afrr_start_hold_s: 30.0,
            afrr_ramp_s: 300.0,
            afrr_window_s: 400.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub plant: PathBuf,
    pub stacks: Vec<TechnologyStack>,
    pub services: Vec<ServiceKind>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    /// Worker threads for the (stack, service) grid; 0 = one per core.
    #[serde(default)]
    pub parallelism: usize,
    /// Reserved: all scenarios are deterministic today.
    #[serde(default)]
    pub seed: u64,
    /// Score normalisation; defaults ship with the binary when absent.
    pub scoring: Option<PathBuf>,
    #[serde(default)]
    pub windows: TestWindows,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_dt() -> f64 {
    0.01
}

impl RunManifest {
    /// Parse and re-anchor every relative path to the manifest directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut manifest: RunManifest = read_toml(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        manifest.plant = base.join(&manifest.plant);
        manifest.out_dir = base.join(&manifest.out_dir);
        if let Some(scoring) = manifest.scoring.take() {
            manifest.scoring = Some(base.join(scoring));
        }
        Ok(manifest)
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.stacks.is_empty() {
            out.push(Diagnostic::new("stacks", "at least one technology stack"));
        }
        if self.services.is_empty() {
            out.push(Diagnostic::new("services", "at least one service"));
        }
        if !positive(self.dt_s) {
            out.push(Diagnostic::new("dt_s", "solver step must be positive"));
        }
        let w = &self.windows;
        for (name, value, may_be_zero) in [
            ("windows.fcr_hold_s", w.fcr_hold_s, false),
            ("windows.afrr_start_hold_s", w.afrr_start_hold_s, true),
            ("windows.afrr_ramp_s", w.afrr_ramp_s, false),
            ("windows.afrr_window_s", w.afrr_window_s, false),
        ] {
            let ok = if may_be_zero {
                non_negative(value)
            } else {
                positive(value)
            };
            if !ok {
                out.push(Diagnostic::new(
                    name,
                    if may_be_zero {
                        "must be non-negative"
                    } else {
                        "must be positive"
                    },
                ));
            }
        }
        if w.afrr_window_s <= w.afrr_ramp_s {
            out.push(Diagnostic::new(
                "windows.afrr_window_s",
                format!(
                    "checked window {} s must exceed the ramp time {} s",
                    w.afrr_window_s, w.afrr_ramp_s
                ),
            ));
        }
        out
    }
}
