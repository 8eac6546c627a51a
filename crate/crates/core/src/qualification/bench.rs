//! Shared scaffolding for service tests: plant assembly from one config,
//! command plumbing, and the capability search.

use std::path::{Path, PathBuf};

use crate::config::{
    ConfigError, ControlConfig, PlantConfig, TechnologyStack, TestWindows, UnitConfig,
};
use crate::machine::MachineMode;
use crate::sim::{Plant, UnitCommand, UnitElectrical};

use super::QualError;

/// Everything a service runner needs to set up a scenario. Runners always
/// exercise `units[0]`; the other units idle unless the scenario is a
/// short-circuit dispatch, which enlists `units[1]` as the pump.
#[derive(Debug, Clone)]
pub struct TestBench {
    pub config: PlantConfig,
    /// Anchor for characteristic CSV paths (the plant file's directory).
    pub base_dir: PathBuf,
    pub stack: TechnologyStack,
    pub windows: TestWindows,
    pub dt_s: f64,
}

impl TestBench {
    pub fn new(
        config: PlantConfig,
        base_dir: impl Into<PathBuf>,
        stack: TechnologyStack,
        windows: TestWindows,
        dt_s: f64,
    ) -> Self {
        assert!(dt_s > 0.0, "solver step must be positive");
        assert!(!config.units.is_empty(), "plant needs at least one unit");
        Self {
            config,
            base_dir: base_dir.into(),
            stack,
            windows,
            dt_s,
        }
    }

    /// Load and validate a plant file, anchoring relative paths next to it.
    pub fn load(
        plant_path: &Path,
        stack: TechnologyStack,
        windows: TestWindows,
        dt_s: f64,
    ) -> Result<Self, ConfigError> {
        let config = PlantConfig::load_validated(plant_path)?;
        let base_dir = plant_path
            .parent()
            .unwrap_or(Path::new("."))
            .to_path_buf();
        Ok(Self::new(config, base_dir, stack, windows, dt_s))
    }

    pub fn plant(&self) -> Result<Plant, QualError> {
        Plant::from_config(&self.config, &self.base_dir).map_err(QualError::from)
    }

    /// The unit under test.
    pub fn unit(&self) -> &UnitConfig {
        &self.config.units[0]
    }

    pub fn control(&self) -> &ControlConfig {
        &self.config.control
    }

    pub fn f_n_hz(&self) -> f64 {
        self.config.plant.f_n_hz
    }

    /// Capability searches stop once the bracket is tighter than half a
    /// percent of the unit rating; finer than that is below model fidelity.
    pub fn resolution_w(&self) -> f64 {
        0.005 * self.unit().rated_power_w()
    }

    /// Command vector: `commands[0]` drives the unit under test, everything
    /// else idles.
    pub fn single_unit(&self, command: UnitCommand) -> Vec<UnitCommand> {
        let mut commands = vec![idle_command(); self.config.units.len()];
        commands[0] = command;
        commands
    }
}

pub fn idle_command() -> UnitCommand {
    UnitCommand {
        mode: MachineMode::Turbine,
        y_pu: 0.0,
        electrical: UnitElectrical::Idle,
    }
}

/// Walk `current` toward `target` at most `rate * dt` per call.
pub fn slew_toward(current: f64, target: f64, rate: f64, dt_s: f64) -> f64 {
    let step = rate.abs() * dt_s;
    current + (target - current).clamp(-step, step)
}

/// Result of a capability search.
#[derive(Debug)]
pub struct Search<T> {
    /// Largest level observed to pass; zero when every probe failed.
    pub capability: f64,
    /// Payload of the trial at `capability` (`None` when capability is 0).
    pub best: Option<T>,
    /// Payload of the failing trial closest to the boundary, kept so a
    /// zero-capability report can explain itself.
    pub last_failing: Option<T>,
}

/// Largest level in `(0, hi]` whose trial passes, to within `resolution`.
///
/// Assumes pass/fail is monotone in the level, which holds for every
/// service here: more reserve means a larger excursion against the same
/// physical limits. The returned capability is always a level that was
/// actually run and passed, never an interpolation.
pub fn largest_passing<T>(
    hi: f64,
    resolution: f64,
    mut trial: impl FnMut(f64) -> Result<(bool, T), QualError>,
) -> Result<Search<T>, QualError> {
    assert!(resolution > 0.0, "search needs a positive resolution");
    if hi <= 0.0 {
        return Ok(Search {
            capability: 0.0,
            best: None,
            last_failing: None,
        });
    }
    let (pass, payload) = trial(hi)?;
    if pass {
        return Ok(Search {
            capability: hi,
            best: Some(payload),
            last_failing: None,
        });
    }
    let mut lo = 0.0;
    let mut hi = hi;
    let mut best = None;
    let mut last_failing = Some(payload);
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        let (pass, payload) = trial(mid)?;
        if pass {
            lo = mid;
            best = Some(payload);
        } else {
            hi = mid;
            last_failing = Some(payload);
        }
    }
    Ok(Search {
        capability: lo,
        best,
        last_failing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn slew_is_rate_limited_and_settles() {
        let mut x = 0.0;
        for _ in 0..10 {
            x = slew_toward(x, 1.0, 2.0, 0.1);
        }
        assert!((x - 1.0).abs() < 1e-12);
        assert_eq!(slew_toward(0.0, 10.0, 2.0, 0.1), 0.2);
        assert_eq!(slew_toward(0.0, -10.0, 2.0, 0.1), -0.2);
    }

    #[test]
    fn search_on_an_all_pass_predicate_returns_the_ceiling() {
        let s = largest_passing(100.0, 1.0, |_| Ok::<_, QualError>((true, ()))).unwrap();
        assert_eq!(s.capability, 100.0);
        assert!(s.best.is_some());
        assert!(s.last_failing.is_none());
    }

    #[test]
    fn search_on_an_all_fail_predicate_returns_zero() {
        let s = largest_passing(100.0, 1.0, |_| Ok::<_, QualError>((false, ()))).unwrap();
        assert_eq!(s.capability, 0.0);
        assert!(s.best.is_none());
        assert!(s.last_failing.is_some());
    }

    proptest! {
        /// Against a monotone threshold predicate the bisection must land
        /// within one resolution below the true boundary, and the reported
        /// capability must itself pass.
        #[test]
        fn search_brackets_the_true_boundary(
            threshold in 0.0f64..100.0,
            hi in 1.0f64..150.0,
            resolution in 0.01f64..5.0,
        ) {
            let mut probes = 0usize;
            let s = largest_passing(hi, resolution, |level| {
                probes += 1;
                Ok::<_, QualError>((level <= threshold, level))
            }).unwrap();
            let boundary = threshold.min(hi);
            if hi <= threshold {
                prop_assert_eq!(s.capability, hi);
            } else {
                prop_assert!(s.capability <= boundary + 1e-9);
                prop_assert!(
                    boundary - s.capability <= resolution + 1e-9,
                    "capability {} too far below boundary {}", s.capability, boundary
                );
            }
            if let Some(level) = s.best {
                prop_assert_eq!(level, s.capability);
            } else {
                prop_assert_eq!(s.capability, 0.0);
            }
            // Bisection cost stays logarithmic.
            prop_assert!(probes as f64 <= (hi / resolution).max(1.0).log2() + 3.0);
        }
    }
}
