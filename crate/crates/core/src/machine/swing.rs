//! Rotating inertia and the swing equation.

use serde::{Deserialize, Serialize};

/// Lumped rotating inertia of one machine train.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RotorInertia {
    pub j_kgm2: f64,
}

impl RotorInertia {
    /// Build from the mechanical time constant `tau_m = J * omega_n^2 / S`.
    pub fn from_mechanical_time_constant(tau_m_s: f64, s_rated_va: f64, n_rated_rpm: f64) -> Self {
        let omega_n = n_rated_rpm * std::f64::consts::PI / 30.0;
        Self {
            j_kgm2: tau_m_s * s_rated_va / (omega_n * omega_n),
        }
    }

    pub fn kinetic_energy_j(&self, omega_rad_s: f64) -> f64 {
        0.5 * self.j_kgm2 * omega_rad_s * omega_rad_s
    }
}

/// Advance the swing equation `J * domega/dt = T_mech - T_elec` by one step.
///
/// Torques are held constant across the step, which makes the update exact
/// for that torque profile.  Energy accounting convention: the work done by
/// the net torque over the step equals `(T_mech - T_elec) * dt * omega_mid`
/// with `omega_mid = (omega + omega_next) / 2`, and matches the kinetic
/// energy change identically.
pub fn swing_step(
    omega_rad_s: f64,
    t_mech_nm: f64,
    t_elec_nm: f64,
    inertia: RotorInertia,
    dt_s: f64,
) -> f64 {
    omega_rad_s + dt_s * (t_mech_nm - t_elec_nm) / inertia.j_kgm2
}

/// Electrical power of a grid-locked synchronous machine.
///
/// With the rotor locked to grid frequency the machine exports the shaft
/// power plus the kinetic energy released by any grid-imposed speed change:
/// `P = T_mech * omega - J * omega * domega/dt`.
pub fn locked_rotor_electrical_power(
    t_mech_nm: f64,
    omega_rad_s: f64,
    domega_dt: f64,
    inertia: RotorInertia,
) -> f64 {
    t_mech_nm * omega_rad_s - inertia.j_kgm2 * omega_rad_s * domega_dt
}

pub fn rpm_to_rad_s(n_rpm: f64) -> f64 {
    n_rpm * std::f64::consts::PI / 30.0
}

pub fn rad_s_to_rpm(omega: f64) -> f64 {
    omega * 30.0 / std::f64::consts::PI
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frades_like_inertia() -> RotorInertia {
        RotorInertia::from_mechanical_time_constant(7.9, 420.0e6, 375.0)
    }

    #[test]
    fn constant_torque_speed_change_is_exact() {
        let inertia = RotorInertia { j_kgm2: 2.0e6 };
        let omega0 = rpm_to_rad_s(375.0);
        let net = 1.0e6; // N*m
        let dt = 0.25;
        let omega1 = swing_step(omega0, net, 0.0, inertia, dt);
        assert!((omega1 - omega0 - net * dt / inertia.j_kgm2).abs() < 1e-12);
    }

    #[test]
    fn energy_bookkeeping_closes_over_a_transient() {
        // Integrate an arbitrary torque profile and compare the kinetic
        // energy change against the mid-step work sum.
        let inertia = frades_like_inertia();
        let dt = 0.01;
        let mut omega = rpm_to_rad_s(365.5);
        let e0 = inertia.kinetic_energy_j(omega);
        let mut work = 0.0;
        for k in 0..2000 {
            let t = k as f64 * dt;
            let t_mech = 9.0e6 + 2.0e6 * (0.7 * t).sin();
            let t_elec = 9.5e6 + 1.5e6 * (0.3 * t).cos();
            let next = swing_step(omega, t_mech, t_elec, inertia, dt);
            work += (t_mech - t_elec) * dt * 0.5 * (omega + next);
            omega = next;
        }
        let de = inertia.kinetic_energy_j(omega) - e0;
        assert!(
            (de - work).abs() <= 1.0e-3 * de.abs().max(work.abs()),
            "energy mismatch: dE={de}, work={work}"
        );
    }

    #[test]
    fn mechanical_time_constant_round_trips() {
        let inertia = frades_like_inertia();
        let omega_n = rpm_to_rad_s(375.0);
        let tau = inertia.j_kgm2 * omega_n * omega_n / 420.0e6;
        assert!((tau - 7.9).abs() < 1e-12);
    }

    #[test]
    fn locked_rotor_releases_kinetic_energy_on_deceleration() {
        let inertia = frades_like_inertia();
        let omega = rpm_to_rad_s(375.0);
        // Grid frequency falling at 1 Hz/s on a 50 Hz system.
        let domega_dt = -omega / 50.0;
        let p = locked_rotor_electrical_power(0.0, omega, domega_dt, inertia);
        // tau_m * S * (df/dt) / f_n
        let expected = 7.9 * 420.0e6 / 50.0;
        assert!((p - expected).abs() < 1e-3 * expected);
    }
}
