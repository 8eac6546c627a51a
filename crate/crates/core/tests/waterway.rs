//! Waterway physics checks against closed-form references.
//!
//! Each expected value below is computed from an independent formula, not
//! from the solver: rapid valve closure against the wave impedance `a dV/g`,
//! the reservoir/surge-tank oscillation period `2 pi sqrt(L A_st / (g A))`,
//! and exact continuity/equilibrium properties of the scheme itself.

use hydrosim_core::hydraulic::{
    Network, NetworkBuilder, PipeGeometry, TankGeometry, UnitSteadySpec,
};
use hydrosim_core::GRAVITY;

/// Frictionless pipe from a reservoir to a valve discharging at elevation
/// zero. `k_v` fixes the steady velocity near 1 m/s.
fn surge_rig(n_segments: usize) -> Network {
    let mut builder = NetworkBuilder::new();
    builder.add_reservoir("upper", "inlet", 100.0).unwrap();
    builder
        .add_pipe(
            "line",
            "inlet",
            "valve_end",
            PipeGeometry {
                length_m: 1000.0,
                diameter_m: 1.0,
                wave_speed_ms: 1000.0,
                friction_factor: 0.0,
                n_segments,
            },
        )
        .unwrap();
    builder
        .add_valve("outlet", "valve_end", None, Some(0.0), 0.0785)
        .unwrap();
    builder.build().unwrap()
}

/// Surge rise at the valve from closing it over `tau_c` seconds: mean rise
/// across the post-closure plateau (0.3 s to 1.8 s, before the reservoir
/// reflection returns at 2L/a = 2 s) plus the global maximum. Closure is
/// fast against the reflection time, so the full surge develops, yet slow
/// enough to spread the wave front over several segments of the ladder.
fn closure_surge_rise(network: &mut Network, dt: f64, tau_c: f64) -> (f64, f64) {
    let h0 = network.junction_head_m("valve_end").unwrap();
    let steps = (2.0 / dt).ceil() as usize;
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut max = f64::MIN;
    for k in 0..steps {
        let t_new = (k + 1) as f64 * dt;
        let y = (1.0 - t_new / tau_c).clamp(0.0, 1.0);
        network.set_valve_opening("outlet", y);
        network.step(&[], dt).unwrap();
        let rise = network.junction_head_m("valve_end").unwrap() - h0;
        max = max.max(rise);
        if (0.3..=1.8).contains(&t_new) {
            sum += rise;
            count += 1;
        }
    }
    (sum / count as f64, max)
}

#[test]
fn valve_closure_surge_matches_wave_impedance() {
    let mut network = surge_rig(32);
    network.steady_state(&[]).unwrap();
    let area = std::f64::consts::PI / 4.0;
    let v0 = network.pipe_discharge_m3s("line").unwrap() / area;
    let expected_rise = 1000.0 * v0 / GRAVITY;

    let (plateau, max) = closure_surge_rise(&mut network, 0.005, 0.2);
    assert!(
        (plateau - expected_rise).abs() < 0.02 * expected_rise,
        "surge rise {plateau:.2} m, wave impedance predicts {expected_rise:.2} m"
    );
    // The undamped ladder rings about the plateau; the front is spread wide
    // enough that the excursion stays small.
    assert!(
        max < 1.15 * expected_rise,
        "ringing peak {max:.2} m too far above {expected_rise:.2} m"
    );
}

#[test]
fn surge_rise_converges_under_grid_refinement() {
    let mut coarse = surge_rig(32);
    coarse.steady_state(&[]).unwrap();
    let (rise_coarse, _) = closure_surge_rise(&mut coarse, 0.0025, 0.2);

    let mut fine = surge_rig(64);
    fine.steady_state(&[]).unwrap();
    let (rise_fine, _) = closure_surge_rise(&mut fine, 0.0025, 0.2);

    assert!(
        (rise_coarse - rise_fine).abs() < 0.02 * rise_fine.abs(),
        "rise changed from {rise_coarse:.3} to {rise_fine:.3} on refinement"
    );
}

fn tank_rig() -> Network {
    let mut builder = NetworkBuilder::new();
    builder.add_reservoir("res", "inlet", 100.0).unwrap();
    // 2 m^2 of pipe area: diameter sqrt(8 / pi).
    builder
        .add_pipe(
            "tunnel",
            "inlet",
            "tank_base",
            PipeGeometry {
                length_m: 500.0,
                diameter_m: (8.0 / std::f64::consts::PI).sqrt(),
                wave_speed_ms: 1200.0,
                friction_factor: 0.0,
                n_segments: 4,
            },
        )
        .unwrap();
    builder
        .add_surge_tank(
            "tank",
            "tank_base",
            TankGeometry {
                cross_section_m2: 4.0,
                base_elevation_m: 0.0,
                min_level_m: 80.0,
                max_level_m: 120.0,
                throttle_k: None,
            },
        )
        .unwrap();
    builder.build().unwrap()
}

#[test]
fn surge_tank_oscillation_period_matches_mass_oscillation() {
    let mut network = tank_rig();
    // Start the tank 5 m below the reservoir; it swings about 100 m.
    network.initialize_hydrostatic(95.0);
    let dt = 0.1;
    let mut crossings = Vec::new();
    let mut prev = network.tank_level_m("tank").unwrap();
    let mut t = 0.0;
    while t < 200.0 && crossings.len() < 3 {
        network.step(&[], dt).unwrap();
        t += dt;
        let level = network.tank_level_m("tank").unwrap();
        if prev < 100.0 && level >= 100.0 {
            crossings.push(t - dt + dt * (100.0 - prev) / (level - prev));
        }
        prev = level;
    }
    assert!(crossings.len() >= 2, "tank never completed a full cycle");
    let period = crossings[1] - crossings[0];
    // 2 pi sqrt(L A_st / (g A)) with L = 500 m, A = 2 m^2, A_st = 4 m^2.
    let expected = 2.0 * std::f64::consts::PI * (500.0 * 4.0 / (GRAVITY * 2.0)).sqrt();
    assert!(
        (period - expected).abs() < 0.03 * expected,
        "period {period:.2} s, mass oscillation predicts {expected:.2} s"
    );
}

fn branched_rig() -> Network {
    let mut builder = NetworkBuilder::new();
    builder.add_reservoir("top", "a", 120.0).unwrap();
    builder.add_reservoir("mid", "b", 60.0).unwrap();
    builder.add_reservoir("low", "c", 20.0).unwrap();
    let geometry = |length: f64| PipeGeometry {
        length_m: length,
        diameter_m: 1.5,
        wave_speed_ms: 1000.0,
        friction_factor: 0.02,
        n_segments: 4,
    };
    builder.add_pipe("feed", "a", "junction", geometry(600.0)).unwrap();
    builder.add_pipe("left", "junction", "b", geometry(400.0)).unwrap();
    builder.add_pipe("right", "junction", "c", geometry(800.0)).unwrap();
    builder.build().unwrap()
}

#[test]
fn junction_continuity_holds_in_steady_state_and_transients() {
    let mut network = branched_rig();
    let report = network.steady_state(&[]).unwrap();
    assert!(report.residual < 1.0e-8);

    // Shake the network by restarting it far from equilibrium, then demand
    // that every step closes continuity to the solver tolerance, which sits
    // two orders under the 1e-6 m^3/s acceptance bound.
    network.initialize_hydrostatic(90.0);
    for _ in 0..400 {
        let step = network.step(&[], 0.05).unwrap();
        assert!(step.max_continuity_residual_m3s < 1.0e-6);
    }
}

#[test]
fn steady_state_is_a_fixed_point_of_the_transient_solver() {
    let mut network = branched_rig();
    network.steady_state(&[]).unwrap();
    let before = network.junction_head_m("junction").unwrap();
    for _ in 0..200 {
        network.step(&[], 0.05).unwrap();
    }
    let after = network.junction_head_m("junction").unwrap();
    assert!(
        (after - before).abs() < 1.0e-6,
        "equilibrium drifted from {before} to {after}"
    );
}

#[test]
fn identical_runs_are_bitwise_identical() {
    let run = || -> Vec<u64> {
        let mut network = surge_rig(32);
        network.steady_state(&[]).unwrap();
        let mut trace = Vec::new();
        for k in 0..400 {
            let y = (1.0 - (k + 1) as f64 * 0.005 / 0.2).clamp(0.0, 1.0);
            network.set_valve_opening("outlet", y);
            network.step(&[], 0.005).unwrap();
            trace.push(network.junction_head_m("valve_end").unwrap().to_bits());
        }
        trace
    };
    assert_eq!(run(), run());
}

#[test]
fn dewatered_machine_decouples_both_waterway_sides() {
    let mut builder = NetworkBuilder::new();
    builder.add_reservoir("upper", "intake", 430.0).unwrap();
    builder.add_reservoir("lower", "outfall", 0.0).unwrap();
    let geometry = PipeGeometry {
        length_m: 400.0,
        diameter_m: 5.0,
        wave_speed_ms: 1100.0,
        friction_factor: 0.015,
        n_segments: 4,
    };
    builder.add_pipe("pen", "intake", "spiral", geometry).unwrap();
    builder.add_pipe("tail", "draft", "outfall", geometry).unwrap();
    builder.add_machine("unit", "spiral", "draft").unwrap();
    let mut network = builder.build().unwrap();

    network.steady_state(&[UnitSteadySpec::Dewatered]).unwrap();
    for _ in 0..100 {
        let report = network
            .step(&[hydrosim_core::hydraulic::MachineBoundary::Dewatered], 0.05)
            .unwrap();
        assert_eq!(report.machines[0].discharge_m3s, 0.0);
    }
    let spiral = network.junction_head_m("spiral").unwrap();
    let draft = network.junction_head_m("draft").unwrap();
    assert!((spiral - 430.0).abs() < 1.0e-9);
    assert!((draft - 0.0).abs() < 1.0e-9);
}
