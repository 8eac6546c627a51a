//! Steady-state initialisation.
//!
//! Solves the zero-time-derivative network equations together with one
//! target equation per machine whose operating point is only partially
//! specified: a unit asked for shaft power frees its gate opening, a pump
//! asked for input power frees its speed. Starting transients from this
//! equilibrium means the qualification trajectories contain nothing but the
//! disturbance under test.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::machine::{MachineCharacteristic, MachineMode, OperatingPoint};

use super::network::{MachineBoundary, Network};
use super::SolveError;

/// What the steady solve should pin down for one machine.
#[derive(Debug, Clone, Copy)]
pub enum UnitSteadyTarget {
    /// Find the opening that delivers this shaft power (W) at fixed speed.
    Power { p_w: f64 },
    /// Find the speed that absorbs this shaft power (W) at fixed opening.
    PowerBySpeed { p_w: f64 },
    /// Find the opening where shaft torque vanishes at fixed speed.
    SpeedNoLoad,
    /// Hold speed and opening as given; take whatever power results.
    AsGiven,
}

/// Steady boundary description of one machine slot.
#[derive(Clone, Copy)]
pub enum UnitSteadySpec<'a> {
    Coupled {
        characteristic: &'a MachineCharacteristic,
        mode: MachineMode,
        /// Shaft speed (rpm); initial guess when the target frees it.
        n_rpm: f64,
        /// Gate opening in [0, 1]; initial guess when the target frees it.
        y: f64,
        target: UnitSteadyTarget,
    },
    Dewatered,
}

/// Converged operating point of one machine.
#[derive(Debug, Clone, Copy)]
pub struct UnitSteadyResult {
    pub n_rpm: f64,
    pub y: f64,
    pub discharge_m3s: f64,
    pub head_net_m: f64,
    pub torque_nm: f64,
    pub shaft_power_w: f64,
    pub extrapolated: bool,
}

#[derive(Debug, Clone)]
pub struct SteadyReport {
    pub iterations: usize,
    /// Largest scaled residual at acceptance.
    pub residual: f64,
    pub units: Vec<UnitSteadyResult>,
}

const TOL: f64 = 1.0e-8;
const MAX_ITERATIONS: usize = 200;

#[derive(Clone, Copy)]
enum AuxKind {
    Opening,
    Speed,
}

struct AuxVar {
    machine: usize,
    kind: AuxKind,
    lo: f64,
    hi: f64,
    row_scale: f64,
}

#[derive(Clone)]
struct State {
    heads: Vec<f64>,
    flows: Vec<f64>,
    aux: Vec<f64>,
}

struct Eval {
    residual: DVector<f64>,
    max_abs: f64,
    /// Discharge and head sensitivity per algebraic branch.
    branch: Vec<(f64, f64)>,
    /// Operating point per machine slot (`None` when dewatered).
    ops: Vec<Option<OperatingPoint>>,
}

/// Flood-fill free node heads from the nearest fixed-head node, walking
/// pipe segments first and crossing valves, machines and throttles only for
/// nodes unreachable otherwise. Flooding through conduits drops the full
/// head difference across the algebraic branches, which is both the
/// physically sensible start and the smooth region of their flow laws; a
/// valve initialised at zero head difference sits on the steep shoulder of
/// the regularised square root and wrecks the first Newton steps.
fn nearest_fixed_heads(network: &Network) -> Vec<f64> {
    let n = network.node_count();
    let mut segment_adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for seg in network.segments() {
        segment_adjacency[seg.from].push(seg.to);
        segment_adjacency[seg.to].push(seg.from);
    }
    let mut full_adjacency = segment_adjacency.clone();
    for branch in &network.branches {
        full_adjacency[branch.from].push(branch.to);
        full_adjacency[branch.to].push(branch.from);
    }

    let mut heads = network.heads_m.clone();
    let mut visited = vec![false; n];
    let mut queue = VecDeque::new();
    for (node, seen) in visited.iter_mut().enumerate() {
        if network.node_unknown(node).is_none() {
            *seen = true;
            queue.push_back(node);
        }
    }
    let flood = |adjacency: &[Vec<usize>],
                     queue: &mut VecDeque<usize>,
                     visited: &mut [bool],
                     heads: &mut [f64]| {
        while let Some(node) = queue.pop_front() {
            for &next in &adjacency[node] {
                if !visited[next] {
                    visited[next] = true;
                    heads[next] = heads[node];
                    queue.push_back(next);
                }
            }
        }
    };
    flood(&segment_adjacency, &mut queue, &mut visited, &mut heads);
    // Anything left (throttled tank risers, nodes behind closed elements)
    // inherits across branches from the already-flooded region.
    queue.extend((0..n).filter(|&i| visited[i]));
    flood(&full_adjacency, &mut queue, &mut visited, &mut heads);
    heads
}

impl Network {
    /// Solve for a steady state satisfying the given unit targets and place
    /// the network at it. `specs` must cover every machine slot in order.
    pub fn steady_state(
        &mut self,
        specs: &[UnitSteadySpec<'_>],
    ) -> Result<SteadyReport, SolveError> {
        assert_eq!(specs.len(), self.machine_count(), "one spec per machine");

        let n_heads = self.n_unknown_heads();
        let n_segments = self.segments().len();

        // Free variables beyond the hydraulic state.
        let mut aux_of_machine: Vec<Option<usize>> = vec![None; specs.len()];
        let mut aux_vars: Vec<AuxVar> = Vec::new();
        for (slot, spec) in specs.iter().enumerate() {
            let UnitSteadySpec::Coupled {
                characteristic,
                mode,
                target,
                ..
            } = spec
            else {
                continue;
            };
            let p_ref = characteristic.refs.p_ref_w();
            let (kind, row_scale) = match target {
                UnitSteadyTarget::Power { p_w } => {
                    (AuxKind::Opening, p_w.abs().max(0.01 * p_ref))
                }
                UnitSteadyTarget::PowerBySpeed { p_w } => {
                    (AuxKind::Speed, p_w.abs().max(0.01 * p_ref))
                }
                UnitSteadyTarget::SpeedNoLoad => (AuxKind::Opening, 0.01 * p_ref),
                UnitSteadyTarget::AsGiven => continue,
            };
            let (lo, hi) = match kind {
                AuxKind::Opening => (0.0, 1.0),
                AuxKind::Speed => characteristic.speed_hull_rpm(*mode),
            };
            aux_of_machine[slot] = Some(aux_vars.len());
            aux_vars.push(AuxVar {
                machine: slot,
                kind,
                lo,
                hi,
                row_scale,
            });
        }
        let n_unknowns = n_heads + n_segments + aux_vars.len();

        // Row scales keep the mixed-unit system comparable: node rows in
        // machine-sized discharges, momentum rows in reservoir-sized heads.
        let q_scale = specs
            .iter()
            .filter_map(|s| match s {
                UnitSteadySpec::Coupled { characteristic, .. } => {
                    Some(characteristic.refs.q_ref_m3s)
                }
                UnitSteadySpec::Dewatered => None,
            })
            .fold(1.0f64, f64::max);
        let h_scale = (0..self.node_count())
            .filter(|&i| self.node_unknown(i).is_none())
            .map(|i| self.heads_m[i].abs())
            .fold(1.0f64, f64::max);

        // Quadratic friction has zero slope at the zero-flow start, which
        // strands Newton: the linear model lets flows run away for free and
        // every backtracked trial lands on the true quadratic loss. Until
        // steps succeed, floor each segment's friction slope at a fraction
        // of the flow that would burn the whole plant head in that segment;
        // the floor relaxes multiplicatively towards the exact Jacobian.
        let fixed_heads: Vec<f64> = (0..self.node_count())
            .filter(|&i| self.node_unknown(i).is_none())
            .map(|i| self.heads_m[i])
            .collect();
        let h_span = fixed_heads
            .iter()
            .fold(f64::MIN, |a, &b| a.max(b))
            - fixed_heads.iter().fold(f64::MAX, |a, &b| a.min(b));
        let h_span = h_span.max(1.0);
        let seg_q_char: Vec<f64> = self
            .segments()
            .iter()
            .map(|s| {
                if s.resistance > 0.0 {
                    (h_span / s.resistance).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let mut friction_relax = 0.3f64;
        const RELAX_MAX: f64 = 4.8;

        let mut state = State {
            heads: nearest_fixed_heads(self),
            flows: vec![0.0; n_segments],
            aux: aux_vars
                .iter()
                .map(|aux| {
                    let UnitSteadySpec::Coupled { n_rpm, y, .. } = specs[aux.machine] else {
                        unreachable!("aux vars only attach to coupled machines");
                    };
                    match aux.kind {
                        AuxKind::Opening => y.clamp(aux.lo, aux.hi),
                        AuxKind::Speed => n_rpm.clamp(aux.lo, aux.hi),
                    }
                })
                .collect(),
        };

        let evaluate = |state: &State| -> Eval {
            let mut ops: Vec<Option<OperatingPoint>> = Vec::with_capacity(specs.len());
            for (slot, spec) in specs.iter().enumerate() {
                match spec {
                    UnitSteadySpec::Dewatered => ops.push(None),
                    UnitSteadySpec::Coupled {
                        characteristic,
                        mode,
                        n_rpm,
                        y,
                        ..
                    } => {
                        let (from, to) = self.machine_nodes(slot);
                        let dh = state.heads[from] - state.heads[to];
                        let (mut n, mut y_now) = (*n_rpm, *y);
                        if let Some(k) = aux_of_machine[slot] {
                            match aux_vars[k].kind {
                                AuxKind::Opening => y_now = state.aux[k],
                                AuxKind::Speed => n = state.aux[k],
                            }
                        }
                        ops.push(Some(characteristic.operating_point(*mode, n, dh, y_now)));
                    }
                }
            }

            let branch: Vec<(f64, f64)> = self
                .branches
                .iter()
                .map(|b| {
                    use super::network::BranchKind;
                    if let BranchKind::Machine { machine } = &b.kind {
                        match &ops[*machine] {
                            Some(op) => (op.discharge_m3s, op.dq_dh),
                            None => (0.0, 0.0),
                        }
                    } else {
                        let dh = state.heads[b.from] - state.heads[b.to];
                        let (q, dq, _) = self.branch_flow(b, dh, &[]);
                        (q, dq)
                    }
                })
                .collect();

            let mut residual = DVector::zeros(n_unknowns);
            // Node continuity.
            let mut inflow = vec![0.0; self.node_count()];
            for (seg, &q) in self.segments().iter().zip(&state.flows) {
                inflow[seg.from] -= q;
                inflow[seg.to] += q;
            }
            for (b, &(q, _)) in self.branches.iter().zip(&branch) {
                inflow[b.from] -= q;
                inflow[b.to] += q;
            }
            for (node, &net) in inflow.iter().enumerate() {
                if let Some(row) = self.node_unknown(node) {
                    residual[row] = net / q_scale;
                }
            }
            // Segment momentum.
            for (b, (seg, &q)) in self.segments().iter().zip(&state.flows).enumerate() {
                residual[n_heads + b] = (state.heads[seg.from]
                    - state.heads[seg.to]
                    - seg.resistance * q * q.abs())
                    / h_scale;
            }
            // Unit targets.
            for (k, aux) in aux_vars.iter().enumerate() {
                let UnitSteadySpec::Coupled { n_rpm, target, .. } = specs[aux.machine] else {
                    unreachable!();
                };
                let op = ops[aux.machine].as_ref().expect("coupled machine");
                let n = match aux.kind {
                    AuxKind::Speed => state.aux[k],
                    AuxKind::Opening => n_rpm,
                };
                let omega = n * std::f64::consts::PI / 30.0;
                residual[n_heads + n_segments + k] = match target {
                    UnitSteadyTarget::Power { p_w }
                    | UnitSteadyTarget::PowerBySpeed { p_w } => {
                        (op.torque_nm * omega - p_w) / aux.row_scale
                    }
                    // No-load is the power target with zero setpoint.
                    UnitSteadyTarget::SpeedNoLoad => op.torque_nm * omega / aux.row_scale,
                    UnitSteadyTarget::AsGiven => unreachable!(),
                };
            }
            let max_abs = if n_unknowns == 0 {
                0.0
            } else {
                residual.amax()
            };
            Eval {
                residual,
                max_abs,
                branch,
                ops,
            }
        };

        let mut eval = evaluate(&state);
        let mut iterations = 0;
        let mut stalled = 0;
        // Targets proven unreachable get their variable pinned at a bound
        // and their row dropped from convergence and the line-search merit;
        // the reduced system still has to converge before we report them.
        let mut frozen = vec![false; aux_vars.len()];
        loop {
            let free_max = (0..n_unknowns)
                .filter(|&i| {
                    i.checked_sub(n_heads + n_segments)
                        .is_none_or(|k| !frozen[k])
                })
                .map(|i| eval.residual[i].abs())
                .fold(0.0f64, f64::max);
            if free_max < TOL {
                let unmet = (0..aux_vars.len()).any(|k| {
                    frozen[k] && eval.residual[n_heads + n_segments + k].abs() > 100.0 * TOL
                });
                if unmet {
                    return Err(self.diagnose_steady_failure(
                        specs, &aux_vars, &state, &eval, iterations,
                    ));
                }
                break;
            }
            if iterations >= MAX_ITERATIONS || stalled >= 6 {
                return Err(self.diagnose_steady_failure(
                    specs, &aux_vars, &state, &eval, iterations,
                ));
            }
            iterations += 1;

            let flow_slope_floor: Vec<f64> = seg_q_char
                .iter()
                .map(|&q_char| friction_relax * q_char)
                .collect();
            let jacobian = self.steady_jacobian(
                specs,
                &aux_vars,
                &aux_of_machine,
                &state,
                &eval,
                q_scale,
                h_scale,
                &flow_slope_floor,
            );
            // Machine variables pinned at a bound with the step pushing
            // further out are frozen (row and column replaced by identity)
            // and the system re-solved: leaving them in makes every
            // projected trial chase a move the clamp forbids, which poisons
            // the whole direction and strands the solvable remainder.
            let mut jacobian = jacobian;
            let mut rhs = -&eval.residual;
            frozen.iter_mut().for_each(|f| *f = false);
            let delta = loop {
                let Some(delta) = jacobian.clone().lu().solve(&rhs) else {
                    return Err(SolveError::NonFinite {
                        context: "steady state",
                    });
                };
                let mut pinned_any = false;
                for (k, aux) in aux_vars.iter().enumerate() {
                    let idx = n_heads + n_segments + k;
                    let outward = (state.aux[k] <= aux.lo && delta[idx] < 0.0)
                        || (state.aux[k] >= aux.hi && delta[idx] > 0.0);
                    if outward && !frozen[k] {
                        frozen[k] = true;
                        pinned_any = true;
                        for j in 0..n_unknowns {
                            jacobian[(idx, j)] = 0.0;
                            jacobian[(j, idx)] = 0.0;
                        }
                        jacobian[(idx, idx)] = 1.0;
                        rhs[idx] = 0.0;
                    }
                }
                if !pinned_any {
                    break delta;
                }
            };
            // Trust-region cap on the machine variables: chasing a target
            // far out of reach otherwise launches the linear model to
            // absurd openings or speeds, and the backtracking search can
            // only crawl after it. Scaling the whole step keeps the
            // hydraulic part consistent with the capped variable.
            let mut step_scale = 1.0f64;
            for (k, aux) in aux_vars.iter().enumerate() {
                let d = delta[n_heads + n_segments + k].abs();
                let cap = 0.5 * (aux.hi - aux.lo);
                if d > cap {
                    step_scale = step_scale.min(cap / d);
                }
            }
            let delta = delta * step_scale;

            // The line search measures progress on the free rows only: a
            // frozen row is a constant offset no step can reduce, and left
            // in the merit it drowns out the progress Armijo looks for.
            let merit = |r: &DVector<f64>| -> f64 {
                (0..n_unknowns)
                    .filter(|&i| {
                        i.checked_sub(n_heads + n_segments)
                            .is_none_or(|k| !frozen[k])
                    })
                    .map(|i| r[i] * r[i])
                    .sum::<f64>()
                    .sqrt()
            };

            // Backtracking line search with projection onto variable bounds.
            let norm = merit(&eval.residual);
            let mut alpha = 1.0;
            let mut best: Option<(State, Eval)> = None;
            let mut accepted = false;
            for _ in 0..11 {
                let mut trial = state.clone();
                let mut col = 0;
                for node in 0..self.node_count() {
                    if self.node_unknown(node).is_some() {
                        trial.heads[node] += alpha * delta[col];
                        col += 1;
                    }
                }
                for (b, q) in trial.flows.iter_mut().enumerate() {
                    *q += alpha * delta[n_heads + b];
                }
                for (k, aux) in aux_vars.iter().enumerate() {
                    trial.aux[k] = (trial.aux[k] + alpha * delta[n_heads + n_segments + k])
                        .clamp(aux.lo, aux.hi);
                }
                if trial
                    .heads
                    .iter()
                    .chain(&trial.flows)
                    .chain(&trial.aux)
                    .any(|v| !v.is_finite())
                {
                    alpha *= 0.5;
                    continue;
                }
                let trial_eval = evaluate(&trial);
                let improved = merit(&trial_eval.residual) <= (1.0 - 1.0e-4 * alpha) * norm;
                if best
                    .as_ref()
                    .map(|(_, e)| merit(&trial_eval.residual) < merit(&e.residual))
                    .unwrap_or(true)
                {
                    best = Some((trial, trial_eval));
                }
                if improved {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            let Some((next, next_eval)) = best else {
                return Err(SolveError::NonFinite {
                    context: "steady state",
                });
            };
            let full_step = accepted && alpha >= 1.0;
            if accepted || merit(&next_eval.residual) < norm {
                stalled = 0;
                state = next;
                eval = next_eval;
                if full_step {
                    friction_relax = (friction_relax * 0.25).max(1.0e-9);
                }
            } else if friction_relax < RELAX_MAX {
                // Give the damped Jacobian a chance before declaring a stall.
                friction_relax = (friction_relax * 4.0).min(RELAX_MAX);
            } else {
                stalled += 1;
            }
        }

        self.heads_m = state.heads;
        self.flows_m3s = state.flows;
        self.check_tank_levels()?;

        let units = specs
            .iter()
            .enumerate()
            .map(|(slot, spec)| {
                let (from, to) = self.machine_nodes(slot);
                let dh = self.heads_m[from] - self.heads_m[to];
                match (spec, &eval.ops[slot]) {
                    (UnitSteadySpec::Dewatered, _) | (_, None) => UnitSteadyResult {
                        n_rpm: 0.0,
                        y: 0.0,
                        discharge_m3s: 0.0,
                        head_net_m: dh,
                        torque_nm: 0.0,
                        shaft_power_w: 0.0,
                        extrapolated: false,
                    },
                    (
                        UnitSteadySpec::Coupled { n_rpm, y, .. },
                        Some(op),
                    ) => {
                        let (mut n, mut y_now) = (*n_rpm, *y);
                        if let Some(k) = aux_of_machine[slot] {
                            match aux_vars[k].kind {
                                AuxKind::Opening => y_now = state.aux[k],
                                AuxKind::Speed => n = state.aux[k],
                            }
                        }
                        let omega = n * std::f64::consts::PI / 30.0;
                        UnitSteadyResult {
                            n_rpm: n,
                            y: y_now,
                            discharge_m3s: op.discharge_m3s,
                            head_net_m: dh,
                            torque_nm: op.torque_nm,
                            shaft_power_w: op.torque_nm * omega,
                            extrapolated: op.extrapolated,
                        }
                    }
                }
            })
            .collect();

        Ok(SteadyReport {
            iterations,
            residual: eval.max_abs,
            units,
        })
    }

    /// Steady boundaries matching a converged report (for handing the same
    /// operating point to the transient solver).
    pub fn steady_boundaries<'a>(
        &self,
        specs: &[UnitSteadySpec<'a>],
        report: &SteadyReport,
    ) -> Vec<MachineBoundary<'a>> {
        specs
            .iter()
            .zip(&report.units)
            .map(|(&spec, unit)| match spec {
                UnitSteadySpec::Dewatered => MachineBoundary::Dewatered,
                UnitSteadySpec::Coupled {
                    characteristic,
                    mode,
                    ..
                } => MachineBoundary::Coupled {
                    characteristic,
                    mode,
                    n_rpm: unit.n_rpm,
                    y: unit.y,
                },
            })
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn steady_jacobian(
        &self,
        specs: &[UnitSteadySpec<'_>],
        aux_vars: &[AuxVar],
        aux_of_machine: &[Option<usize>],
        state: &State,
        eval: &Eval,
        q_scale: f64,
        h_scale: f64,
        flow_slope_floor: &[f64],
    ) -> DMatrix<f64> {
        use super::network::BranchKind;

        let n_heads = self.n_unknown_heads();
        let n_segments = self.segments().len();
        let n =
            n_heads + n_segments + aux_vars.len();
        let mut jacobian = DMatrix::zeros(n, n);

        for (b, seg) in self.segments().iter().enumerate() {
            let col_q = n_heads + b;
            if let Some(row) = self.node_unknown(seg.from) {
                jacobian[(row, col_q)] -= 1.0 / q_scale;
            }
            if let Some(row) = self.node_unknown(seg.to) {
                jacobian[(row, col_q)] += 1.0 / q_scale;
            }
            let row = n_heads + b;
            jacobian[(row, col_q)] = -(2.0
                * seg.resistance
                * state.flows[b].abs().max(flow_slope_floor[b])
                + 1.0e-9)
                / h_scale;
            if let Some(col) = self.node_unknown(seg.from) {
                jacobian[(row, col)] = 1.0 / h_scale;
            }
            if let Some(col) = self.node_unknown(seg.to) {
                jacobian[(row, col)] = -1.0 / h_scale;
            }
        }

        for (branch, &(_, dq)) in self.branches.iter().zip(&eval.branch) {
            let from = self.node_unknown(branch.from);
            let to = self.node_unknown(branch.to);
            if let Some(row) = from {
                jacobian[(row, row)] -= dq / q_scale;
                if let Some(col) = to {
                    jacobian[(row, col)] += dq / q_scale;
                }
            }
            if let Some(row) = to {
                if let Some(col) = from {
                    jacobian[(row, col)] += dq / q_scale;
                }
                jacobian[(row, row)] -= dq / q_scale;
            }
            // Discharge sensitivity to the machine's free variable.
            if let BranchKind::Machine { machine } = &branch.kind {
                if let Some(k) = aux_of_machine[*machine] {
                    let op = eval.ops[*machine].as_ref().expect("coupled machine");
                    let dq_daux = match aux_vars[k].kind {
                        AuxKind::Opening => op.dq_dy,
                        AuxKind::Speed => op.dq_dn,
                    };
                    let col = n_heads + n_segments + k;
                    if let Some(row) = self.node_unknown(branch.from) {
                        jacobian[(row, col)] -= dq_daux / q_scale;
                    }
                    if let Some(row) = self.node_unknown(branch.to) {
                        jacobian[(row, col)] += dq_daux / q_scale;
                    }
                }
            }
        }

        for (k, aux) in aux_vars.iter().enumerate() {
            let UnitSteadySpec::Coupled { n_rpm, .. } = specs[aux.machine] else {
                unreachable!();
            };
            let op = eval.ops[aux.machine].as_ref().expect("coupled machine");
            let (from, to) = self.machine_nodes(aux.machine);
            let row = n_heads + n_segments + k;
            let n_now = match aux.kind {
                AuxKind::Speed => state.aux[k],
                AuxKind::Opening => n_rpm,
            };
            let omega = n_now * std::f64::consts::PI / 30.0;
            let scale = aux.row_scale;
            if let Some(col) = self.node_unknown(from) {
                jacobian[(row, col)] = op.dt_dh * omega / scale;
            }
            if let Some(col) = self.node_unknown(to) {
                jacobian[(row, col)] = -op.dt_dh * omega / scale;
            }
            let col = n_heads + n_segments + k;
            jacobian[(row, col)] = match aux.kind {
                AuxKind::Opening => op.dt_dy * omega / scale,
                AuxKind::Speed => {
                    (op.dt_dn * omega + op.torque_nm * std::f64::consts::PI / 30.0) / scale
                }
            };
        }

        jacobian
    }

    fn diagnose_steady_failure(
        &self,
        specs: &[UnitSteadySpec<'_>],
        aux_vars: &[AuxVar],
        state: &State,
        eval: &Eval,
        iterations: usize,
    ) -> SolveError {
        let n_base = self.n_unknowns();
        for (k, aux) in aux_vars.iter().enumerate() {
            let at_bound = state.aux[k] <= aux.lo || state.aux[k] >= aux.hi;
            let row_residual = eval.residual[n_base + k].abs();
            if at_bound && row_residual > 100.0 * TOL {
                let what = match aux.kind {
                    AuxKind::Opening => "opening",
                    AuxKind::Speed => "speed",
                };
                let UnitSteadySpec::Coupled { target, .. } = specs[aux.machine] else {
                    unreachable!();
                };
                let wanted = match target {
                    UnitSteadyTarget::Power { p_w }
                    | UnitSteadyTarget::PowerBySpeed { p_w } => {
                        format!("{:.1} MW", p_w / 1.0e6)
                    }
                    UnitSteadyTarget::SpeedNoLoad => "no-load torque".to_string(),
                    UnitSteadyTarget::AsGiven => unreachable!(),
                };
                return SolveError::UnreachableTarget {
                    id: self.machine_id(aux.machine).to_string(),
                    message: format!(
                        "{what} pinned at {:.3} with {wanted} still unmet",
                        state.aux[k]
                    ),
                };
            }
        }
        SolveError::NoConvergence {
            context: "steady state",
            residual: eval.max_abs,
            iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::machine::{References, SyntheticCharacteristic, SyntheticPump, SyntheticTurbine};

    use super::super::network::{NetworkBuilder, PipeGeometry};
    use super::*;

    fn refs() -> References {
        References {
            n_ref_rpm: 375.0,
            h_ref_m: 420.0,
            q_ref_m3s: 105.0,
        }
    }

    fn plant_with_machine() -> (Network, usize) {
        let mut builder = NetworkBuilder::new();
        builder.add_reservoir("upper", "intake", 430.0).unwrap();
        builder.add_reservoir("lower", "outlet", 0.0).unwrap();
        builder
            .add_pipe(
                "penstock",
                "intake",
                "spiral",
                PipeGeometry {
                    length_m: 500.0,
                    diameter_m: 6.0,
                    wave_speed_ms: 1200.0,
                    friction_factor: 0.012,
                    n_segments: 4,
                },
            )
            .unwrap();
        builder
            .add_pipe(
                "tailrace",
                "draft",
                "outlet",
                PipeGeometry {
                    length_m: 300.0,
                    diameter_m: 6.0,
                    wave_speed_ms: 1100.0,
                    friction_factor: 0.012,
                    n_segments: 3,
                },
            )
            .unwrap();
        let slot = builder.add_machine("unit", "spiral", "draft").unwrap();
        (builder.build().unwrap(), slot)
    }

    #[test]
    fn valve_network_matches_series_loss_algebra() {
        let mut builder = NetworkBuilder::new();
        builder.add_reservoir("upper", "a", 100.0).unwrap();
        let geometry = PipeGeometry {
            length_m: 800.0,
            diameter_m: 1.2,
            wave_speed_ms: 1000.0,
            friction_factor: 0.018,
            n_segments: 5,
        };
        builder.add_pipe("p", "a", "j", geometry).unwrap();
        builder
            .add_valve("v", "j", None, Some(40.0), 2.5)
            .unwrap();
        let mut network = builder.build().unwrap();
        let report = network.steady_state(&[]).unwrap();
        assert!(report.residual < TOL);

        let area = geometry.area_m2();
        let r_pipe = 0.018 * 800.0
            / (2.0 * crate::GRAVITY * 1.2 * area * area);
        // Series balance: r_pipe Q^2 + (Q / k_v)^2 = 60.
        let q_expected = (60.0 / (r_pipe + 1.0 / (2.5 * 2.5))).sqrt();
        let q = network.flows_m3s[0];
        assert!(
            (q - q_expected).abs() < 1.0e-6 * q_expected,
            "q = {q}, expected {q_expected}"
        );
    }

    #[test]
    fn turbine_power_target_converges_to_requested_power() {
        let (mut network, _slot) = plant_with_machine();
        let characteristic = SyntheticCharacteristic {
            turbine: SyntheticTurbine::default(),
            pump: None,
        }
        .generate(refs())
        .unwrap();
        let p_target = 300.0e6;
        let report = network
            .steady_state(&[UnitSteadySpec::Coupled {
                characteristic: &characteristic,
                mode: MachineMode::Turbine,
                n_rpm: 375.0,
                y: 0.7,
                target: UnitSteadyTarget::Power { p_w: p_target },
            }])
            .unwrap();
        let unit = &report.units[0];
        assert!((unit.shaft_power_w - p_target).abs() < 1.0e-4 * p_target);
        assert!(unit.y > 0.0 && unit.y < 1.0);
        assert!(!unit.extrapolated);
        // Hydraulics and table must agree on the discharge (continuity is
        // enforced to 1e-8 of the reference flow at every interior node).
        assert!((network.flows_m3s[0] - unit.discharge_m3s).abs() < 1.0e-5);
        // Net head is the gross head minus both friction losses.
        assert!(unit.head_net_m < 430.0 && unit.head_net_m > 400.0);
    }

    #[test]
    fn speed_no_load_finds_small_opening_with_zero_torque() {
        let (mut network, _slot) = plant_with_machine();
        let characteristic = SyntheticCharacteristic {
            turbine: SyntheticTurbine::default(),
            pump: None,
        }
        .generate(refs())
        .unwrap();
        let report = network
            .steady_state(&[UnitSteadySpec::Coupled {
                characteristic: &characteristic,
                mode: MachineMode::Turbine,
                n_rpm: 375.0,
                y: 0.2,
                target: UnitSteadyTarget::SpeedNoLoad,
            }])
            .unwrap();
        let unit = &report.units[0];
        // Row scale is 1% of rated power and the solve runs to 1e-8, so the
        // residual no-load power is far below one watt.
        assert!(unit.shaft_power_w.abs() < 1.0);
        assert!(
            unit.y > 0.0 && unit.y < 0.2,
            "no-load opening should be small, got {}",
            unit.y
        );
    }

    #[test]
    fn pump_power_by_speed_lands_inside_hull() {
        let (mut network, _slot) = plant_with_machine();
        let characteristic = SyntheticCharacteristic {
            turbine: SyntheticTurbine::default(),
            pump: Some(SyntheticPump::default()),
        }
        .generate(refs())
        .unwrap();
        let p_target = -300.0e6;
        let report = network
            .steady_state(&[UnitSteadySpec::Coupled {
                characteristic: &characteristic,
                mode: MachineMode::Pump,
                n_rpm: 370.0,
                y: 1.0,
                target: UnitSteadyTarget::PowerBySpeed { p_w: p_target },
            }])
            .unwrap();
        let unit = &report.units[0];
        assert!((unit.shaft_power_w - p_target).abs() < 1.0e-4 * p_target.abs());
        assert!(unit.discharge_m3s < 0.0, "pumping flow must run uphill");
        let (lo, hi) = characteristic.speed_hull_rpm(MachineMode::Pump);
        assert!(unit.n_rpm > lo && unit.n_rpm < hi);
        assert!(!unit.extrapolated);
    }

    #[test]
    fn impossible_power_target_reports_the_unit() {
        let (mut network, _slot) = plant_with_machine();
        let characteristic = SyntheticCharacteristic {
            turbine: SyntheticTurbine::default(),
            pump: None,
        }
        .generate(refs())
        .unwrap();
        let err = network
            .steady_state(&[UnitSteadySpec::Coupled {
                characteristic: &characteristic,
                mode: MachineMode::Turbine,
                n_rpm: 375.0,
                y: 0.7,
                target: UnitSteadyTarget::Power { p_w: 10.0e9 },
            }])
            .unwrap_err();
        match err {
            SolveError::UnreachableTarget { id, .. } => assert_eq!(id, "unit"),
            other => panic!("expected unreachable target, got {other:?}"),
        }
    }

    #[test]
    fn dewatered_unit_blocks_flow() {
        let (mut network, _slot) = plant_with_machine();
        let report = network.steady_state(&[UnitSteadySpec::Dewatered]).unwrap();
        assert!(network.flows_m3s.iter().all(|q| q.abs() < 1.0e-9));
        assert!((report.units[0].head_net_m - 430.0).abs() < 1.0e-6);
    }
}
