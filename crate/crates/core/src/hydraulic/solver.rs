//! Implicit trapezoidal integration of the waterway states.
//!
//! One step advances free node heads and segment flows together by solving
//!
//! ```text
//!   C_i (H_i' - H_i) / dt = (S_i' + S_i) / 2          (storage nodes)
//!   L_b (Q_b' - Q_b) / dt = (F_b' + F_b) / 2          (segments)
//! ```
//!
//! where `S_i` is the net inflow into node `i` and
//! `F_b = H_from - H_to - r_b Q_b |Q_b|` the segment head balance. Machine
//! speed and opening are held constant across the step, so the scheme sees
//! them as piecewise-constant boundary data evaluated at both endpoints.

use nalgebra::{DMatrix, DVector};

use super::network::{MachineBoundary, MachineCondition, Network};
use super::SolveError;

/// Convergence thresholds. Node rows are in m^3/s, segment rows in m; both
/// sit far below anything the qualification checks can resolve.
const TOL_NODE_M3S: f64 = 1.0e-8;
const TOL_SEGMENT_M: f64 = 1.0e-8;
const MAX_ITERATIONS: usize = 50;

/// What one transient step produced.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub newton_iterations: usize,
    /// Largest storage-node imbalance left after convergence (m^3/s).
    pub max_continuity_residual_m3s: f64,
    /// Hydraulic condition of every machine at the new state.
    pub machines: Vec<MachineCondition>,
    /// True when any machine was sampled outside its characteristic hull.
    pub extrapolated: bool,
}

/// Per-branch sample at a head state: discharge and its head sensitivity.
struct BranchEval {
    q: f64,
    dq_ddh: f64,
}

fn eval_branches(
    network: &Network,
    heads: &[f64],
    boundaries: &[MachineBoundary<'_>],
) -> Vec<BranchEval> {
    network
        .branches
        .iter()
        .map(|branch| {
            let dh = heads[branch.from] - heads[branch.to];
            let (q, dq_ddh, _) = network.branch_flow(branch, dh, boundaries);
            BranchEval { q, dq_ddh }
        })
        .collect()
}

/// Net inflow into every node from segments and algebraic branches.
fn node_inflows(
    network: &Network,
    flows: &[f64],
    branch_evals: &[BranchEval],
) -> Vec<f64> {
    let mut sums = vec![0.0; network.node_count()];
    for (seg, &q) in network.segments().iter().zip(flows) {
        sums[seg.from] -= q;
        sums[seg.to] += q;
    }
    for (branch, eval) in network.branches.iter().zip(branch_evals) {
        sums[branch.from] -= eval.q;
        sums[branch.to] += eval.q;
    }
    sums
}

/// Head balance `H_from - H_to - r Q |Q|` of every segment.
fn segment_balances(network: &Network, heads: &[f64], flows: &[f64]) -> Vec<f64> {
    network
        .segments()
        .iter()
        .zip(flows)
        .map(|(seg, &q)| heads[seg.from] - heads[seg.to] - seg.resistance * q * q.abs())
        .collect()
}

impl Network {
    /// Advance the hydraulic state by `dt_s` with the given machine
    /// boundaries (one per machine slot, same order as registration).
    pub fn step(
        &mut self,
        boundaries: &[MachineBoundary<'_>],
        dt_s: f64,
    ) -> Result<StepReport, SolveError> {
        assert_eq!(
            boundaries.len(),
            self.machine_count(),
            "one boundary per machine"
        );
        assert!(dt_s > 0.0, "step must be positive");
        if dt_s > self.min_travel_time_s() * (1.0 + 1.0e-9) {
            return Err(SolveError::StepTooLarge {
                dt_s,
                limit_s: self.min_travel_time_s(),
            });
        }

        let n_heads = self.n_unknown_heads();
        let n_segments = self.segments().len();
        let n_unknowns = n_heads + n_segments;

        let branch_old = eval_branches(self, &self.heads_m, boundaries);
        let inflows_old = node_inflows(self, &self.flows_m3s, &branch_old);
        let balances_old = segment_balances(self, &self.heads_m, &self.flows_m3s);

        let mut heads = self.heads_m.clone();
        let mut flows = self.flows_m3s.clone();

        let mut iterations = 0;
        let mut max_node_residual;
        loop {
            let branch_new = eval_branches(self, &heads, boundaries);
            let inflows_new = node_inflows(self, &flows, &branch_new);
            let balances_new = segment_balances(self, &heads, &flows);

            let mut residual = DVector::zeros(n_unknowns);
            max_node_residual = 0.0f64;
            let mut max_segment_residual = 0.0f64;
            for node in 0..self.node_count() {
                if let Some(row) = self.node_unknown(node) {
                    let g = self.node_capacitance(node) * (heads[node] - self.heads_m[node])
                        / dt_s
                        - 0.5 * (inflows_new[node] + inflows_old[node]);
                    residual[row] = g;
                    max_node_residual = max_node_residual.max(g.abs());
                }
            }
            for (b, seg) in self.segments().iter().enumerate() {
                let g = seg.inertance * (flows[b] - self.flows_m3s[b]) / dt_s
                    - 0.5 * (balances_new[b] + balances_old[b]);
                residual[n_heads + b] = g;
                max_segment_residual = max_segment_residual.max(g.abs());
            }

            if max_node_residual < TOL_NODE_M3S && max_segment_residual < TOL_SEGMENT_M {
                break;
            }
            if iterations >= MAX_ITERATIONS {
                return Err(SolveError::NoConvergence {
                    context: "transient step",
                    residual: max_node_residual.max(max_segment_residual),
                    iterations,
                });
            }
            iterations += 1;

            let mut jacobian = DMatrix::zeros(n_unknowns, n_unknowns);
            for node in 0..self.node_count() {
                if let Some(row) = self.node_unknown(node) {
                    jacobian[(row, row)] += self.node_capacitance(node) / dt_s;
                }
            }
            for (b, seg) in self.segments().iter().enumerate() {
                let col_q = n_heads + b;
                if let Some(row) = self.node_unknown(seg.from) {
                    jacobian[(row, col_q)] += 0.5;
                }
                if let Some(row) = self.node_unknown(seg.to) {
                    jacobian[(row, col_q)] -= 0.5;
                }
                let row = n_heads + b;
                jacobian[(row, row)] =
                    seg.inertance / dt_s + seg.resistance * flows[b].abs();
                if let Some(col) = self.node_unknown(seg.from) {
                    jacobian[(row, col)] = -0.5;
                }
                if let Some(col) = self.node_unknown(seg.to) {
                    jacobian[(row, col)] = 0.5;
                }
            }
            for (branch, eval) in self.branches.iter().zip(&branch_new) {
                let half_dq = 0.5 * eval.dq_ddh;
                let from = self.node_unknown(branch.from);
                let to = self.node_unknown(branch.to);
                if let Some(row) = from {
                    jacobian[(row, row)] += half_dq;
                    if let Some(col) = to {
                        jacobian[(row, col)] -= half_dq;
                    }
                }
                if let Some(row) = to {
                    jacobian[(row, row)] += half_dq;
                    if let Some(col) = from {
                        jacobian[(row, col)] -= half_dq;
                    }
                }
            }

            let delta = jacobian
                .lu()
                .solve(&(-&residual))
                .ok_or(SolveError::NonFinite {
                    context: "transient step",
                })?;
            let mut col = 0;
            for (node, head) in heads.iter_mut().enumerate() {
                if self.node_unknown(node).is_some() {
                    *head += delta[col];
                    col += 1;
                }
            }
            for (b, q) in flows.iter_mut().enumerate() {
                *q += delta[n_heads + b];
            }
            if heads.iter().chain(flows.iter()).any(|v| !v.is_finite()) {
                return Err(SolveError::NonFinite {
                    context: "transient step",
                });
            }
        }

        self.heads_m = heads;
        self.flows_m3s = flows;
        self.check_tank_levels()?;

        let machines = self.machine_conditions(boundaries);
        let extrapolated = machines.iter().any(|m| m.extrapolated);
        Ok(StepReport {
            newton_iterations: iterations,
            max_continuity_residual_m3s: max_node_residual,
            machines,
            extrapolated,
        })
    }
}
