//! Lumped-parameter waterway networks.
//!
//! Pipes are discretised into `n` segments; each segment carries one
//! discharge state through a hydraulic inertance `L = l / (g A)` and
//! contributes half of its compliance `C = g A l / a^2` to each end node.
//! Node heads are the complementary states: `C_i dH_i/dt = sum of inflows`.
//! Open surge tanks add their free-surface area to the node compliance
//! (or, when throttled, become their own storage node behind an orifice).
//! Reservoirs pin node heads; valves and machines are algebraic branches
//! whose discharge depends on the head difference across them.

use std::collections::BTreeMap;

use crate::machine::{MachineCharacteristic, MachineMode};

use super::{BuildError, SolveError};

/// Geometry of one pipe (pressurised conduit).
#[derive(Debug, Clone, Copy)]
pub struct PipeGeometry {
    pub length_m: f64,
    pub diameter_m: f64,
    pub wave_speed_ms: f64,
    /// Darcy-Weisbach friction factor (dimensionless, >= 0).
    pub friction_factor: f64,
    pub n_segments: usize,
}

impl PipeGeometry {
    pub fn area_m2(&self) -> f64 {
        std::f64::consts::PI * self.diameter_m * self.diameter_m / 4.0
    }
}

/// Geometry of a surge tank. Levels are measured above `base_elevation_m`;
/// the water surface sits at head `base_elevation_m + level`.
#[derive(Debug, Clone, Copy)]
pub struct TankGeometry {
    pub cross_section_m2: f64,
    pub base_elevation_m: f64,
    pub min_level_m: f64,
    pub max_level_m: f64,
    /// Orifice loss coefficient `dH = k * Q |Q|` (s^2/m^5); `None` = open.
    pub throttle_k: Option<f64>,
}

#[derive(Debug, Clone)]
struct Node {
    capacitance_m2: f64,
    fixed_head_m: Option<f64>,
    /// Column in the unknown vector; `None` for fixed-head nodes.
    unknown: Option<usize>,
}

#[derive(Debug, Clone)]
pub(super) struct Segment {
    pub(super) from: usize,
    pub(super) to: usize,
    /// Hydraulic inertance l / (g A) (s^2/m^2).
    pub(super) inertance: f64,
    /// Friction coefficient: head loss = r * Q |Q| (s^2/m^5).
    pub(super) resistance: f64,
}

#[derive(Debug, Clone)]
pub(super) enum BranchKind {
    Valve {
        /// Flow coefficient: Q = y * k_v * sqrt(dH) (m^2.5/s).
        k_v: f64,
        /// Index into the valve opening array.
        slot: usize,
    },
    Machine {
        machine: usize,
    },
    Throttle {
        /// Orifice: dH = k * Q |Q|, inverted as Q = sqrt(dH / k).
        k: f64,
    },
}

#[derive(Debug, Clone)]
pub(super) struct AlgebraicBranch {
    pub from: usize,
    pub to: usize,
    pub kind: BranchKind,
}

#[derive(Debug, Clone)]
struct Tank {
    id: String,
    node: usize,
    geometry: TankGeometry,
}

#[derive(Debug, Clone)]
struct MachineSlot {
    id: String,
    from: usize,
    to: usize,
}

/// Per-step boundary condition of one machine: quadrant, shaft speed and
/// opening are frozen while the waterway is advanced.
#[derive(Clone, Copy)]
pub enum MachineBoundary<'a> {
    Coupled {
        characteristic: &'a MachineCharacteristic,
        mode: MachineMode,
        n_rpm: f64,
        y: f64,
    },
    /// Runner in air (condenser operation or dewatered standstill).
    Dewatered,
}

/// Hydraulic state of one machine after a solve.
#[derive(Debug, Clone, Copy)]
pub struct MachineCondition {
    pub discharge_m3s: f64,
    pub head_net_m: f64,
    pub torque_nm: f64,
    pub extrapolated: bool,
}

/// Smoothed signed square root: `s(x) ~ sign(x) sqrt(|x|)` for `|x| >> eps`,
/// differentiable at the origin.
pub(super) fn signed_sqrt(x: f64, eps: f64) -> (f64, f64) {
    let m = (x * x + eps * eps).sqrt();
    let root = m.sqrt();
    let value = x / root;
    let derivative = (1.0 - x * x / (2.0 * m * m)) / root;
    (value, derivative)
}

pub struct Network {
    nodes: Vec<Node>,
    segments: Vec<Segment>,
    pub(super) branches: Vec<AlgebraicBranch>,
    tanks: Vec<Tank>,
    machines: Vec<MachineSlot>,
    junction_index: BTreeMap<String, usize>,
    machine_index: BTreeMap<String, usize>,
    /// Pipe id to the index of its first segment.
    pipe_index: BTreeMap<String, usize>,
    valve_branch: BTreeMap<String, usize>,
    valve_opening: Vec<f64>,
    /// Smallest segment acoustic travel time (s); the solver step must not
    /// exceed it for the lumped discretisation to stay consistent.
    min_travel_time_s: f64,
    n_unknown_heads: usize,
    // State.
    pub(super) heads_m: Vec<f64>,
    pub(super) flows_m3s: Vec<f64>,
}

/// Builder resolving string ids into the index-based runtime network.
pub struct NetworkBuilder {
    junctions: BTreeMap<String, usize>,
    element_ids: BTreeMap<String, &'static str>,
    nodes: Vec<Node>,
    segments: Vec<Segment>,
    branches: Vec<AlgebraicBranch>,
    tanks: Vec<Tank>,
    machines: Vec<MachineSlot>,
    pipe_index: BTreeMap<String, usize>,
    valve_branch: BTreeMap<String, usize>,
    reservoir_junctions: Vec<usize>,
    min_travel_time_s: f64,
}

impl Default for NetworkBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self {
            junctions: BTreeMap::new(),
            element_ids: BTreeMap::new(),
            nodes: Vec::new(),
            segments: Vec::new(),
            branches: Vec::new(),
            tanks: Vec::new(),
            machines: Vec::new(),
            pipe_index: BTreeMap::new(),
            valve_branch: BTreeMap::new(),
            reservoir_junctions: Vec::new(),
            min_travel_time_s: f64::INFINITY,
        }
    }

    fn junction(&mut self, name: &str) -> usize {
        if let Some(&idx) = self.junctions.get(name) {
            return idx;
        }
        let idx = self.nodes.len();
        self.nodes.push(Node {
            capacitance_m2: 0.0,
            fixed_head_m: None,
            unknown: None,
        });
        self.junctions.insert(name.to_string(), idx);
        idx
    }

    fn claim_id(&mut self, id: &str, kind: &'static str) -> Result<(), BuildError> {
        if self.element_ids.insert(id.to_string(), kind).is_some() {
            return Err(BuildError::DuplicateId { id: id.to_string() });
        }
        Ok(())
    }

    pub fn add_reservoir(
        &mut self,
        id: &str,
        junction: &str,
        elevation_m: f64,
    ) -> Result<(), BuildError> {
        self.claim_id(id, "reservoir")?;
        let node = self.junction(junction);
        if self.nodes[node].fixed_head_m.is_some() {
            return Err(BuildError::Conflict {
                id: id.to_string(),
                message: format!("junction `{junction}` already has a fixed head"),
            });
        }
        self.nodes[node].fixed_head_m = Some(elevation_m);
        self.reservoir_junctions.push(node);
        Ok(())
    }

    pub fn add_pipe(
        &mut self,
        id: &str,
        from: &str,
        to: &str,
        geometry: PipeGeometry,
    ) -> Result<(), BuildError> {
        self.claim_id(id, "pipe")?;
        if geometry.n_segments == 0
            || geometry.length_m <= 0.0
            || geometry.diameter_m <= 0.0
            || geometry.wave_speed_ms <= 0.0
            || geometry.friction_factor < 0.0
        {
            return Err(BuildError::BadGeometry {
                id: id.to_string(),
                message: "pipe needs positive length, diameter, wave speed, \
                          at least one segment and non-negative friction"
                    .into(),
            });
        }
        let area = geometry.area_m2();
        let l_seg = geometry.length_m / geometry.n_segments as f64;
        let inertance = l_seg / (crate::GRAVITY * area);
        let compliance = crate::GRAVITY * area * l_seg
            / (geometry.wave_speed_ms * geometry.wave_speed_ms);
        let resistance = geometry.friction_factor * l_seg
            / (2.0 * crate::GRAVITY * geometry.diameter_m * area * area);
        self.min_travel_time_s = self
            .min_travel_time_s
            .min(l_seg / geometry.wave_speed_ms);

        self.pipe_index.insert(id.to_string(), self.segments.len());
        let start = self.junction(from);
        let end = self.junction(to);
        let mut prev = start;
        for k in 0..geometry.n_segments {
            let next = if k + 1 == geometry.n_segments {
                end
            } else {
                let idx = self.nodes.len();
                self.nodes.push(Node {
                    capacitance_m2: 0.0,
                    fixed_head_m: None,
                    unknown: None,
                });
                idx
            };
            self.nodes[prev].capacitance_m2 += compliance / 2.0;
            self.nodes[next].capacitance_m2 += compliance / 2.0;
            self.segments.push(Segment {
                from: prev,
                to: next,
                inertance,
                resistance,
            });
            prev = next;
        }
        Ok(())
    }

    pub fn add_surge_tank(
        &mut self,
        id: &str,
        junction: &str,
        geometry: TankGeometry,
    ) -> Result<(), BuildError> {
        self.claim_id(id, "surge_tank")?;
        if geometry.cross_section_m2 <= 0.0 || geometry.max_level_m <= geometry.min_level_m {
            return Err(BuildError::BadGeometry {
                id: id.to_string(),
                message: "tank needs a positive cross-section and max_level > min_level".into(),
            });
        }
        let junction_node = self.junction(junction);
        let node = match geometry.throttle_k {
            None => {
                self.nodes[junction_node].capacitance_m2 += geometry.cross_section_m2;
                junction_node
            }
            Some(k) => {
                if k <= 0.0 {
                    return Err(BuildError::BadGeometry {
                        id: id.to_string(),
                        message: "throttle coefficient must be positive".into(),
                    });
                }
                let idx = self.nodes.len();
                self.nodes.push(Node {
                    capacitance_m2: geometry.cross_section_m2,
                    fixed_head_m: None,
                    unknown: None,
                });
                self.branches.push(AlgebraicBranch {
                    from: junction_node,
                    to: idx,
                    kind: BranchKind::Throttle { k },
                });
                idx
            }
        };
        self.tanks.push(Tank {
            id: id.to_string(),
            node,
            geometry,
        });
        Ok(())
    }

    /// A valve discharging either into another junction or to a fixed level
    /// (tailwater / free discharge).
    pub fn add_valve(
        &mut self,
        id: &str,
        from: &str,
        to_junction: Option<&str>,
        discharge_elevation_m: Option<f64>,
        k_v: f64,
    ) -> Result<(), BuildError> {
        self.claim_id(id, "valve")?;
        if k_v <= 0.0 {
            return Err(BuildError::BadGeometry {
                id: id.to_string(),
                message: "valve flow coefficient must be positive".into(),
            });
        }
        let from_node = self.junction(from);
        let to_node = match (to_junction, discharge_elevation_m) {
            (Some(name), None) => self.junction(name),
            (None, Some(elev)) => {
                let idx = self.nodes.len();
                self.nodes.push(Node {
                    capacitance_m2: 0.0,
                    fixed_head_m: Some(elev),
                    unknown: None,
                });
                idx
            }
            _ => {
                return Err(BuildError::BadGeometry {
                    id: id.to_string(),
                    message: "valve needs exactly one of `to` or `discharge_elevation_m`".into(),
                })
            }
        };
        let slot = self.valve_branch.len();
        self.valve_branch.insert(id.to_string(), slot);
        self.branches.push(AlgebraicBranch {
            from: from_node,
            to: to_node,
            kind: BranchKind::Valve { k_v, slot },
        });
        Ok(())
    }

    /// Machine boundary between its penstock-side and draft-side junctions.
    /// Returns the machine slot index used to pass boundaries to the solver.
    pub fn add_machine(&mut self, id: &str, from: &str, to: &str) -> Result<usize, BuildError> {
        self.claim_id(id, "machine")?;
        let from_node = self.junction(from);
        let to_node = self.junction(to);
        let slot = self.machines.len();
        self.branches.push(AlgebraicBranch {
            from: from_node,
            to: to_node,
            kind: BranchKind::Machine { machine: slot },
        });
        self.machines.push(MachineSlot {
            id: id.to_string(),
            from: from_node,
            to: to_node,
        });
        Ok(slot)
    }

    pub fn build(mut self) -> Result<Network, BuildError> {
        if self.reservoir_junctions.is_empty() {
            return Err(BuildError::NoReservoir);
        }
        // Storage check: every free junction needs compliance, otherwise its
        // head has no state and the formulation degenerates.
        for (name, &idx) in &self.junctions {
            let node = &self.nodes[idx];
            if node.fixed_head_m.is_none() && node.capacitance_m2 <= 0.0 {
                return Err(BuildError::DanglingJunction { name: name.clone() });
            }
        }
        // Connectivity: every node must reach a reservoir through branches.
        let n = self.nodes.len();
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
        for seg in &self.segments {
            adjacency[seg.from].push(seg.to);
            adjacency[seg.to].push(seg.from);
        }
        for branch in &self.branches {
            adjacency[branch.from].push(branch.to);
            adjacency[branch.to].push(branch.from);
        }
        let mut reached = vec![false; n];
        let mut stack = self.reservoir_junctions.clone();
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut reached[i], true) {
                continue;
            }
            stack.extend(adjacency[i].iter().copied().filter(|&j| !reached[j]));
        }
        if let Some((name, _)) = self
            .junctions
            .iter()
            .find(|(_, &idx)| !reached[idx])
        {
            return Err(BuildError::Disconnected { name: name.clone() });
        }

        // Assign unknown columns to free nodes.
        let mut n_unknown = 0;
        for node in &mut self.nodes {
            if node.fixed_head_m.is_none() {
                node.unknown = Some(n_unknown);
                n_unknown += 1;
            }
        }

        let heads = self
            .nodes
            .iter()
            .map(|node| node.fixed_head_m.unwrap_or(0.0))
            .collect();
        let machine_index = self
            .machines
            .iter()
            .enumerate()
            .map(|(i, m)| (m.id.clone(), i))
            .collect();
        let n_segments = self.segments.len();
        let valve_count = self
            .branches
            .iter()
            .filter(|b| matches!(b.kind, BranchKind::Valve { .. }))
            .count();
        Ok(Network {
            nodes: self.nodes,
            segments: self.segments,
            branches: self.branches,
            tanks: self.tanks,
            machines: self.machines,
            junction_index: self.junctions,
            machine_index,
            pipe_index: self.pipe_index,
            valve_branch: self.valve_branch,
            valve_opening: vec![1.0; valve_count],
            min_travel_time_s: self.min_travel_time_s,
            n_unknown_heads: n_unknown,
            heads_m: heads,
            flows_m3s: vec![0.0; n_segments],
        })
    }
}

/// Regularisation width for the valve/orifice square-root laws (m).
pub(super) const SQRT_EPS_M: f64 = 1.0e-6;

impl Network {
    pub fn machine_count(&self) -> usize {
        self.machines.len()
    }

    pub fn machine_slot(&self, id: &str) -> Option<usize> {
        self.machine_index.get(id).copied()
    }

    pub fn junction_head_m(&self, name: &str) -> Option<f64> {
        self.junction_index.get(name).map(|&i| self.heads_m[i])
    }

    pub fn tank_level_m(&self, id: &str) -> Option<f64> {
        self.tanks
            .iter()
            .find(|t| t.id == id)
            .map(|t| self.heads_m[t.node] - t.geometry.base_elevation_m)
    }

    /// Discharge through the first segment of the named pipe (m^3/s,
    /// positive in the pipe's `from -> to` direction).
    pub fn pipe_discharge_m3s(&self, id: &str) -> Option<f64> {
        self.pipe_index.get(id).map(|&seg| self.flows_m3s[seg])
    }

    pub fn min_travel_time_s(&self) -> f64 {
        self.min_travel_time_s
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_unknown_heads + self.segments.len()
    }

    pub(super) fn n_unknown_heads(&self) -> usize {
        self.n_unknown_heads
    }

    pub(super) fn node_unknown(&self, node: usize) -> Option<usize> {
        self.nodes[node].unknown
    }

    pub(super) fn node_capacitance(&self, node: usize) -> f64 {
        self.nodes[node].capacitance_m2
    }

    pub(super) fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub(super) fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub(super) fn machine_nodes(&self, slot: usize) -> (usize, usize) {
        (self.machines[slot].from, self.machines[slot].to)
    }

    pub(super) fn machine_id(&self, slot: usize) -> &str {
        &self.machines[slot].id
    }

    /// Set a valve opening in [0, 1]. Unknown ids are a caller bug.
    pub fn set_valve_opening(&mut self, id: &str, y: f64) {
        let slot = *self
            .valve_branch
            .get(id)
            .unwrap_or_else(|| panic!("unknown valve `{id}`"));
        self.valve_opening[slot] = y.clamp(0.0, 1.0);
    }

    /// Uniform hydrostatic initial condition (testing convenience).
    pub fn initialize_hydrostatic(&mut self, head_m: f64) {
        for (i, node) in self.nodes.iter().enumerate() {
            self.heads_m[i] = node.fixed_head_m.unwrap_or(head_m);
        }
        self.flows_m3s.fill(0.0);
    }

    /// Discharge and head-difference sensitivity of an algebraic branch at
    /// the given head difference.
    pub(super) fn branch_flow(
        &self,
        branch: &AlgebraicBranch,
        dh: f64,
        boundaries: &[MachineBoundary<'_>],
    ) -> (f64, f64, bool) {
        match &branch.kind {
            BranchKind::Valve { k_v, slot } => {
                let y = self.valve_opening[*slot];
                let (s, ds) = signed_sqrt(dh, SQRT_EPS_M);
                (y * k_v * s, y * k_v * ds, false)
            }
            BranchKind::Throttle { k } => {
                let (s, ds) = signed_sqrt(dh, SQRT_EPS_M);
                let scale = 1.0 / k.sqrt();
                (scale * s, scale * ds, false)
            }
            BranchKind::Machine { machine } => match boundaries[*machine] {
                MachineBoundary::Dewatered => (0.0, 0.0, false),
                MachineBoundary::Coupled {
                    characteristic,
                    mode,
                    n_rpm,
                    y,
                } => {
                    let op = characteristic.operating_point(mode, n_rpm, dh, y);
                    (op.discharge_m3s, op.dq_dh, op.extrapolated)
                }
            },
        }
    }

    /// Check all tank levels against their bounds; first offender errors.
    pub(super) fn check_tank_levels(&self) -> Result<(), SolveError> {
        for tank in &self.tanks {
            let level = self.heads_m[tank.node] - tank.geometry.base_elevation_m;
            if level < tank.geometry.min_level_m || level > tank.geometry.max_level_m {
                return Err(SolveError::TankLevelOutOfRange {
                    id: tank.id.clone(),
                    level_m: level,
                    min_m: tank.geometry.min_level_m,
                    max_m: tank.geometry.max_level_m,
                });
            }
        }
        Ok(())
    }

    /// Evaluate machine conditions (discharge, net head, torque) at the
    /// current network state.
    pub fn machine_conditions(
        &self,
        boundaries: &[MachineBoundary<'_>],
    ) -> Vec<MachineCondition> {
        self.machines
            .iter()
            .enumerate()
            .map(|(slot, m)| {
                let dh = self.heads_m[m.from] - self.heads_m[m.to];
                match boundaries[slot] {
                    MachineBoundary::Dewatered => MachineCondition {
                        discharge_m3s: 0.0,
                        head_net_m: dh,
                        torque_nm: 0.0,
                        extrapolated: false,
                    },
                    MachineBoundary::Coupled {
                        characteristic,
                        mode,
                        n_rpm,
                        y,
                    } => {
                        let op = characteristic.operating_point(mode, n_rpm, dh, y);
                        MachineCondition {
                            discharge_m3s: op.discharge_m3s,
                            head_net_m: dh,
                            torque_nm: op.torque_nm,
                            extrapolated: op.extrapolated,
                        }
                    }
                }
            })
            .collect()
    }
}
