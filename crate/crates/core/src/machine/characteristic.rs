//! Quasi-static machine characteristics ("hill charts").
//!
//! A characteristic maps a per-unit operating point (speed `n_pu`, net head
//! `h_pu`, guide vane opening `y_pu`) to per-unit discharge `q_pu` and shaft
//! torque `t_pu` by trilinear interpolation on a regular grid.  Reversible
//! machines carry two quadrant tables: the turbine quadrant (`q >= 0`,
//! `t >= 0` apart from windage) and the pump quadrant (`q < 0`, `t < 0`).
//!
//! Per-unit conventions:
//! * `n_pu = n / n_ref`, `h_pu = H_net / h_ref`, `y_pu` in `[0, 1]`;
//! * `q_pu = Q / q_ref`;
//! * `t_pu = T * omega_ref / p_ref` with `p_ref = rho * g * q_ref * h_ref`,
//!   so that `p_pu = t_pu * n_pu`.
//!
//! CSV grids use the long format `n_pu,h_pu,y_pu,q_pu,t_pu`; rows with
//! negative `n_pu` populate the pump quadrant (stored internally over the
//! positive speed axis with negative `q`/`t` values).

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{GRAVITY, WATER_DENSITY};

#[derive(Debug, Error)]
pub enum CharacteristicError {
    #[error("characteristic file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("characteristic file {path}, record {record}: {message}")]
    Format {
        path: String,
        record: usize,
        message: String,
    },
    #[error("characteristic grid is incomplete: expected {expected} points, found {found}")]
    IncompleteGrid { expected: usize, found: usize },
    #[error("duplicate grid point (n={n}, h={h}, y={y})")]
    DuplicatePoint { n: f64, h: f64, y: f64 },
    #[error("grid axis {axis} must hold at least one point")]
    EmptyAxis { axis: &'static str },
    #[error("turbine quadrant is missing")]
    MissingTurbineQuadrant,
    #[error("discharge not monotone in opening at n_pu={n}, h_pu={h}")]
    NotMonotoneInOpening { n: f64, h: f64 },
    #[error("closed-gate row violates windage convention at n_pu={n}, h_pu={h}: q={q}, t={t}")]
    ClosedGateConvention { n: f64, h: f64, q: f64, t: f64 },
    #[error("reference value {name} must be positive, got {value}")]
    BadReference { name: &'static str, value: f64 },
}

/// Physical reference values that scale the per-unit tables.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct References {
    pub n_ref_rpm: f64,
    pub h_ref_m: f64,
    pub q_ref_m3s: f64,
}

impl References {
    pub fn validate(&self) -> Result<(), CharacteristicError> {
        for (name, value) in [
            ("n_ref_rpm", self.n_ref_rpm),
            ("h_ref_m", self.h_ref_m),
            ("q_ref_m3s", self.q_ref_m3s),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(CharacteristicError::BadReference { name, value });
            }
        }
        Ok(())
    }

    /// Reference hydraulic power rho*g*Q_ref*H_ref (W).
    pub fn p_ref_w(&self) -> f64 {
        WATER_DENSITY * GRAVITY * self.q_ref_m3s * self.h_ref_m
    }

    pub fn omega_ref_rad_s(&self) -> f64 {
        self.n_ref_rpm * std::f64::consts::PI / 30.0
    }

    /// Reference torque consistent with `p_pu = t_pu * n_pu` (N*m).
    pub fn t_ref_nm(&self) -> f64 {
        self.p_ref_w() / self.omega_ref_rad_s()
    }
}

/// One quadrant: values on a regular (n, h, y) grid, axes strictly increasing.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuadrantTable {
    n_axis: Vec<f64>,
    h_axis: Vec<f64>,
    y_axis: Vec<f64>,
    /// Discharge values, index layout `(i_n * len_h + i_h) * len_y + i_y`.
    q: Vec<f64>,
    /// Torque values, same layout as `q`.
    t: Vec<f64>,
}

/// Interpolated per-unit sample with cell-local gradients.
#[derive(Debug, Clone, Copy)]
pub struct TableSample {
    pub q: f64,
    pub t: f64,
    pub dq_dn: f64,
    pub dq_dh: f64,
    pub dq_dy: f64,
    pub dt_dn: f64,
    pub dt_dh: f64,
    pub dt_dy: f64,
    /// True when the query point was clamped onto the grid hull.
    pub extrapolated: bool,
}

/// Locate the cell for `x` on `axis` and the fractional position inside it.
/// Values outside the hull continue the boundary cell's plane (the fraction
/// runs past [0, 1]) and raise the flag; a vanishing surface slope out there
/// would blind the hydraulic Newton solves to head changes.
fn locate(axis: &[f64], x: f64) -> (usize, f64, f64, bool) {
    let len = axis.len();
    if len == 1 {
        // Degenerate axis: constant along this dimension.
        let out = (x - axis[0]).abs() > 1e-12 * axis[0].abs().max(1.0);
        return (0, 0.0, 1.0, out);
    }
    if x <= axis[0] {
        let width = axis[1] - axis[0];
        return (0, (x - axis[0]) / width, width, x < axis[0] - 1e-12 * width);
    }
    if x >= axis[len - 1] {
        let lo = len - 2;
        let width = axis[len - 1] - axis[lo];
        return (lo, (x - axis[lo]) / width, width, x > axis[len - 1] + 1e-12 * width);
    }
    // Binary search for the left edge.
    let mut lo = 0;
    let mut hi = len - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if axis[mid] <= x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let width = axis[lo + 1] - axis[lo];
    ((lo), (x - axis[lo]) / width, width, false)
}

impl QuadrantTable {
    pub fn new(
        n_axis: Vec<f64>,
        h_axis: Vec<f64>,
        y_axis: Vec<f64>,
        q: Vec<f64>,
        t: Vec<f64>,
    ) -> Result<Self, CharacteristicError> {
        for (axis, name) in [(&n_axis, "n"), (&h_axis, "h"), (&y_axis, "y")] {
            if axis.is_empty() {
                return Err(CharacteristicError::EmptyAxis { axis: name });
            }
        }
        let expected = n_axis.len() * h_axis.len() * y_axis.len();
        if q.len() != expected || t.len() != expected {
            return Err(CharacteristicError::IncompleteGrid {
                expected,
                found: q.len().min(t.len()),
            });
        }
        Ok(Self {
            n_axis,
            h_axis,
            y_axis,
            q,
            t,
        })
    }

    fn idx(&self, i_n: usize, i_h: usize, i_y: usize) -> usize {
        (i_n * self.h_axis.len() + i_h) * self.y_axis.len() + i_y
    }

    pub fn n_range(&self) -> (f64, f64) {
        (self.n_axis[0], *self.n_axis.last().unwrap())
    }

    pub fn sample(&self, n: f64, h: f64, y: f64) -> TableSample {
        let (i_n, u, wn, out_n) = locate(&self.n_axis, n);
        let (i_h, v, wh, out_h) = locate(&self.h_axis, h);
        let (i_y, w, wy, out_y) = locate(&self.y_axis, y);

        // Gather the eight cell corners (degenerate axes repeat index 0).
        let n1 = if self.n_axis.len() > 1 { i_n + 1 } else { i_n };
        let h1 = if self.h_axis.len() > 1 { i_h + 1 } else { i_h };
        let y1 = if self.y_axis.len() > 1 { i_y + 1 } else { i_y };

        let interp = |values: &[f64]| -> (f64, f64, f64, f64) {
            let c = |a: usize, b: usize, cc: usize| values[self.idx(a, b, cc)];
            let c000 = c(i_n, i_h, i_y);
            let c100 = c(n1, i_h, i_y);
            let c010 = c(i_n, h1, i_y);
            let c110 = c(n1, h1, i_y);
            let c001 = c(i_n, i_h, y1);
            let c101 = c(n1, i_h, y1);
            let c011 = c(i_n, h1, y1);
            let c111 = c(n1, h1, y1);

            let lerp = |a: f64, b: f64, f: f64| a + (b - a) * f;
            let c00 = lerp(c000, c100, u);
            let c10 = lerp(c010, c110, u);
            let c01 = lerp(c001, c101, u);
            let c11 = lerp(c011, c111, u);
            let c0 = lerp(c00, c10, v);
            let c1 = lerp(c01, c11, v);
            let value = lerp(c0, c1, w);

            // Partial derivatives of the trilinear form, scaled to axis units.
            let d_du = {
                let e00 = c100 - c000;
                let e10 = c110 - c010;
                let e01 = c101 - c001;
                let e11 = c111 - c011;
                lerp(lerp(e00, e10, v), lerp(e01, e11, v), w) / wn
            };
            let d_dv = {
                let e0 = lerp(c010 - c000, c110 - c100, u);
                let e1 = lerp(c011 - c001, c111 - c101, u);
                lerp(e0, e1, w) / wh
            };
            let d_dw = (c1 - c0) / wy;
            (value, d_du, d_dv, d_dw)
        };

        let (q, dq_dn, dq_dh, dq_dy) = interp(&self.q);
        let (t, dt_dn, dt_dh, dt_dy) = interp(&self.t);
        TableSample {
            q,
            t,
            dq_dn,
            dq_dh,
            dq_dy,
            dt_dn,
            dt_dh,
            dt_dy,
            extrapolated: out_n || out_h || out_y,
        }
    }

    /// Monotone discharge and torque in opening, and the closed-gate
    /// convention (`q ~ 0`, `t <= 0` at `y = 0`) when the grid reaches it.
    fn validate_turbine_conventions(&self) -> Result<(), CharacteristicError> {
        let tol = 1e-9;
        for (i_n, &n) in self.n_axis.iter().enumerate() {
            for (i_h, &h) in self.h_axis.iter().enumerate() {
                for i_y in 1..self.y_axis.len() {
                    let q_lo = self.q[self.idx(i_n, i_h, i_y - 1)];
                    let q_hi = self.q[self.idx(i_n, i_h, i_y)];
                    let t_lo = self.t[self.idx(i_n, i_h, i_y - 1)];
                    let t_hi = self.t[self.idx(i_n, i_h, i_y)];
                    if q_hi < q_lo - tol || t_hi < t_lo - tol {
                        return Err(CharacteristicError::NotMonotoneInOpening { n, h });
                    }
                }
                if self.y_axis[0] == 0.0 {
                    let q0 = self.q[self.idx(i_n, i_h, 0)];
                    let t0 = self.t[self.idx(i_n, i_h, 0)];
                    if q0.abs() > 1e-6 || t0 > tol {
                        return Err(CharacteristicError::ClosedGateConvention {
                            n,
                            h,
                            q: q0,
                            t: t0,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Hill-chart surfaces of one machine, scaled by [`References`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MachineCharacteristic {
    pub refs: References,
    turbine: QuadrantTable,
    pump: Option<QuadrantTable>,
}

/// Which quadrant an operating point is evaluated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MachineMode {
    Turbine,
    Pump,
}

/// Interpolated operating point in SI units.
#[derive(Debug, Clone, Copy)]
pub struct OperatingPoint {
    /// Discharge through the machine (m^3/s, negative when pumping).
    pub discharge_m3s: f64,
    /// Shaft torque (N*m, negative when pumping).
    pub torque_nm: f64,
    /// Sensitivity of discharge to net head (m^3/s per m).
    pub dq_dh: f64,
    /// Sensitivity of discharge to opening (m^3/s per unit `y`).
    pub dq_dy: f64,
    /// Sensitivity of discharge to speed (m^3/s per rpm).
    pub dq_dn: f64,
    /// Sensitivity of torque to net head (N*m per m).
    pub dt_dh: f64,
    /// Sensitivity of torque to opening (N*m per unit `y`).
    pub dt_dy: f64,
    /// Sensitivity of torque to speed (N*m per rpm).
    pub dt_dn: f64,
    pub extrapolated: bool,
}

impl MachineCharacteristic {
    pub fn new(
        refs: References,
        turbine: QuadrantTable,
        pump: Option<QuadrantTable>,
    ) -> Result<Self, CharacteristicError> {
        refs.validate()?;
        turbine.validate_turbine_conventions()?;
        Ok(Self {
            refs,
            turbine,
            pump,
        })
    }

    pub fn has_pump_quadrant(&self) -> bool {
        self.pump.is_some()
    }

    /// Speed hull of the requested quadrant, in rpm.
    pub fn speed_hull_rpm(&self, mode: MachineMode) -> (f64, f64) {
        let table = match mode {
            MachineMode::Turbine => &self.turbine,
            MachineMode::Pump => self.pump.as_ref().unwrap_or(&self.turbine),
        };
        let (lo, hi) = table.n_range();
        (lo * self.refs.n_ref_rpm, hi * self.refs.n_ref_rpm)
    }

    /// Evaluate the characteristic at a physical operating point.
    ///
    /// `n_rpm` is the shaft speed magnitude; the quadrant is chosen by
    /// `mode`, not by the sign of the speed.
    pub fn operating_point(
        &self,
        mode: MachineMode,
        n_rpm: f64,
        h_net_m: f64,
        y: f64,
    ) -> OperatingPoint {
        let table = match mode {
            MachineMode::Turbine => &self.turbine,
            MachineMode::Pump => self
                .pump
                .as_ref()
                .expect("pump quadrant requested on a turbine-only machine"),
        };
        let n_pu = n_rpm / self.refs.n_ref_rpm;
        let h_pu = h_net_m / self.refs.h_ref_m;
        let s = table.sample(n_pu, h_pu, y);

        let q_ref = self.refs.q_ref_m3s;
        let t_ref = self.refs.t_ref_nm();
        OperatingPoint {
            discharge_m3s: s.q * q_ref,
            torque_nm: s.t * t_ref,
            dq_dh: s.dq_dh * q_ref / self.refs.h_ref_m,
            dq_dy: s.dq_dy * q_ref,
            dq_dn: s.dq_dn * q_ref / self.refs.n_ref_rpm,
            dt_dh: s.dt_dh * t_ref / self.refs.h_ref_m,
            dt_dy: s.dt_dy * t_ref,
            dt_dn: s.dt_dn * t_ref / self.refs.n_ref_rpm,
            extrapolated: s.extrapolated,
        }
    }

    /// Load a characteristic from a long-format CSV grid.
    ///
    /// Columns: `n_pu,h_pu,y_pu,q_pu,t_pu`.  Rows with `n_pu < 0` form the
    /// pump quadrant; the speed axis is stored as `|n_pu|`.
    pub fn from_csv(path: &Path, refs: References) -> Result<Self, CharacteristicError> {
        let path_str = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(source) => CharacteristicError::Io {
                    path: path_str.clone(),
                    source,
                },
                other => CharacteristicError::Format {
                    path: path_str.clone(),
                    record: 0,
                    message: format!("{other:?}"),
                },
            })?;

        let mut turbine_rows: Vec<[f64; 5]> = Vec::new();
        let mut pump_rows: Vec<[f64; 5]> = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| CharacteristicError::Format {
                path: path_str.clone(),
                record: i + 1,
                message: e.to_string(),
            })?;
            if record.len() != 5 {
                return Err(CharacteristicError::Format {
                    path: path_str.clone(),
                    record: i + 1,
                    message: format!("expected 5 columns, found {}", record.len()),
                });
            }
            let mut row = [0.0f64; 5];
            for (j, field) in record.iter().enumerate() {
                row[j] = field.parse().map_err(|_| CharacteristicError::Format {
                    path: path_str.clone(),
                    record: i + 1,
                    message: format!("cannot parse `{field}` as a number"),
                })?;
            }
            if row[0] < 0.0 {
                row[0] = -row[0];
                pump_rows.push(row);
            } else {
                turbine_rows.push(row);
            }
        }
        if turbine_rows.is_empty() {
            return Err(CharacteristicError::MissingTurbineQuadrant);
        }
        let turbine = table_from_rows(&turbine_rows)?;
        let pump = if pump_rows.is_empty() {
            None
        } else {
            Some(table_from_rows(&pump_rows)?)
        };
        Self::new(refs, turbine, pump)
    }
}

/// Assemble a regular grid from unordered long-format rows.
fn table_from_rows(rows: &[[f64; 5]]) -> Result<QuadrantTable, CharacteristicError> {
    let mut n_axis: Vec<f64> = Vec::new();
    let mut h_axis: Vec<f64> = Vec::new();
    let mut y_axis: Vec<f64> = Vec::new();
    let push_unique = |axis: &mut Vec<f64>, v: f64| {
        if !axis.iter().any(|&a| (a - v).abs() < 1e-12) {
            axis.push(v);
        }
    };
    for row in rows {
        push_unique(&mut n_axis, row[0]);
        push_unique(&mut h_axis, row[1]);
        push_unique(&mut y_axis, row[2]);
    }
    for axis in [&mut n_axis, &mut h_axis, &mut y_axis] {
        axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let expected = n_axis.len() * h_axis.len() * y_axis.len();
    if rows.len() != expected {
        return Err(CharacteristicError::IncompleteGrid {
            expected,
            found: rows.len(),
        });
    }

    let find = |axis: &[f64], v: f64| -> usize {
        axis.iter()
            .position(|&a| (a - v).abs() < 1e-12)
            .expect("axis value collected above")
    };
    let mut q = vec![f64::NAN; expected];
    let mut t = vec![f64::NAN; expected];
    let len_h = h_axis.len();
    let len_y = y_axis.len();
    for row in rows {
        let idx = (find(&n_axis, row[0]) * len_h + find(&h_axis, row[1])) * len_y
            + find(&y_axis, row[2]);
        if !q[idx].is_nan() {
            return Err(CharacteristicError::DuplicatePoint {
                n: row[0],
                h: row[1],
                y: row[2],
            });
        }
        q[idx] = row[3];
        t[idx] = row[4];
    }
    if q.iter().any(|v| v.is_nan()) {
        let found = q.iter().filter(|v| !v.is_nan()).count();
        return Err(CharacteristicError::IncompleteGrid { expected, found });
    }
    QuadrantTable::new(n_axis, h_axis, y_axis, q, t)
}
