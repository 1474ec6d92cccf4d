//! Error norms, convergence rates, discrete divergence measures and the time-series log.

use std::io::Write;
use std::path::Path;

use crate::error::{Result, SolverError};
use crate::grid::{DoFField, SIMPSON};
use crate::physics::{conserved_of_primitive, ConservedState, GasModel, PrimitiveState, MAG, NVARS};
use crate::scheme::cell_divergence_table;

/// L1 errors per conserved variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct L1Errors {
    /// `sum |u_bar - exact cell mean| dx dy` over cells.
    pub avg: [f64; NVARS],
    /// Mean absolute point-value error times the domain area.
    pub point: [f64; NVARS],
}

/// L1 errors of a field against `exact(x, y)`; cell means of the exact solution use 3x3 Simpson.
pub fn l1_error(field: &DoFField, exact: &dyn Fn(f64, f64) -> PrimitiveState, gas: GasModel) -> L1Errors {
    let mesh = *field.mesh();
    let cons = |i: isize, j: isize| conserved_of_primitive(&exact(mesh.node_x(i), mesh.node_y(j)), gas);
    let mut avg = [0.0; NVARS];
    for (i, j) in field.cells() {
        let mut mean = ConservedState::ZERO;
        for (m, wm) in SIMPSON.iter().enumerate() {
            for (l, wl) in SIMPSON.iter().enumerate() {
                mean += cons(2 * i + l as isize, 2 * j + m as isize) * (wl * wm);
            }
        }
        let u = field.avg(i, j);
        for k in 0..NVARS {
            avg[k] += (u[k] - mean[k]).abs();
        }
    }
    let mut point = [0.0; NVARS];
    let mut count = 0usize;
    for (i, j) in field.dof_nodes() {
        let e = cons(i, j);
        let u = field.node(i, j);
        for k in 0..NVARS {
            point[k] += (u[k] - e[k]).abs();
        }
        count += 1;
    }
    let area = mesh.dx * mesh.dy;
    let domain = mesh.area();
    for k in 0..NVARS {
        avg[k] *= area;
        point[k] *= domain / count as f64;
    }
    L1Errors { avg, point }
}

/// Quadrature of `|div B|` over the 3x3 Simpson nodes of every cell. Centers must be recovered.
pub fn divergence_measure_1(field: &DoFField) -> f64 {
    let area = field.mesh().dx * field.mesh().dy;
    let mut sum = 0.0;
    for (i, j) in field.cells() {
        let t = cell_divergence_table(field, i, j);
        for (m, row) in t.iter().enumerate() {
            for (l, d) in row.iter().enumerate() {
                sum += d.abs() * SIMPSON[l] * SIMPSON[m];
            }
        }
    }
    sum * area
}

/// Edge-Simpson circulation of `B . n` per cell, summed as `|...| / 6 * dx dy`.
pub fn divergence_measure_2(field: &DoFField) -> f64 {
    let area = field.mesh().dx * field.mesh().dy;
    let mut sum = 0.0;
    for (i, j) in field.cells() {
        let (a, b) = (2 * i, 2 * j);
        let b1 = |p: isize, q: isize| field.node(p, q)[MAG];
        let b2 = |p: isize, q: isize| field.node(p, q)[MAG + 1];
        let right = b1(a + 2, b) + 4.0 * b1(a + 2, b + 1) + b1(a + 2, b + 2);
        let left = b1(a, b) + 4.0 * b1(a, b + 1) + b1(a, b + 2);
        let top = b2(a, b + 2) + 4.0 * b2(a + 1, b + 2) + b2(a + 2, b + 2);
        let bottom = b2(a, b) + 4.0 * b2(a + 1, b) + b2(a + 2, b);
        sum += (right - left + top - bottom).abs() / 6.0;
    }
    sum * area
}

/// Smallest density and pressure over all averages and point values.
pub fn min_rho_p(field: &DoFField, gas: GasModel) -> (f64, f64) {
    let mut out = (f64::INFINITY, f64::INFINITY);
    let mut see = |u: &ConservedState| {
        out.0 = out.0.min(u.rho());
        out.1 = out.1.min(u.pressure(gas));
    };
    for (i, j) in field.cells() {
        see(field.avg(i, j));
    }
    for (i, j) in field.dof_nodes() {
        see(field.node(i, j));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub error: f64,
    /// Rate against the previous (coarser) row.
    pub rate: Option<f64>,
}

/// Observed rates `log(e1 / e2) / log(h1 / h2)` between successive rows.
pub fn convergence_table(rows: &[(f64, f64)]) -> Result<Vec<ConvergenceRow>> {
    if rows.is_empty() {
        return Err(SolverError::DegenerateInput("empty convergence table".into()));
    }
    for (k, &(h, e)) in rows.iter().enumerate() {
        if !(h > 0.0 && e > 0.0 && h.is_finite() && e.is_finite()) {
            return Err(SolverError::DegenerateInput(format!("row {k}: h = {h}, error = {e}")));
        }
        if k > 0 && h >= rows[k - 1].0 {
            return Err(SolverError::DegenerateInput("mesh sizes must decrease".into()));
        }
    }
    Ok(rows
        .iter()
        .enumerate()
        .map(|(k, &(h, error))| ConvergenceRow {
            h,
            error,
            rate: (k > 0).then(|| (rows[k - 1].1 / error).ln() / (rows[k - 1].0 / h).ln()),
        })
        .collect())
}

/// One sample of the time series.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub div1: f64,
    pub div2: f64,
    pub min_rho: f64,
    pub min_p: f64,
    pub mass: f64,
    pub sensor_active: usize,
    pub pp_active: usize,
    pub retry_count: usize,
}

impl DiagnosticsRow {
    /// Sample a prepared field (centers recovered).
    pub fn sample(field: &DoFField, t: f64, gas: GasModel) -> Self {
        let (min_rho, min_p) = min_rho_p(field, gas);
        DiagnosticsRow {
            t,
            div1: divergence_measure_1(field),
            div2: divergence_measure_2(field),
            min_rho,
            min_p,
            mass: field.total_mass(),
            ..Default::default()
        }
    }
}

pub const DIAGNOSTICS_HEADER: &str = "t,div1,div2,min_rho,min_p,mass,sensor_active,pp_active,retry_count";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsRecord {
    pub rows: Vec<DiagnosticsRow>,
}

impl DiagnosticsRecord {
    pub fn push(&mut self, row: DiagnosticsRow) {
        debug_assert!(self.rows.last().map_or(true, |r| r.t <= row.t));
        self.rows.push(row);
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{DIAGNOSTICS_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}",
                r.t, r.div1, r.div2, r.min_rho, r.min_p, r.mass, r.sensor_active, r.pp_active, r.retry_count
            )?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(f)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let header = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
        if header != DIAGNOSTICS_HEADER {
            return Err(SolverError::Config(format!("unexpected diagnostics header `{header}`")));
        }
        let mut rows = vec![];
        for rec in rdr.records() {
            let rec = rec?;
            let f = |k: usize| -> Result<f64> {
                rec[k].parse().map_err(|e| SolverError::Config(format!("bad number `{}`: {e}", &rec[k])))
            };
            let n = |k: usize| -> Result<usize> {
                rec[k].parse().map_err(|e| SolverError::Config(format!("bad count `{}`: {e}", &rec[k])))
            };
            rows.push(DiagnosticsRow {
                t: f(0)?,
                div1: f(1)?,
                div2: f(2)?,
                min_rho: f(3)?,
                min_p: f(4)?,
                mass: f(5)?,
                sensor_active: n(6)?,
                pp_active: n(7)?,
                retry_count: n(8)?,
            });
        }
        Ok(DiagnosticsRecord { rows })
    }
}
