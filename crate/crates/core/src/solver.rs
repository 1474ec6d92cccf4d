//! Run orchestration: time loop, output and convergence studies.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, info, warn};

use crate::config::{FieldFormat, RunConfig};
use crate::diagnostics::{convergence_table, l1_error, min_rho_p, ConvergenceRow, DiagnosticsRecord, DiagnosticsRow, L1Errors};
use crate::error::{Location, Result, SolverError};
use crate::grid::{init_dofs, DoFField};
use crate::llf::first_order_ok;
use crate::physics::{GasModel, MAG};
use crate::problems::{build_problem, ProblemSpec};
use crate::scheme::compute_dt;
use crate::stepper::{StageOptions, StepStats, Stepper};

/// Largest number of step-size halvings after a rejected step.
pub const MAX_HALVINGS: u32 = 20;

/// Outcome of one accepted time step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    pub halvings: u32,
    pub stats: StepStats,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub t: f64,
    pub wall_time: f64,
    pub min_rho: f64,
    pub min_p: f64,
    /// DoFs that needed the round-off retry, over the whole run.
    pub retry_count: usize,
    /// Steps in which the round-off retry was used.
    pub retry_steps: usize,
    /// Steps redone with a smaller time step.
    pub rejected_steps: usize,
}

/// A problem on a mesh, advanced in time.
pub struct Simulation {
    pub spec: ProblemSpec,
    pub gas: GasModel,
    pub cfl: f64,
    pub stepper: Stepper,
    field: DoFField,
    pub t: f64,
    pub step: usize,
    pub summary: RunSummary,
}

impl Simulation {
    pub fn new(spec: ProblemSpec, nx: usize, ny: usize, options: StageOptions, cfl: f64) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(SolverError::Config(format!("cfl must lie in (0, 1], got {cfl}")));
        }
        let gas = spec.gas()?;
        let mesh = spec.mesh(nx, ny)?;
        let stepper = Stepper::new(gas, spec.bc.clone(), options)?;
        let mut field = init_dofs(spec.ic.as_ref(), mesh, gas)?;
        stepper.prepare(&mut field, 0.0).map_err(|e| abort(0, 0, 0.0, e))?;
        let (min_rho, min_p) = min_rho_p(&field, gas);
        Ok(Simulation {
            spec,
            gas,
            cfl,
            stepper,
            field,
            t: 0.0,
            step: 0,
            summary: RunSummary { min_rho, min_p, ..Default::default() },
        })
    }

    pub fn from_config(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let spec = build_problem(&config.problem.name, &config.problem.params)?;
        let nx = config.mesh.nx.unwrap_or(spec.default_mesh.0);
        let ny = config.mesh.ny.unwrap_or(spec.default_mesh.1);
        let opts = config.stage_options(spec.kappa);
        let mut sim = Simulation::new(spec, nx, ny, opts, config.solver.cfl)?;
        if let Some(t) = config.solver.t_end {
            sim.spec.t_end = t;
        }
        Ok(sim)
    }

    /// Current field with ghosts filled and centers recovered.
    pub fn field(&self) -> &DoFField {
        &self.field
    }

    pub fn diagnostics(&self, stats: StepStats) -> DiagnosticsRow {
        DiagnosticsRow {
            sensor_active: stats.sensor_active,
            pp_active: stats.pp_active,
            retry_count: stats.retry_count,
            ..DiagnosticsRow::sample(&self.field, self.t, self.gas)
        }
    }

    /// One SSP-RK3 step, clipped so as not to pass `t_end`. A step rejected by the
    /// first-order fallback is redone with half the step size.
    pub fn advance(&mut self, t_end: f64) -> Result<StepReport> {
        let step = self.step;
        let report = compute_dt(&self.field, self.cfl, self.gas).map_err(|e| abort(step, 0, self.t, e))?;
        let mut dt = report.dt.min(t_end - self.t);
        let mut halvings = 0;
        let (next, stats) = loop {
            match self.stepper.ssp_rk3_step(&self.field, self.t, dt, step) {
                Ok(r) => break r,
                Err(e) if matches!(e.root(), SolverError::StepRejected(_)) && halvings < MAX_HALVINGS => {
                    debug!("step {step}: {e}; halving dt = {dt:e}");
                    halvings += 1;
                    dt *= 0.5;
                }
                Err(e) => return Err(e),
            }
        };
        let t_next = if dt == t_end - self.t { t_end } else { self.t + dt };
        let (mut next, mut stats) = (next, stats);
        stats.retry_count += self.stepper.prepare(&mut next, t_next).map_err(|e| abort(step + 1, 0, t_next, e))?;
        if self.stepper.options.pp {
            check_admissible(&next, self.gas).map_err(|e| abort(step, 3, t_next, e))?;
        }
        self.field = next;
        self.t = t_next;
        self.step += 1;
        let (min_rho, min_p) = min_rho_p(&self.field, self.gas);
        let s = &mut self.summary;
        s.steps = self.step;
        s.t = self.t;
        s.min_rho = s.min_rho.min(min_rho);
        s.min_p = s.min_p.min(min_p);
        s.retry_count += stats.retry_count;
        s.retry_steps += usize::from(stats.retry_count > 0);
        s.rejected_steps += usize::from(halvings > 0);
        Ok(StepReport { dt, halvings, stats })
    }

    /// Advance to `t_end`, calling `observe` after every accepted step.
    pub fn run_until(
        &mut self,
        t_end: f64,
        max_steps: Option<usize>,
        mut observe: impl FnMut(&Simulation, &StepReport) -> Result<()>,
    ) -> Result<RunSummary> {
        let start = Instant::now();
        while self.t < t_end {
            if max_steps.is_some_and(|m| self.step >= m) {
                warn!("stopping at the step limit {} (t = {:e})", self.step, self.t);
                break;
            }
            let r = self.advance(t_end)?;
            observe(self, &r)?;
        }
        self.summary.wall_time += start.elapsed().as_secs_f64();
        Ok(self.summary)
    }

    /// Advance to the problem's final time.
    pub fn run(&mut self) -> Result<RunSummary> {
        let t_end = self.spec.t_end;
        self.run_until(t_end, None, |_, _| Ok(()))
    }
}

fn abort(step: usize, stage: usize, time: f64, e: SolverError) -> SolverError {
    match e {
        e @ SolverError::Aborted { .. } => e,
        e if e.is_config_error() => e,
        e => SolverError::Aborted { step, stage, time, source: Box::new(e) },
    }
}

fn check_admissible(field: &DoFField, gas: GasModel) -> Result<()> {
    for (i, j) in field.cells() {
        if !first_order_ok(field.avg(i, j), gas) {
            return Err(SolverError::PpViolation {
                location: Location::Cell { i, j },
                detail: "inadmissible average after the step".into(),
            });
        }
    }
    for (i, j) in field.dof_nodes() {
        if !first_order_ok(field.node(i, j), gas) {
            return Err(SolverError::PpViolation {
                location: Location::Node { i, j },
                detail: "inadmissible point value after the step".into(),
            });
        }
    }
    Ok(())
}

/// Column names of field dumps.
pub const FIELD_HEADER: &str = "x,y,rho,v1,v2,v3,B1,B2,B3,p,E";

/// Rows `[x, y, rho, v1, v2, v3, B1, B2, B3, p, E]` on the refined lattice: corners and faces
/// carry point values, cell centers carry averages. Row-major with x fastest.
pub fn refined_rows(field: &DoFField, gas: GasModel) -> Vec<[f64; 11]> {
    let mesh = field.mesh();
    let (ni, nj) = mesh.lattice_extent();
    let mut rows = Vec::with_capacity(((ni + 1) * (nj + 1)) as usize);
    for j in 0..=nj {
        for i in 0..=ni {
            let u = if i % 2 == 1 && j % 2 == 1 { field.avg(i / 2, j / 2) } else { field.node(i, j) };
            let rho = u.rho();
            rows.push([
                mesh.node_x(i),
                mesh.node_y(j),
                rho,
                u[1] / rho,
                u[2] / rho,
                u[3] / rho,
                u[MAG],
                u[MAG + 1],
                u[MAG + 2],
                u.pressure(gas),
                u.energy(),
            ]);
        }
    }
    rows
}

/// Writes the refined-lattice export in the given format.
pub fn write_fields(field: &DoFField, gas: GasModel, path: &Path, format: FieldFormat) -> Result<()> {
    let rows = refined_rows(field, gas);
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    match format {
        FieldFormat::Csv => {
            writeln!(w, "{FIELD_HEADER}")?;
            for r in &rows {
                let line: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
                writeln!(w, "{}", line.join(","))?;
            }
        }
        FieldFormat::Vtk => {
            let mesh = field.mesh();
            let (ni, nj) = mesh.lattice_extent();
            writeln!(w, "# vtk DataFile Version 3.0\nactive flux MHD fields\nASCII\nDATASET STRUCTURED_POINTS")?;
            writeln!(w, "DIMENSIONS {} {} 1", ni + 1, nj + 1)?;
            writeln!(w, "ORIGIN {:e} {:e} 0", mesh.node_x(0), mesh.node_y(0))?;
            writeln!(w, "SPACING {:e} {:e} 1", 0.5 * mesh.dx, 0.5 * mesh.dy)?;
            writeln!(w, "POINT_DATA {}", rows.len())?;
            for (name, k) in [("rho", 2), ("p", 9), ("E", 10)] {
                writeln!(w, "SCALARS {name} double 1\nLOOKUP_TABLE default")?;
                for r in &rows {
                    writeln!(w, "{:e}", r[k])?;
                }
            }
            for (name, k) in [("v", 3), ("B", 6)] {
                writeln!(w, "VECTORS {name} double")?;
                for r in &rows {
                    writeln!(w, "{:e} {:e} {:e}", r[k], r[k + 1], r[k + 2])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV field dump back into rows.
pub fn read_fields_csv(path: &Path) -> Result<Vec<[f64; 11]>> {
    let mut lines = BufReader::new(std::fs::File::open(path)?).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != FIELD_HEADER {
        return Err(SolverError::Config(format!("unexpected field header `{header}`")));
    }
    let mut rows = vec![];
    for (n, line) in lines.enumerate() {
        let line = line?;
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| SolverError::Config(format!("line {}: {e}", n + 2)))?;
        let row: [f64; 11] = vals
            .try_into()
            .map_err(|v: Vec<f64>| SolverError::Config(format!("line {}: {} columns", n + 2, v.len())))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Runs a configuration to completion, writing diagnostics and field dumps when an output
/// directory is configured.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    let mut sim = Simulation::from_config(config)?;
    let out = config.output.dir.clone();
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.toml"), config.to_toml())?;
    }
    let dump = |sim: &Simulation, dir: &Path| -> Result<()> {
        for &fmt in &config.output.formats {
            let ext = match fmt {
                FieldFormat::Csv => "csv",
                FieldFormat::Vtk => "vtk",
            };
            write_fields(sim.field(), sim.gas, &dir.join(format!("fields_{:06}.{ext}", sim.step)), fmt)?;
        }
        Ok(())
    };
    let mut record = DiagnosticsRecord::default();
    record.push(sim.diagnostics(StepStats::default()));
    if let Some(dir) = &out {
        dump(&sim, dir)?;
    }
    info!(
        "{}: {}x{} cells, t_end = {}, cfl = {}",
        sim.spec.name,
        sim.field().mesh().nx,
        sim.field().mesh().ny,
        sim.spec.t_end,
        sim.cfl
    );
    let t_end = sim.spec.t_end;
    let stride = config.output.diagnostics_stride;
    let dump_stride = config.output.dump_stride;
    let mut pending = StepStats::default();
    let result = sim.run_until(t_end, config.solver.max_steps, |sim, r| {
        pending += r.stats;
        let last = sim.t >= t_end || config.solver.max_steps.is_some_and(|m| sim.step >= m);
        if sim.step % stride == 0 || last {
            record.push(sim.diagnostics(pending));
            pending = StepStats::default();
        }
        if let Some(dir) = &out {
            if (dump_stride > 0 && sim.step % dump_stride == 0) || last {
                dump(sim, dir)?;
            }
        }
        if sim.step % 100 == 0 {
            info!("step {}: t = {:e}, dt = {:e}", sim.step, sim.t, r.dt);
        }
        Ok(())
    });
    if let Some(dir) = &out {
        record.save(&dir.join("diagnostics.csv"))?;
    }
    let summary = result?;
    info!(
        "done: {} steps, t = {}, min rho = {:e}, min p = {:e}, retries = {}",
        summary.steps, summary.t, summary.min_rho, summary.min_p, summary.retry_count
    );
    Ok(summary)
}

/// Errors of one mesh in a convergence study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceEntry {
    pub n: usize,
    pub h: f64,
    pub errors: L1Errors,
}

/// Runs the configuration on `n x n` meshes (or `n` cells for pseudo-1D problems) and returns
/// L1 errors at the final time with the density-average rates.
pub fn convergence_study(config: &RunConfig, meshes: &[usize]) -> Result<(Vec<ConvergenceEntry>, Vec<ConvergenceRow>)> {
    let spec = build_problem(&config.problem.name, &config.problem.params)?;
    if spec.exact.is_none() {
        return Err(SolverError::NoExactSolution(spec.name));
    }
    let mut entries = vec![];
    for &n in meshes {
        let mut c = config.clone();
        c.mesh.nx = Some(n);
        c.mesh.ny = Some(n);
        let mut sim = Simulation::from_config(&c)?;
        sim.run()?;
        let (exact, t) = (sim.spec.exact.clone().expect("checked above"), sim.t);
        let errors = l1_error(sim.field(), &|x, y| exact(x, y, t), sim.gas);
        let h = sim.field().mesh().dx;
        info!("n = {n}: rho L1 error {:e} after {} steps", errors.avg[0], sim.step);
        entries.push(ConvergenceEntry { n, h, errors });
    }
    let rows = convergence_table(&entries.iter().map(|e| (e.h, e.errors.avg[0])).collect::<Vec<_>>())?;
    Ok((entries, rows))
}

pub const CONVERGENCE_HEADER: &str = "n,h,variable,kind,error,rate";

const VARIABLES: [&str; 8] = ["rho", "m1", "m2", "m3", "B1", "B2", "B3", "E"];

/// Convergence table as CSV, one row per mesh, variable and DoF kind.
pub fn write_convergence(entries: &[ConvergenceEntry], mut w: impl Write) -> Result<()> {
    writeln!(w, "{CONVERGENCE_HEADER}")?;
    for (kind, pick) in [("avg", 0usize), ("point", 1)] {
        for (k, var) in VARIABLES.iter().enumerate() {
            let err = |e: &ConvergenceEntry| if pick == 0 { e.errors.avg[k] } else { e.errors.point[k] };
            for (q, e) in entries.iter().enumerate() {
                let rate = (q > 0)
                    .then(|| {
                        let (a, b) = (err(&entries[q - 1]), err(e));
                        (a / b).ln() / (entries[q - 1].h / e.h).ln()
                    })
                    .filter(|r| r.is_finite())
                    .map(|r| format!("{r:e}"))
                    .unwrap_or_default();
                writeln!(w, "{},{:e},{var},{kind},{:e},{rate}", e.n, e.h, err(e))?;
            }
        }
    }
    Ok(())
}

/// Runs a convergence study and writes `convergence.csv` into `dir`. Returns the file path and
/// the density-average table.
pub fn convergence_command(config: &RunConfig, meshes: &[usize], dir: &Path) -> Result<(PathBuf, Vec<ConvergenceRow>)> {
    let (entries, rows) = convergence_study(config, meshes)?;
    std::fs::create_dir_all(dir)?;
    let path = dir.join("convergence.csv");
    write_convergence(&entries, BufWriter::new(std::fs::File::create(&path)?))?;
    Ok((path, rows))
}
