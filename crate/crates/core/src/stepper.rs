//! Forward-Euler stages with the full limiting pipeline and the SSP-RK3 combination.

use crate::error::{Location, Result, SolverError};
use crate::grid::{fill_ghost_averages, fill_ghost_nodes, recover_cell_center, BoundaryPolicy, DoFField};
use crate::limiters::{
    floors, limit_cell_center, pp_edge_thetas, pp_lambda_candidates, pp_source_theta, scaling_limit_retry,
    shock_sensor, shrink, SensorCoefficients, EPS_FLOOR, RETRY_STEPS,
};
use crate::llf::{first_order_ok, llf_point_update_indexed, LlfCandidates};
use crate::physics::{is_admissible, ConservedState, GasModel};
use crate::scheme::{average_source_unchecked, check_finite, point_rhs_indexed, FaceFluxes, NodeData, SourceOptions};

/// Switches of one stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageOptions {
    pub source: SourceOptions,
    pub sensor: bool,
    pub kappa: f64,
    pub pp: bool,
}

impl Default for StageOptions {
    fn default() -> Self {
        StageOptions { source: SourceOptions::default(), sensor: true, kappa: 1.0, pp: true }
    }
}

/// Limiter activity, summed over stages.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    /// Edges with a sensor coefficient below one.
    pub sensor_active: usize,
    /// Edges and point values modified by the positivity limiters.
    pub pp_active: usize,
    /// DoFs that needed the round-off retry.
    pub retry_count: usize,
}

impl std::ops::AddAssign for StepStats {
    fn add_assign(&mut self, o: StepStats) {
        self.sensor_active += o.sensor_active;
        self.pp_active += o.pp_active;
        self.retry_count += o.retry_count;
    }
}

/// Time integrator holding the boundary policy, switches and scratch buffers.
#[derive(Clone, Debug)]
pub struct Stepper {
    pub gas: GasModel,
    pub bc: BoundaryPolicy,
    pub options: StageOptions,
    nd: NodeData,
    faces: FaceFluxes,
}

/// `u - lx (F_R - F_L) - ly (G_U - G_D) - dt S`, shared by every average update path.
#[inline]
fn assemble(
    u: &ConservedState,
    fl: &ConservedState,
    fr: &ConservedState,
    gd: &ConservedState,
    gu: &ConservedState,
    s: &ConservedState,
    lx: f64,
    ly: f64,
    dt: f64,
) -> ConservedState {
    *u - (*fr - *fl) * lx - (*gu - *gd) * ly - *s * dt
}

impl Stepper {
    pub fn new(gas: GasModel, bc: BoundaryPolicy, options: StageOptions) -> Result<Self> {
        bc.validate()?;
        if !(options.kappa >= 0.0 && options.kappa.is_finite()) {
            return Err(SolverError::Config(format!("sensor strength must be nonnegative, got {}", options.kappa)));
        }
        Ok(Stepper { gas, bc, options, nd: NodeData::default(), faces: FaceFluxes::default() })
    }

    /// Ghost averages, cell centers (limited toward the average when positivity limiting is on)
    /// and ghost nodes.
    ///
    /// Returns the number of centers that needed the round-off retry.
    pub fn prepare(&self, field: &mut DoFField, t: f64) -> Result<usize> {
        fill_ghost_averages(field, &self.bc, t, self.gas)?;
        let mut retries = 0;
        for (i, j) in field.cells().collect::<Vec<_>>() {
            let mut c = recover_cell_center(field, i, j);
            if self.options.pp {
                let avg = field.avg(i, j);
                if !first_order_ok(avg, self.gas) {
                    return Err(SolverError::InadmissibleState {
                        location: Location::Cell { i, j },
                        rho: avg.rho(),
                        p: avg.pressure(self.gas),
                    });
                }
                let (lim, retry) = limit_cell_center(&c, avg, self.gas).ok_or_else(|| SolverError::PpViolation {
                    location: Location::Node { i: 2 * i + 1, j: 2 * j + 1 },
                    detail: format!("center limiter failed after {RETRY_STEPS} retries"),
                })?;
                retries += usize::from(retry.is_some());
                c = lim;
            }
            *field.node_mut(2 * i + 1, 2 * j + 1) = c;
        }
        fill_ghost_nodes(field, &self.bc, t, self.gas)?;
        Ok(retries)
    }

    /// One forward-Euler step of the limited scheme on a prepared field.
    pub fn euler_stage(&mut self, field: &DoFField, dt: f64) -> Result<(DoFField, StepStats)> {
        let gas = self.gas;
        let opts = self.options;
        let mesh = *field.mesh();
        let (nx, ny) = (mesh.nx, mesh.ny);
        let (lx, ly) = (dt / mesh.dx, dt / mesh.dy);
        let mut stats = StepStats::default();

        self.nd.compute(field, gas)?;
        self.faces.compute(field, &self.nd);
        let nd = &self.nd;
        let mut out = field.clone();

        // Point values.
        for (i, j) in field.dof_nodes() {
            let r = point_rhs_indexed(field, nd, i, j, opts.source);
            let loc = Location::Node { i, j };
            check_finite(&r, loc)?;
            let u = field.node(i, j);
            let high = *u + r * dt;
            check_finite(&high, loc)?;
            let next = if !opts.pp {
                if !first_order_ok(&high, gas) {
                    return Err(SolverError::InadmissibleState { location: loc, rho: high.rho(), p: high.pressure(gas) });
                }
                high
            } else if is_admissible(&high, EPS_FLOOR, EPS_FLOOR, gas) {
                high
            } else {
                stats.pp_active += 1;
                let low = llf_point_update_indexed(field, nd, i, j, dt, opts.source.point);
                if !first_order_ok(&low, gas) {
                    return Err(SolverError::StepRejected(loc));
                }
                let (lim, retry) = scaling_limit_retry(&high, &low, gas).ok_or_else(|| SolverError::PpViolation {
                    location: loc,
                    detail: format!("scaling limiter failed after {RETRY_STEPS} retries"),
                })?;
                stats.retry_count += usize::from(retry.is_some());
                lim
            };
            *out.node_mut(i, j) = next;
        }

        // Cell averages.
        let high_src: Vec<ConservedState> = field
            .cells()
            .map(|(i, j)| if opts.source.average { average_source_unchecked(field, i, j) } else { ConservedState::ZERO })
            .collect();
        let fx = &self.faces.x;
        let fy = &self.faces.y;
        let ex = |f: usize, j: usize| f + (nx + 1) * j;
        let ey = |i: usize, f: usize| i + nx * f;

        if !opts.pp && !opts.sensor {
            for (c, (i, j)) in field.cells().enumerate() {
                let (iu, ju) = (i as usize, j as usize);
                let u = assemble(
                    field.avg(i, j),
                    &fx[ex(iu, ju)],
                    &fx[ex(iu + 1, ju)],
                    &fy[ey(iu, ju)],
                    &fy[ey(iu, ju + 1)],
                    &high_src[c],
                    lx,
                    ly,
                    dt,
                );
                check_avg(&u, i, j, gas)?;
                *out.avg_mut(i, j) = u;
            }
            return Ok((out, stats));
        }

        let llf = LlfCandidates::compute(field, dt, gas, opts.source.average)?;
        let sensor = if opts.sensor && opts.kappa > 0.0 {
            shock_sensor(field, opts.kappa, gas)?
        } else {
            SensorCoefficients::transparent(nx, ny)
        };
        stats.sensor_active += sensor.active_edges();
        let sx: Vec<ConservedState> =
            fx.iter().zip(&llf.flux_x).zip(&sensor.theta_x).map(|((h, l), &t)| h.blend(l, t)).collect();
        let sy: Vec<ConservedState> =
            fy.iter().zip(&llf.flux_y).zip(&sensor.theta_y).map(|((h, l), &t)| h.blend(l, t)).collect();
        let ss: Vec<ConservedState> =
            high_src.iter().zip(&llf.src).zip(&sensor.theta_cell).map(|((h, l), &t)| h.blend(l, t)).collect();

        if !opts.pp {
            for (c, (i, j)) in field.cells().enumerate() {
                let (iu, ju) = (i as usize, j as usize);
                let u = assemble(
                    field.avg(i, j),
                    &sx[ex(iu, ju)],
                    &sx[ex(iu + 1, ju)],
                    &sy[ey(iu, ju)],
                    &sy[ey(iu, ju + 1)],
                    &ss[c],
                    lx,
                    ly,
                    dt,
                );
                check_avg(&u, i, j, gas)?;
                *out.avg_mut(i, j) = u;
            }
            return Ok((out, stats));
        }

        // Parametrized flux limiter.
        let ncell = nx * ny;
        let mut eps = Vec::with_capacity(ncell);
        let mut theta_src = Vec::with_capacity(ncell);
        let mut lambda = Vec::with_capacity(ncell);
        for (c, (i, j)) in field.cells().enumerate() {
            let (iu, ju) = (i as usize, j as usize);
            let ul = &llf.avg[c];
            let (er, ep) = floors(ul, gas);
            let usrc = *ul + (llf.src[c] - ss[c]) * dt;
            let ts = pp_source_theta(ul, &usrc, ep, gas);
            let lim1 = usrc.blend(ul, ts);
            let (el, er_) = (ex(iu, ju), ex(iu + 1, ju));
            let (ed, eu) = (ey(iu, ju), ey(iu, ju + 1));
            let h = [
                (sx[el] - llf.flux_x[el]) * lx,
                -((sx[er_] - llf.flux_x[er_]) * lx),
                (sy[ed] - llf.flux_y[ed]) * ly,
                -((sy[eu] - llf.flux_y[eu]) * ly),
            ];
            lambda.push(pp_lambda_candidates(&lim1, &h, er, ep, gas)?);
            eps.push((er, ep));
            theta_src.push(ts);
        }
        let (mut tx, mut ty) = pp_edge_thetas(&lambda, nx, ny, self.bc.periodic_x(), self.bc.periodic_y());
        stats.pp_active += tx.iter().chain(&ty).filter(|&&t| t < 1.0).count();
        stats.pp_active += theta_src.iter().filter(|&&t| t < 1.0).count();

        let update = |c: usize, tx: &[f64], ty: &[f64], ts: &[f64]| {
            let (iu, ju) = (c % nx, c / nx);
            let fxe = |e: usize| sx[e].blend(&llf.flux_x[e], tx[e]);
            let fye = |e: usize| sy[e].blend(&llf.flux_y[e], ty[e]);
            let s = ss[c].blend(&llf.src[c], ts[c]);
            assemble(
                field.avg(iu as isize, ju as isize),
                &fxe(ex(iu, ju)),
                &fxe(ex(iu + 1, ju)),
                &fye(ey(iu, ju)),
                &fye(ey(iu, ju + 1)),
                &s,
                lx,
                ly,
                dt,
            )
        };
        let ok = |c: usize, u: &ConservedState| is_admissible(u, eps[c].0, eps[c].1, gas);

        let mut avgs: Vec<ConservedState> = (0..ncell).map(|c| update(c, &tx, &ty, &theta_src)).collect();
        let mut pending: Vec<usize> = (0..ncell).filter(|&c| !ok(c, &avgs[c])).collect();
        if !pending.is_empty() {
            let (tx0, ty0, ts0) = (tx.clone(), ty.clone(), theta_src.clone());
            let mut level = vec![0u32; ncell];
            let (px, py) = (self.bc.periodic_x(), self.bc.periodic_y());
            while let Some(c) = pending.pop() {
                let u = update(c, &tx, &ty, &theta_src);
                avgs[c] = u;
                if ok(c, &u) {
                    continue;
                }
                let (iu, ju) = (c % nx, c / nx);
                let m = level[c];
                if m >= RETRY_STEPS {
                    return Err(SolverError::PpViolation {
                        location: Location::Cell { i: iu as isize, j: ju as isize },
                        detail: format!(
                            "flux limiter failed after {RETRY_STEPS} retries (rho = {:e}, p = {:e})",
                            u.rho(),
                            u.pressure(gas)
                        ),
                    });
                }
                if m == 0 {
                    stats.retry_count += 1;
                }
                level[c] += 1;
                for e in [ex(iu, ju), ex(iu + 1, ju)] {
                    tx[e] = tx[e].min(shrink(tx0[e], m));
                }
                for e in [ey(iu, ju), ey(iu, ju + 1)] {
                    ty[e] = ty[e].min(shrink(ty0[e], m));
                }
                if px {
                    tx[ex(0, ju)] = tx[ex(0, ju)].min(tx[ex(nx, ju)]);
                    tx[ex(nx, ju)] = tx[ex(0, ju)];
                }
                if py {
                    ty[ey(iu, 0)] = ty[ey(iu, 0)].min(ty[ey(iu, ny)]);
                    ty[ey(iu, ny)] = ty[ey(iu, 0)];
                }
                theta_src[c] = theta_src[c].min(shrink(ts0[c], m));
                for (di, dj) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                    let (a, b) = (iu as isize + di, ju as isize + dj);
                    let a = if px { a.rem_euclid(nx as isize) } else { a };
                    let b = if py { b.rem_euclid(ny as isize) } else { b };
                    if (0..nx as isize).contains(&a) && (0..ny as isize).contains(&b) {
                        pending.push(a as usize + nx * b as usize);
                    }
                }
                pending.push(c);
            }
        }
        for (c, (i, j)) in field.cells().enumerate() {
            check_finite(&avgs[c], Location::Cell { i, j })?;
            *out.avg_mut(i, j) = avgs[c];
        }
        Ok((out, stats))
    }

    /// One SSP-RK3 step from a prepared field at time `t`. Errors are wrapped with the step
    /// number, stage and stage time.
    pub fn ssp_rk3_step(&mut self, field: &DoFField, t: f64, dt: f64, step: usize) -> Result<(DoFField, StepStats)> {
        let wrap = |stage: usize, time: f64| {
            move |e: SolverError| SolverError::Aborted { step, stage, time, source: Box::new(e) }
        };
        let mut stats = StepStats::default();
        let (mut u1, s) = self.euler_stage(field, dt).map_err(wrap(1, t))?;
        stats += s;
        stats.retry_count += self.prepare(&mut u1, t + dt).map_err(wrap(2, t + dt))?;
        let (e2, s) = self.euler_stage(&u1, dt).map_err(wrap(2, t + dt))?;
        stats += s;
        let mut u2 = combine(field, e2, 0.75, 0.25);
        stats.retry_count += self.prepare(&mut u2, t + 0.5 * dt).map_err(wrap(3, t + 0.5 * dt))?;
        let (e3, s) = self.euler_stage(&u2, dt).map_err(wrap(3, t + 0.5 * dt))?;
        stats += s;
        Ok((combine(field, e3, 1.0 / 3.0, 2.0 / 3.0), stats))
    }
}

fn check_avg(u: &ConservedState, i: isize, j: isize, gas: GasModel) -> Result<()> {
    check_finite(u, Location::Cell { i, j })?;
    if first_order_ok(u, gas) {
        Ok(())
    } else {
        Err(SolverError::InadmissibleState { location: Location::Cell { i, j }, rho: u.rho(), p: u.pressure(gas) })
    }
}

/// `a u + b v` over all storage, written into `v`.
fn combine(u: &DoFField, mut v: DoFField, a: f64, b: f64) -> DoFField {
    let (avg, nodes) = v.raw_mut();
    for (o, w) in avg.iter_mut().zip(u.avgs_raw()) {
        *o = *w * a + *o * b;
    }
    for (o, w) in nodes.iter_mut().zip(u.nodes_raw()) {
        *o = *w * a + *o * b;
    }
    v
}
