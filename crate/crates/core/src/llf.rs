//! First-order local Lax-Friedrichs updates with the discrete Godunov-Powell source.
//!
//! These are the positivity-preserving targets every limiter blends toward.

use crate::error::{Location, Result, SolverError};
use crate::grid::DoFField;
use crate::physics::{
    flux_unchecked, powell_psi_unchecked, pp_alpha_from, Axis, ConservedState, GasModel, WaveData, MAG,
};
use crate::scheme::{llf_offset, NodeData};

/// `(F(U) + F(Ut) - alpha (Ut - U)) / 2`.
#[inline]
pub fn llf_flux(axis: Axis, u: &ConservedState, ut: &ConservedState, alpha: f64, gas: GasModel) -> ConservedState {
    llf_flux_from(&flux_unchecked(axis, u, gas), &flux_unchecked(axis, ut, gas), u, ut, alpha)
}

#[inline]
pub(crate) fn llf_flux_from(
    f: &ConservedState,
    ft: &ConservedState,
    u: &ConservedState,
    ut: &ConservedState,
    alpha: f64,
) -> ConservedState {
    let mut out = [0.0; 8];
    for (k, o) in out.iter_mut().enumerate() {
        *o = 0.5 * (f[k] + ft[k] - alpha * (ut[k] - u[k]));
    }
    ConservedState(out)
}

/// First-order candidates for the cell averages of one forward-Euler stage.
///
/// Face arrays use the layout of [`crate::scheme::FaceFluxes`]; cell arrays are row-major over
/// the interior.
#[derive(Clone, Debug, Default)]
pub struct LlfCandidates {
    pub flux_x: Vec<ConservedState>,
    pub flux_y: Vec<ConservedState>,
    pub alpha_x: Vec<f64>,
    pub alpha_y: Vec<f64>,
    /// First-order source `(div B)_central Psi(U_bar)`; zero when the source is disabled.
    pub src: Vec<ConservedState>,
    /// Updated first-order averages.
    pub avg: Vec<ConservedState>,
}

/// Central difference divergence of the averaged magnetic field in cell `(i, j)`.
#[inline]
pub fn avg_central_divergence(field: &DoFField, i: isize, j: isize) -> f64 {
    let mesh = field.mesh();
    (field.avg(i + 1, j)[MAG] - field.avg(i - 1, j)[MAG]) / (2.0 * mesh.dx)
        + (field.avg(i, j + 1)[MAG + 1] - field.avg(i, j - 1)[MAG + 1]) / (2.0 * mesh.dy)
}

impl LlfCandidates {
    /// Builds fluxes, sources and updated averages. Ghost averages must be filled.
    /// An inadmissible first-order result is reported as [`SolverError::StepRejected`].
    pub fn compute(field: &DoFField, dt: f64, gas: GasModel, with_source: bool) -> Result<LlfCandidates> {
        let mesh = *field.mesh();
        let (nx, ny) = (mesh.nx as isize, mesh.ny as isize);
        let stride = (nx + 2) as usize;
        let mut cache = Vec::with_capacity(stride * (ny + 2) as usize);
        for j in -1..=ny {
            for i in -1..=nx {
                let u = field.avg(i, j);
                let w = WaveData::of(u, gas).filter(|_| u.is_finite()).ok_or_else(|| {
                    SolverError::InadmissibleState { location: Location::Cell { i, j }, rho: u.rho(), p: u.pressure(gas) }
                })?;
                cache.push((w, [flux_unchecked(Axis::X, u, gas), flux_unchecked(Axis::Y, u, gas)]));
            }
        }
        let at = |i: isize, j: isize| &cache[(i + 1) as usize + (j + 1) as usize * stride];

        let mut out = LlfCandidates::default();
        for j in 0..ny {
            for f in 0..=nx {
                let (ul, ur) = (field.avg(f - 1, j), field.avg(f, j));
                let (cl, cr) = (at(f - 1, j), at(f, j));
                let a = pp_alpha_from(Axis::X, ul, &cl.0, ur, &cr.0);
                out.alpha_x.push(a);
                out.flux_x.push(llf_flux_from(&cl.1[0], &cr.1[0], ul, ur, a));
            }
        }
        for f in 0..=ny {
            for i in 0..nx {
                let (ud, uu) = (field.avg(i, f - 1), field.avg(i, f));
                let (cd, cu) = (at(i, f - 1), at(i, f));
                let a = pp_alpha_from(Axis::Y, ud, &cd.0, uu, &cu.0);
                out.alpha_y.push(a);
                out.flux_y.push(llf_flux_from(&cd.1[1], &cu.1[1], ud, uu, a));
            }
        }
        let (lx, ly) = (dt / mesh.dx, dt / mesh.dy);
        let nxu = nx as usize;
        for (i, j) in field.cells() {
            let u = field.avg(i, j);
            let s = if with_source {
                powell_psi_unchecked(u) * avg_central_divergence(field, i, j)
            } else {
                ConservedState::ZERO
            };
            let (iu, ju) = (i as usize, j as usize);
            let fx = |f: usize| &out.flux_x[f + (nxu + 1) * ju];
            let fy = |f: usize| &out.flux_y[iu + nxu * f];
            let next = *u - (*fx(iu + 1) - *fx(iu)) * lx - (*fy(ju + 1) - *fy(ju)) * ly - s * dt;
            if !first_order_ok(&next, gas) {
                return Err(SolverError::StepRejected(Location::Cell { i, j }));
            }
            out.src.push(s);
            out.avg.push(next);
        }
        Ok(out)
    }
}

/// The first-order result must lie in the admissible set.
#[inline]
pub(crate) fn first_order_ok(u: &ConservedState, gas: GasModel) -> bool {
    u.is_finite() && u.rho() > 0.0 && u.pressure(gas) > 0.0
}

/// First-order update of all cell averages (ghosts filled). Inadmissible outputs are reported as
/// a positivity violation, since under the time-step restriction they cannot occur.
pub fn llf_average_update(field: &DoFField, dt: f64, gas: GasModel) -> Result<Vec<ConservedState>> {
    LlfCandidates::compute(field, dt, gas, true).map(|c| c.avg).map_err(|e| match e {
        SolverError::StepRejected(location) => {
            SolverError::PpViolation { location, detail: "first-order average update left the admissible set".into() }
        }
        e => e,
    })
}

/// First-order update of the point value at lattice node `(i, j)` (ghosts filled).
pub fn llf_point_update(field: &DoFField, i: isize, j: isize, dt: f64, gas: GasModel) -> Result<ConservedState> {
    let mut nd = NodeData::default();
    nd.compute(field, gas)?;
    let u = llf_point_update_indexed(field, &nd, i, j, dt, true);
    if first_order_ok(&u, gas) {
        Ok(u)
    } else {
        Err(SolverError::PpViolation {
            location: Location::Node { i, j },
            detail: "first-order point update left the admissible set".into(),
        })
    }
}

/// Unchecked first-order point update reusing precomputed node data.
pub(crate) fn llf_point_update_indexed(
    field: &DoFField,
    nd: &NodeData,
    i: isize,
    j: isize,
    dt: f64,
    with_source: bool,
) -> ConservedState {
    let nodes = field.nodes_raw();
    let mesh = field.mesh();
    let k0 = field.node_index(i, j);
    let u0 = &nodes[k0];
    let w0 = &nd.wave[k0];
    let mut next = *u0;
    let mut div = 0.0;
    for (l, axis, h, coord) in [(0, Axis::X, mesh.dx, i), (1, Axis::Y, mesh.dy, j)] {
        let off = llf_offset(coord) * if l == 0 { 1 } else { field.node_stride() };
        let (lo, hi) = (k0 - off, k0 + off);
        let a_lo = pp_alpha_from(axis, &nodes[lo], &nd.wave[lo], u0, w0);
        let a_hi = pp_alpha_from(axis, u0, w0, &nodes[hi], &nd.wave[hi]);
        let f_lo = llf_flux_from(&nd.flux[lo][l], &nd.flux[k0][l], &nodes[lo], u0, a_lo);
        let f_hi = llf_flux_from(&nd.flux[k0][l], &nd.flux[hi][l], u0, &nodes[hi], a_hi);
        next -= (f_hi - f_lo) * (dt / h);
        div += (nodes[hi][MAG + l] - nodes[lo][MAG + l]) / (2.0 * h);
    }
    if with_source {
        next -= powell_psi_unchecked(u0) * (dt * div);
    }
    next
}
