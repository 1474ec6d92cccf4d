//! High-order semi-discrete right-hand sides and the time-step restriction.

use crate::error::{Location, Result, SolverError};
use crate::grid::{fd, DoFField, FdVariant, SIMPSON};
use crate::physics::{
    flux_unchecked, powell_psi_unchecked, pp_alpha_from, Axis, ConservedState, GasModel, WaveData, MAG,
};

/// Discretization of the divergence in the point-value source term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PointSource {
    /// Average of the two one-sided differences (stable).
    #[default]
    Central,
    /// One-sided difference chosen by the sign of the local velocity.
    Upwind,
}

/// Switches for the source term and its point discretization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceOptions {
    pub average: bool,
    pub point: bool,
    pub point_variant: PointSource,
}

impl Default for SourceOptions {
    fn default() -> Self {
        SourceOptions { average: true, point: true, point_variant: PointSource::Central }
    }
}

/// Pointwise fluxes and wave data at lattice nodes, indexed like [`DoFField`] nodes.
#[derive(Clone, Debug, Default)]
pub struct NodeData {
    pub flux: Vec<[ConservedState; 2]>,
    pub wave: Vec<WaveData>,
}

/// Lattice margin around the interior over which node data is needed (the 5-point stencils).
pub(crate) const NODE_MARGIN: isize = 2;

impl NodeData {
    pub fn compute(&mut self, field: &DoFField, gas: GasModel) -> Result<()> {
        let n = field.nodes_raw().len();
        self.flux.resize(n, [ConservedState::ZERO; 2]);
        self.wave.resize(n, WaveData::default());
        let (ni, nj) = field.mesh().lattice_extent();
        let nodes = field.nodes_raw();
        for j in -NODE_MARGIN..=nj + NODE_MARGIN {
            let row = field.node_index(-NODE_MARGIN, j);
            for (q, i) in (-NODE_MARGIN..=ni + NODE_MARGIN).enumerate() {
                let k = row + q;
                let u = &nodes[k];
                if !u.is_finite() {
                    return Err(SolverError::NonFinite(Location::Node { i, j }));
                }
                self.wave[k] = WaveData::of(u, gas).ok_or_else(|| SolverError::InadmissibleState {
                    location: Location::Node { i, j },
                    rho: u.rho(),
                    p: u.pressure(gas),
                })?;
                self.flux[k] = [flux_unchecked(Axis::X, u, gas), flux_unchecked(Axis::Y, u, gas)];
            }
        }
        Ok(())
    }
}

/// Simpson combination `(F(lo) + 4 F(mid) + F(hi)) / 6` of pointwise fluxes along a face.
pub fn simpson_face_flux(
    axis: Axis,
    lo: &ConservedState,
    mid: &ConservedState,
    hi: &ConservedState,
    gas: GasModel,
) -> Result<ConservedState> {
    for u in [lo, mid, hi] {
        if WaveData::of(u, gas).is_none() {
            return Err(SolverError::InadmissibleState { location: Location::Point, rho: u.rho(), p: u.pressure(gas) });
        }
    }
    Ok(simpson(&flux_unchecked(axis, lo, gas), &flux_unchecked(axis, mid, gas), &flux_unchecked(axis, hi, gas)))
}

#[inline]
fn simpson(a: &ConservedState, b: &ConservedState, c: &ConservedState) -> ConservedState {
    let mut out = [0.0; 8];
    for (k, o) in out.iter_mut().enumerate() {
        *o = (a[k] + 4.0 * b[k] + c[k]) / 6.0;
    }
    ConservedState(out)
}

const VARIANTS: [FdVariant; 3] = [FdVariant::Minus, FdVariant::Central, FdVariant::Plus];

/// Discrete divergence at the 3x3 Simpson nodes of cell `(i, j)`, indexed `[m][l]`
/// (`l` along x). Requires the cell center to be recovered.
pub fn cell_divergence_table(field: &DoFField, i: isize, j: isize) -> [[f64; 3]; 3] {
    let mesh = field.mesh();
    let (a, b) = (2 * i, 2 * j);
    let bx = |l: isize, m: isize| field.node(a + l, b + m)[MAG];
    let by = |l: isize, m: isize| field.node(a + l, b + m)[MAG + 1];
    let mut out = [[0.0; 3]; 3];
    for (m, row) in out.iter_mut().enumerate() {
        for (l, v) in row.iter_mut().enumerate() {
            let (li, mi) = (l as isize, m as isize);
            let ddx = fd(VARIANTS[l], bx(0, mi), bx(1, mi), bx(2, mi), mesh.dx);
            let ddy = fd(VARIANTS[m], by(li, 0), by(li, 1), by(li, 2), mesh.dy);
            *v = ddx + ddy;
        }
    }
    out
}

/// Simpson-weighted source `sum w_l w_m (div B)^{l,m} Psi(U^{l,m})` for cell `(i, j)`.
pub fn average_source(field: &DoFField, i: isize, j: isize, gas: GasModel) -> Result<ConservedState> {
    for m in 0..3 {
        for l in 0..3 {
            let u = field.node(2 * i + l, 2 * j + m);
            if WaveData::of(u, gas).is_none() {
                return Err(SolverError::InadmissibleState {
                    location: Location::Node { i: 2 * i + l, j: 2 * j + m },
                    rho: u.rho(),
                    p: u.pressure(gas),
                });
            }
        }
    }
    Ok(average_source_unchecked(field, i, j))
}

#[inline]
pub(crate) fn average_source_unchecked(field: &DoFField, i: isize, j: isize) -> ConservedState {
    let div = cell_divergence_table(field, i, j);
    let mut s = ConservedState::ZERO;
    for (m, row) in div.iter().enumerate() {
        for (l, d) in row.iter().enumerate() {
            let u = field.node(2 * i + l as isize, 2 * j + m as isize);
            s += powell_psi_unchecked(u) * (SIMPSON[l] * SIMPSON[m] * d);
        }
    }
    s
}

/// Simpson face fluxes of the high-order scheme.
///
/// `x[f + (nx + 1) j]` is the flux through vertical face `f` in row `j`, `y[i + nx f]` through
/// horizontal face `f` in column `i`.
#[derive(Clone, Debug, Default)]
pub struct FaceFluxes {
    pub x: Vec<ConservedState>,
    pub y: Vec<ConservedState>,
}

impl FaceFluxes {
    pub(crate) fn compute(&mut self, field: &DoFField, nd: &NodeData) {
        let mesh = *field.mesh();
        let (nx, ny) = (mesh.nx as isize, mesh.ny as isize);
        self.x.clear();
        self.y.clear();
        for j in 0..ny {
            for f in 0..=nx {
                let k0 = field.node_index(2 * f, 2 * j);
                let k1 = field.node_index(2 * f, 2 * j + 1);
                let k2 = field.node_index(2 * f, 2 * j + 2);
                self.x.push(simpson(&nd.flux[k0][0], &nd.flux[k1][0], &nd.flux[k2][0]));
            }
        }
        for f in 0..=ny {
            for i in 0..nx {
                let k0 = field.node_index(2 * i, 2 * f);
                let k1 = field.node_index(2 * i + 1, 2 * f);
                let k2 = field.node_index(2 * i + 2, 2 * f);
                self.y.push(simpson(&nd.flux[k0][1], &nd.flux[k1][1], &nd.flux[k2][1]));
            }
        }
    }
}

/// Semi-discrete right-hand side for all DoFs, in the layout of [`DoFField`] (ghosts and
/// cell-center slots zero). The field must have ghosts filled and centers recovered.
pub fn rhs(field: &DoFField, gas: GasModel, source: SourceOptions) -> Result<DoFField> {
    let mut nd = NodeData::default();
    nd.compute(field, gas)?;
    let mut faces = FaceFluxes::default();
    faces.compute(field, &nd);
    let mesh = *field.mesh();
    let mut out = DoFField::uniform(mesh, ConservedState::ZERO);
    let nx = mesh.nx;
    for (i, j) in field.cells() {
        let (iu, ju) = (i as usize, j as usize);
        let fl = &faces.x[iu + (nx + 1) * ju];
        let fr = &faces.x[iu + 1 + (nx + 1) * ju];
        let gd = &faces.y[iu + nx * ju];
        let gu = &faces.y[iu + nx * (ju + 1)];
        let mut r = (*fl - *fr) * (1.0 / mesh.dx) + (*gd - *gu) * (1.0 / mesh.dy);
        if source.average {
            r -= average_source_unchecked(field, i, j);
        }
        check_finite(&r, Location::Cell { i, j })?;
        *out.avg_mut(i, j) = r;
    }
    for (i, j) in field.dof_nodes() {
        let r = point_rhs_indexed(field, &nd, i, j, source);
        check_finite(&r, Location::Node { i, j })?;
        *out.node_mut(i, j) = r;
    }
    Ok(out)
}

#[inline]
pub(crate) fn check_finite(u: &ConservedState, location: Location) -> Result<()> {
    if u.is_finite() {
        Ok(())
    } else {
        Err(SolverError::NonFinite(location))
    }
}

/// Point-value right-hand side at lattice node `(i, j)` (corner or face), with the LLF flux
/// vector splitting on axes where the node sits on a cell boundary and central differences
/// of the unsplit flux on the other axis.
pub fn point_rhs(field: &DoFField, i: isize, j: isize, gas: GasModel, source: SourceOptions) -> Result<ConservedState> {
    let mut nd = NodeData::default();
    nd.compute(field, gas)?;
    Ok(point_rhs_indexed(field, &nd, i, j, source))
}

#[inline]
pub(crate) fn point_rhs_indexed(
    field: &DoFField,
    nd: &NodeData,
    i: isize,
    j: isize,
    source: SourceOptions,
) -> ConservedState {
    let nodes = field.nodes_raw();
    let k0 = field.node_index(i, j);
    let mesh = field.mesh();
    let strides = [1usize, field.node_stride()];
    let coords = [i, j];
    let h = [mesh.dx, mesh.dy];
    let mut acc = [0.0; 8];
    let mut div = 0.0;
    for l in 0..2 {
        let s = strides[l];
        let inv_h = 1.0 / h[l];
        if coords[l].rem_euclid(2) == 0 {
            let k = [k0 - 2 * s, k0 - s, k0, k0 + s, k0 + 2 * s];
            let axis = if l == 0 { Axis::X } else { Axis::Y };
            let mut a: f64 = 0.0;
            for &q in &k {
                a = a.max(nd.wave[q].radius(axis));
            }
            let f = [&nd.flux[k[0]][l], &nd.flux[k[1]][l], &nd.flux[k[3]][l], &nd.flux[k[4]][l]];
            let u = [&nodes[k[0]], &nodes[k[1]], &nodes[k[2]], &nodes[k[3]], &nodes[k[4]]];
            let c = 0.5 * inv_h;
            for v in 0..8 {
                let df = f[0][v] - 4.0 * f[1][v] + 4.0 * f[2][v] - f[3][v];
                let du = u[0][v] - 4.0 * u[1][v] + 6.0 * u[2][v] - 4.0 * u[3][v] + u[4][v];
                acc[v] += (df + a * du) * c;
            }
            let b = [u[0][MAG + l], u[1][MAG + l], u[2][MAG + l], u[3][MAG + l], u[4][MAG + l]];
            div += match source.point_variant {
                PointSource::Central => (b[0] - 4.0 * b[1] + 4.0 * b[3] - b[4]) * c,
                PointSource::Upwind => {
                    if nd.wave[k0].vel[l] > 0.0 {
                        fd(FdVariant::Plus, b[0], b[1], b[2], h[l])
                    } else {
                        fd(FdVariant::Minus, b[2], b[3], b[4], h[l])
                    }
                }
            };
        } else {
            let (lo, hi) = (k0 - s, k0 + s);
            let (flo, fhi) = (&nd.flux[lo][l], &nd.flux[hi][l]);
            for v in 0..8 {
                acc[v] += (fhi[v] - flo[v]) * inv_h;
            }
            div += (nodes[hi][MAG + l] - nodes[lo][MAG + l]) * inv_h;
        }
    }
    let mut r = -ConservedState(acc);
    if source.point {
        r -= powell_psi_unchecked(&nodes[k0]) * div;
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeStepReport {
    pub dt: f64,
    /// DoF attaining the largest bracket.
    pub limiting_location: Location,
    /// `|div B| / sqrt(rho)` contribution at that DoF.
    pub divergence_term: f64,
}

/// Offset to the neighbor used by the first-order point schemes along an axis: a full cell
/// when the node lies on a cell boundary along that axis, half a cell otherwise.
#[inline]
pub(crate) fn llf_offset(coord: isize) -> usize {
    if coord.rem_euclid(2) == 0 {
        2
    } else {
        1
    }
}

/// Largest stable step `nu / max(bracket)` from the positivity condition of the first-order
/// schemes, evaluated for every cell average and every point value.
/// The field must have ghosts filled.
pub fn compute_dt(field: &DoFField, nu: f64, gas: GasModel) -> Result<TimeStepReport> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(SolverError::Config(format!("CFL number must lie in (0, 1], got {nu}")));
    }
    let mesh = *field.mesh();
    let (dx, dy) = (mesh.dx, mesh.dy);
    let wave_of = |u: &ConservedState, location: Location| {
        if !u.is_finite() {
            return Err(SolverError::NoAdmissibleState(location));
        }
        WaveData::of(u, gas).ok_or(SolverError::NoAdmissibleState(location))
    };
    let mut best = (0.0f64, Location::Point, 0.0f64);
    let mut consider = |bracket: f64, loc: Location, div: f64| {
        if bracket > best.0 {
            best = (bracket, loc, div);
        }
    };

    // Cell averages.
    let (nx, ny) = (mesh.nx as isize, mesh.ny as isize);
    let stride = (nx + 2) as usize;
    let mut waves = Vec::with_capacity(stride * (ny + 2) as usize);
    for j in -1..=ny {
        for i in -1..=nx {
            waves.push(wave_of(field.avg(i, j), Location::Cell { i, j })?);
        }
    }
    let w = |i: isize, j: isize| &waves[(i + 1) as usize + (j + 1) as usize * stride];
    for (i, j) in field.cells() {
        let u = field.avg(i, j);
        let mut bracket = 0.0;
        for (axis, (di, dj), h) in [(Axis::X, (1, 0), dx), (Axis::Y, (0, 1), dy)] {
            let (lo, hi) = (field.avg(i - di, j - dj), field.avg(i + di, j + dj));
            let a_lo = pp_alpha_from(axis, lo, w(i - di, j - dj), u, w(i, j));
            let a_hi = pp_alpha_from(axis, u, w(i, j), hi, w(i + di, j + dj));
            bracket += (a_lo + a_hi) / h;
        }
        let div = (field.avg(i + 1, j)[MAG] - field.avg(i - 1, j)[MAG]) / (2.0 * dx)
            + (field.avg(i, j + 1)[MAG + 1] - field.avg(i, j - 1)[MAG + 1]) / (2.0 * dy);
        let term = div.abs() / w(i, j).sqrt_rho;
        consider(bracket + term, Location::Cell { i, j }, term);
    }

    // Point values.
    let nodes = field.nodes_raw();
    let (ni, nj) = mesh.lattice_extent();
    let nstride = field.node_stride();
    let mut nwaves = vec![WaveData::default(); nodes.len()];
    for j in -2..=nj + 2 {
        for i in -2..=ni + 2 {
            if i.rem_euclid(2) == 1 && j.rem_euclid(2) == 1 {
                continue;
            }
            let k = field.node_index(i, j);
            nwaves[k] = wave_of(&nodes[k], Location::Node { i, j })?;
        }
    }
    for (i, j) in field.dof_nodes() {
        let k0 = field.node_index(i, j);
        let u = &nodes[k0];
        let mut bracket = 0.0;
        let mut div = 0.0;
        for (l, axis, h, coord) in [(0, Axis::X, dx, i), (1, Axis::Y, dy, j)] {
            let off = llf_offset(coord) * if l == 0 { 1 } else { nstride };
            let (lo, hi) = (k0 - off, k0 + off);
            let a_lo = pp_alpha_from(axis, &nodes[lo], &nwaves[lo], u, &nwaves[k0]);
            let a_hi = pp_alpha_from(axis, u, &nwaves[k0], &nodes[hi], &nwaves[hi]);
            bracket += (a_lo + a_hi) / h;
            div += (nodes[hi][MAG + l] - nodes[lo][MAG + l]) / (2.0 * h);
        }
        let term = div.abs() / nwaves[k0].sqrt_rho;
        consider(bracket + term, Location::Node { i, j }, term);
    }

    let (bracket, limiting_location, divergence_term) = best;
    if !(bracket > 0.0) || !bracket.is_finite() {
        return Err(SolverError::NoAdmissibleState(limiting_location));
    }
    Ok(TimeStepReport { dt: nu / bracket, limiting_location, divergence_term })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{fill_ghosts, init_dofs, recover_centers, BoundaryPolicy, Mesh2D};
    use crate::physics::{conserved_of_primitive, spectral_radius, PrimitiveState};

    fn gas() -> GasModel {
        GasModel::new(5.0 / 3.0).unwrap()
    }

    fn prepared(n: usize, ic: &dyn Fn(f64, f64) -> PrimitiveState) -> DoFField {
        let mesh = Mesh2D::new(n, n, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let mut f = init_dofs(ic, mesh, gas()).unwrap();
        fill_ghosts(&mut f, &BoundaryPolicy::periodic(), 0.0, gas()).unwrap();
        recover_centers(&mut f);
        fill_ghosts(&mut f, &BoundaryPolicy::periodic(), 0.0, gas()).unwrap();
        f
    }

    /// Prepares a field sampled from `ic` without periodic wrapping (ghost nodes also sampled).
    fn sampled(n: usize, ic: &dyn Fn(f64, f64) -> PrimitiveState) -> DoFField {
        let mesh = Mesh2D::new(n, n, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let mut f = DoFField::uniform(mesh, ConservedState::ZERO);
        for j in -4..=2 * n as isize + 4 {
            for i in -4..=2 * n as isize + 4 {
                *f.node_mut(i, j) = conserved_of_primitive(&ic(mesh.node_x(i), mesh.node_y(j)), gas());
            }
        }
        for j in -2..n as isize + 2 {
            for i in -2..n as isize + 2 {
                let (x, y) = mesh.cell_center(i, j);
                *f.avg_mut(i, j) = conserved_of_primitive(&ic(x, y), gas());
            }
        }
        f
    }

    fn uniform_state() -> PrimitiveState {
        PrimitiveState::new(1.3, [0.2, -0.4, 0.1], [0.5, 0.3, -0.2], 0.8)
    }

    #[test]
    fn uniform_field_has_zero_rhs() {
        let f = prepared(6, &|_, _| uniform_state());
        let r = rhs(&f, gas(), SourceOptions::default()).unwrap();
        for v in r.avgs_raw().iter().chain(r.nodes_raw()) {
            for k in 0..8 {
                assert!(v[k].abs() < 1e-13, "{v:?}");
            }
        }
    }

    #[test]
    fn simpson_face_flux_examples() {
        let g = GasModel::new(2.0).unwrap();
        let u = conserved_of_primitive(&uniform_state(), g);
        let f = simpson_face_flux(Axis::X, &u, &u, &u, g).unwrap();
        let e = flux_unchecked(Axis::X, &u, g);
        for k in 0..8 {
            assert!((f[k] - e[k]).abs() < 1e-14);
        }
        let st = |p: f64| conserved_of_primitive(&PrimitiveState::new(1.0, [0.0; 3], [0.0; 3], p), g);
        let f = simpson_face_flux(Axis::X, &st(1.0), &st(2.0), &st(1.0), g).unwrap();
        assert!((f[1] - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn divergence_table_linear_and_solenoidal() {
        let lin = |x: f64, _y: f64| PrimitiveState::new(1.0, [0.0; 3], [x, 0.0, 0.0], 1.0);
        let f = sampled(5, &lin);
        for (i, j) in f.cells() {
            for row in cell_divergence_table(&f, i, j) {
                for d in row {
                    assert!((d - 1.0).abs() < 1e-12);
                }
            }
        }
        let sol = |x: f64, y: f64| PrimitiveState::new(1.0, [0.3, 0.1, 0.0], [x * x, -2.0 * x * y, 0.0], 1.0);
        let f = sampled(5, &sol);
        for (i, j) in f.cells() {
            for row in cell_divergence_table(&f, i, j) {
                for d in row {
                    assert!(d.abs() < 1e-12);
                }
            }
            let s = average_source(&f, i, j, gas()).unwrap();
            assert!(s.0.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn average_source_matches_brute_force() {
        let lin = |x: f64, _y: f64| PrimitiveState::new(1.0, [0.4, 0.2, 0.0], [x, 0.3, 0.0], 1.0);
        let f = sampled(4, &lin);
        let mesh = *f.mesh();
        for (i, j) in f.cells() {
            let s = average_source(&f, i, j, gas()).unwrap();
            let mut expect = ConservedState::ZERO;
            for (m, wm) in SIMPSON.iter().enumerate() {
                for (l, wl) in SIMPSON.iter().enumerate() {
                    let x = mesh.node_x(2 * i + l as isize);
                    let y = mesh.node_y(2 * j + m as isize);
                    let u = conserved_of_primitive(&lin(x, y), gas());
                    expect += crate::physics::powell_psi(&u).unwrap() * (wl * wm);
                }
            }
            for k in 0..8 {
                assert!((s[k] - expect[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn periodic_mass_rhs_sums_to_zero() {
        let pi = std::f64::consts::PI;
        let ic = |x: f64, y: f64| {
            PrimitiveState::new(
                1.0 + 0.5 * (2.0 * pi * x).sin(),
                [(2.0 * pi * y).cos(), 0.3, 0.0],
                [0.2 * (2.0 * pi * y).sin(), 0.1, 0.0],
                1.0 + 0.2 * (2.0 * pi * (x + y)).cos(),
            )
        };
        let f = prepared(8, &ic);
        let r = rhs(&f, gas(), SourceOptions::default()).unwrap();
        let total: f64 = f.cells().map(|(i, j)| r.avg(i, j)[0]).sum();
        assert!(total.abs() < 1e-12, "{total}");
    }

    #[test]
    fn y_invariant_point_kinds_agree() {
        let pi = std::f64::consts::PI;
        let ic = |x: f64, _y: f64| {
            PrimitiveState::new(
                1.0 + 0.3 * (2.0 * pi * x).sin(),
                [0.5, 0.2, 0.0],
                [0.4, 0.3 * (2.0 * pi * x).cos(), 0.1],
                1.0,
            )
        };
        let f = prepared(8, &ic);
        let r = rhs(&f, gas(), SourceOptions::default()).unwrap();
        // Corner (2i, 2j) and x-face (2i, 2j+1) share the x-profile; y-faces and cell centers likewise.
        for i in 0..=16isize {
            for j in 0..8isize {
                let (a, b) = if i % 2 == 0 {
                    (r.node(i, 2 * j), r.node(i, 2 * j + 1))
                } else {
                    (r.node(i, 2 * j), r.node(i, 2 * j + 2))
                };
                for k in 0..8 {
                    assert!((a[k] - b[k]).abs() < 1e-11, "{i} {j} {k}");
                }
            }
        }
    }

    #[test]
    fn point_rhs_linear_divergence_only() {
        // Rest state with B = (x, 0, 0): only the source acts on magnetic and energy rows.
        let ic = |x: f64, _y: f64| PrimitiveState::new(1.0, [0.0; 3], [x, 0.0, 0.0], 1.0);
        let f = sampled(4, &ic);
        let g = gas();
        for (i, j) in [(2, 2), (2, 3), (3, 2)] {
            // The flux gradient -d/dx(p_t - B1^2) = x is cancelled by the source -div(B) B1 = -x.
            let r = point_rhs(&f, i, j, g, SourceOptions::default()).unwrap();
            assert!(r.0.iter().all(|v| v.abs() < 1e-12), "{r:?}");
            let r = point_rhs(&f, i, j, g, SourceOptions { point: false, ..Default::default() }).unwrap();
            assert!((r[1] - f.mesh().node_x(i)).abs() < 1e-12, "{r:?}");
        }
    }

    fn sine_ic(x: f64, y: f64) -> PrimitiveState {
        let pi = std::f64::consts::PI;
        PrimitiveState::new(1.0 + 0.5 * (2.0 * pi * (x + y)).sin(), [1.0, 1.0, 0.0], [0.1, 0.1, 0.0], 1.0)
    }

    #[test]
    fn point_rhs_second_order_on_sine() {
        // Exact: d rho/dt = -2 d/dx rho along (1,1), with uniform velocity/pressure/B rows.
        let pi = std::f64::consts::PI;
        let mut errs = vec![];
        for n in [8usize, 16, 32] {
            let f = prepared(n, &sine_ic);
            let r = rhs(&f, gas(), SourceOptions::default()).unwrap();
            let mut err: f64 = 0.0;
            for (i, j) in f.dof_nodes() {
                let (x, y) = (f.mesh().node_x(i), f.mesh().node_y(j));
                let exact = -2.0 * 0.5 * 2.0 * pi * (2.0 * pi * (x + y)).cos();
                err = err.max((r.node(i, j)[0] - exact).abs());
            }
            errs.push(err);
        }
        // One-sided three-point differences: second-order truncation at the points.
        let rate = (errs[1] / errs[2]).log2();
        assert!((1.9..2.2).contains(&rate), "{errs:?}");
    }

    #[test]
    fn dt_examples() {
        let f = prepared(8, &|_, _| uniform_state());
        let u = conserved_of_primitive(&uniform_state(), gas());
        let rep = compute_dt(&f, 0.4, gas()).unwrap();
        let a1 = spectral_radius(Axis::X, &u, gas()).unwrap();
        let a2 = spectral_radius(Axis::Y, &u, gas()).unwrap();
        let expect = 0.4 / (2.0 * a1 * 8.0 + 2.0 * a2 * 8.0);
        assert!((rep.dt - expect).abs() < 1e-14 * expect);
        let f2 = prepared(16, &|_, _| uniform_state());
        let rep2 = compute_dt(&f2, 0.4, gas()).unwrap();
        assert!((rep2.dt - expect / 2.0).abs() < 1e-14 * expect);
        assert!(compute_dt(&f, 0.0, gas()).is_err());
    }

    #[test]
    fn dt_shrinks_with_divergence() {
        let base = compute_dt(&sampled(8, &|_, _| uniform_state()), 0.4, gas());
        let ic = |x: f64, _y: f64| {
            let mut w = uniform_state();
            w.mag[0] += 0.5 * x;
            w
        };
        let f = sampled(8, &ic);
        let rep = compute_dt(&f, 0.4, gas()).unwrap();
        assert!(rep.divergence_term > 0.0);
        assert!(rep.dt < base.unwrap().dt);
    }
}
