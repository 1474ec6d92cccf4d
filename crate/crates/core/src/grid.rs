//! Cartesian mesh and Active Flux degree-of-freedom storage.
//!
//! Point values live on a half-spaced lattice of nodes indexed `(I, J)` with
//! `x = x0 + I dx / 2`, `y = y0 + J dy / 2`. Even/even nodes are corners, even/odd nodes are
//! centers of vertical faces, odd/even nodes are centers of horizontal faces and odd/odd nodes
//! are cell centers. Cell centers are scratch slots refilled every stage, not degrees of freedom.
//! Each face or corner value has exactly one slot, shared by the cells that touch it.

use std::fmt;
use std::sync::Arc;

use crate::error::{Location, Result, SolverError};
use crate::physics::{conserved_of_primitive, is_admissible, ConservedState, GasModel, PrimitiveState};

/// Ghost cells per side.
pub const GHOST_CELLS: isize = 2;
/// Ghost lattice nodes per side (two per ghost cell).
pub const GHOST_NODES: isize = 2 * GHOST_CELLS;

/// Simpson weights on `[-1/2, 0, 1/2]`.
pub const SIMPSON: [f64; 3] = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mesh2D {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Mesh2D {
    pub fn new(nx: usize, ny: usize, x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(SolverError::Config(format!("mesh needs at least 4x4 cells, got {nx}x{ny}")));
        }
        if !(x.1 > x.0) || !(y.1 > y.0) {
            return Err(SolverError::Config(format!("empty domain {x:?} x {y:?}")));
        }
        Ok(Mesh2D {
            nx,
            ny,
            x0: x.0,
            x1: x.1,
            y0: y.0,
            y1: y.1,
            dx: (x.1 - x.0) / nx as f64,
            dy: (y.1 - y.0) / ny as f64,
        })
    }

    #[inline]
    pub fn node_x(&self, i: isize) -> f64 {
        self.x0 + i as f64 * 0.5 * self.dx
    }

    #[inline]
    pub fn node_y(&self, j: isize) -> f64 {
        self.y0 + j as f64 * 0.5 * self.dy
    }

    pub fn cell_center(&self, i: isize, j: isize) -> (f64, f64) {
        (self.node_x(2 * i + 1), self.node_y(2 * j + 1))
    }

    /// Area of the whole domain.
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    /// Lattice extent `(2 nx, 2 ny)` of the interior nodes.
    pub fn lattice_extent(&self) -> (isize, isize) {
        (2 * self.nx as isize, 2 * self.ny as isize)
    }
}

/// Kinds of point-value degrees of freedom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PointKind {
    /// `(x_{i+1/2}, y_{j+1/2})`.
    Corner,
    /// Center of a vertical face, `(x_{i+1/2}, y_j)`.
    XFace,
    /// Center of a horizontal face, `(x_i, y_{j+1/2})`.
    YFace,
}

/// Kind of the lattice node `(i, j)`, or `None` for cell centers.
#[inline]
pub fn node_kind(i: isize, j: isize) -> Option<PointKind> {
    match (i.rem_euclid(2), j.rem_euclid(2)) {
        (0, 0) => Some(PointKind::Corner),
        (0, 1) => Some(PointKind::XFace),
        (1, 0) => Some(PointKind::YFace),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoFField {
    mesh: Mesh2D,
    avg: Vec<ConservedState>,
    nodes: Vec<ConservedState>,
    avg_stride: usize,
    node_stride: usize,
}

impl DoFField {
    pub fn uniform(mesh: Mesh2D, u: ConservedState) -> Self {
        let avg_stride = mesh.nx + 2 * GHOST_CELLS as usize;
        let avg_rows = mesh.ny + 2 * GHOST_CELLS as usize;
        let node_stride = 2 * mesh.nx + 1 + 2 * GHOST_NODES as usize;
        let node_rows = 2 * mesh.ny + 1 + 2 * GHOST_NODES as usize;
        DoFField {
            mesh,
            avg: vec![u; avg_stride * avg_rows],
            nodes: vec![u; node_stride * node_rows],
            avg_stride,
            node_stride,
        }
    }

    #[inline]
    pub fn mesh(&self) -> &Mesh2D {
        &self.mesh
    }

    #[inline]
    pub fn avg_index(&self, i: isize, j: isize) -> usize {
        debug_assert!(i >= -GHOST_CELLS && i < self.mesh.nx as isize + GHOST_CELLS);
        debug_assert!(j >= -GHOST_CELLS && j < self.mesh.ny as isize + GHOST_CELLS);
        (i + GHOST_CELLS) as usize + (j + GHOST_CELLS) as usize * self.avg_stride
    }

    #[inline]
    pub fn node_index(&self, i: isize, j: isize) -> usize {
        debug_assert!(i >= -GHOST_NODES && i <= 2 * self.mesh.nx as isize + GHOST_NODES);
        debug_assert!(j >= -GHOST_NODES && j <= 2 * self.mesh.ny as isize + GHOST_NODES);
        (i + GHOST_NODES) as usize + (j + GHOST_NODES) as usize * self.node_stride
    }

    #[inline]
    pub fn avg_stride(&self) -> usize {
        self.avg_stride
    }

    #[inline]
    pub fn node_stride(&self) -> usize {
        self.node_stride
    }

    #[inline]
    pub fn avg(&self, i: isize, j: isize) -> &ConservedState {
        &self.avg[self.avg_index(i, j)]
    }

    #[inline]
    pub fn avg_mut(&mut self, i: isize, j: isize) -> &mut ConservedState {
        let k = self.avg_index(i, j);
        &mut self.avg[k]
    }

    #[inline]
    pub fn node(&self, i: isize, j: isize) -> &ConservedState {
        &self.nodes[self.node_index(i, j)]
    }

    #[inline]
    pub fn node_mut(&mut self, i: isize, j: isize) -> &mut ConservedState {
        let k = self.node_index(i, j);
        &mut self.nodes[k]
    }

    /// Value at the center of the vertical face `x = x_{i_face}`, row `j`.
    pub fn vface(&self, i_face: usize, j: usize) -> &ConservedState {
        self.node(2 * i_face as isize, 2 * j as isize + 1)
    }

    /// Value at the center of the horizontal face `y = y_{j_face}`, column `i`.
    pub fn hface(&self, i: usize, j_face: usize) -> &ConservedState {
        self.node(2 * i as isize + 1, 2 * j_face as isize)
    }

    pub fn corner(&self, i_face: usize, j_face: usize) -> &ConservedState {
        self.node(2 * i_face as isize, 2 * j_face as isize)
    }

    /// Recovered cell-center value (scratch).
    pub fn center(&self, i: usize, j: usize) -> &ConservedState {
        self.node(2 * i as isize + 1, 2 * j as isize + 1)
    }

    pub fn avgs_raw(&self) -> &[ConservedState] {
        &self.avg
    }

    pub fn nodes_raw(&self) -> &[ConservedState] {
        &self.nodes
    }

    pub(crate) fn raw_mut(&mut self) -> (&mut [ConservedState], &mut [ConservedState]) {
        (&mut self.avg, &mut self.nodes)
    }

    /// Interior cell indices.
    pub fn cells(&self) -> impl ExactSizeIterator<Item = (isize, isize)> {
        let nx = self.mesh.nx;
        (0..nx * self.mesh.ny).map(move |c| ((c % nx) as isize, (c / nx) as isize))
    }

    /// Lattice nodes carrying point-value DoFs, boundary lines included.
    pub fn dof_nodes(&self) -> impl Iterator<Item = (isize, isize)> {
        let (ni, nj) = self.mesh.lattice_extent();
        (0..=nj).flat_map(move |j| (0..=ni).filter(move |&i| node_kind(i, j).is_some()).map(move |i| (i, j)))
    }

    /// Total mass `sum rho_bar dx dy` over interior cells, summed in a fixed order.
    pub fn total_mass(&self) -> f64 {
        let mut sum = 0.0;
        for (i, j) in self.cells() {
            sum += self.avg(i, j).rho();
        }
        sum * self.mesh.dx * self.mesh.dy
    }
}

/// Inflow data as a function of `(x, y, t)`; `None` falls back to outflow at that location.
pub type InflowFn = Arc<dyn Fn(f64, f64, f64) -> Option<PrimitiveState> + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryKind {
    Periodic,
    /// Zero-order extrapolation of the nearest interior DoF of the same kind.
    Outflow,
    /// Mirror with the normal velocity and normal magnetic field negated.
    Reflective,
    /// Prescribed state (Dirichlet) wherever the function returns a state.
    Inflow(InflowFn),
}

impl fmt::Debug for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryKind::Periodic => write!(f, "Periodic"),
            BoundaryKind::Outflow => write!(f, "Outflow"),
            BoundaryKind::Reflective => write!(f, "Reflective"),
            BoundaryKind::Inflow(_) => write!(f, "Inflow(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundaryPolicy {
    pub left: BoundaryKind,
    pub right: BoundaryKind,
    pub bottom: BoundaryKind,
    pub top: BoundaryKind,
}

impl BoundaryPolicy {
    pub fn periodic() -> Self {
        BoundaryPolicy {
            left: BoundaryKind::Periodic,
            right: BoundaryKind::Periodic,
            bottom: BoundaryKind::Periodic,
            top: BoundaryKind::Periodic,
        }
    }

    pub fn outflow() -> Self {
        BoundaryPolicy {
            left: BoundaryKind::Outflow,
            right: BoundaryKind::Outflow,
            bottom: BoundaryKind::Outflow,
            top: BoundaryKind::Outflow,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = |k: &BoundaryKind| matches!(k, BoundaryKind::Periodic);
        if p(&self.left) != p(&self.right) {
            return Err(SolverError::Config("periodic boundary on one x side only".into()));
        }
        if p(&self.bottom) != p(&self.top) {
            return Err(SolverError::Config("periodic boundary on one y side only".into()));
        }
        Ok(())
    }

    pub fn periodic_x(&self) -> bool {
        matches!(self.left, BoundaryKind::Periodic)
    }

    pub fn periodic_y(&self) -> bool {
        matches!(self.bottom, BoundaryKind::Periodic)
    }
}

fn mirror(u: &ConservedState, axis: usize) -> ConservedState {
    let mut m = *u;
    m[1 + axis] = -m[1 + axis];
    m[4 + axis] = -m[4 + axis];
    m
}

/// Where a ghost slot takes its value from.
enum GhostSource {
    /// Interior (or already filled) slot, optionally mirrored.
    Slot(isize, bool),
    /// Evaluate the inflow function, falling back to the given slot.
    Prescribed(isize),
}

/// Source of ghost `g >= 1` on a line of slots `0..=last` with periodic image offset `period`.
/// `stride` is 1 for cell averages and 2 for lattice nodes (slots of the same kind repeat every
/// `stride`). Averages mirror about the boundary face, nodes about the boundary node.
fn ghost_source(kind: &BoundaryKind, low: bool, g: isize, last: isize, period: isize, stride: isize) -> GhostSource {
    let face = isize::from(stride == 1);
    let outflow = if low { g % stride } else { last - g % stride };
    match kind {
        BoundaryKind::Periodic if low => GhostSource::Slot(period - g, false),
        BoundaryKind::Periodic => GhostSource::Slot(last + g - period, false),
        BoundaryKind::Outflow => GhostSource::Slot(outflow, false),
        BoundaryKind::Reflective if low => GhostSource::Slot(g - face, true),
        BoundaryKind::Reflective => GhostSource::Slot(last - g + face, true),
        BoundaryKind::Inflow(_) => GhostSource::Prescribed(outflow),
    }
}

fn inflow_state(kind: &BoundaryKind, x: f64, y: f64, t: f64, gas: GasModel) -> Option<ConservedState> {
    match kind {
        BoundaryKind::Inflow(f) => f(x, y, t).map(|w| conserved_of_primitive(&w, gas)),
        _ => None,
    }
}

/// Fill two ghost layers of cell averages.
pub fn fill_ghost_averages(field: &mut DoFField, bc: &BoundaryPolicy, t: f64, gas: GasModel) -> Result<()> {
    bc.validate()?;
    let mesh = *field.mesh();
    let (nx, ny) = (mesh.nx as isize, mesh.ny as isize);
    for j in 0..ny {
        for (kind, low) in [(&bc.left, true), (&bc.right, false)] {
            for g in 1..=GHOST_CELLS {
                let i = if low { -g } else { nx - 1 + g };
                let v = match ghost_source(kind, low, g, nx - 1, nx, 1) {
                    GhostSource::Slot(s, m) => mirror_if(field.avg(s, j), m, 0),
                    GhostSource::Prescribed(s) => {
                        let (x, y) = mesh.cell_center(i, j);
                        inflow_state(kind, x, y, t, gas).unwrap_or(*field.avg(s, j))
                    }
                };
                *field.avg_mut(i, j) = v;
            }
        }
    }
    for i in -GHOST_CELLS..nx + GHOST_CELLS {
        for (kind, low) in [(&bc.bottom, true), (&bc.top, false)] {
            for g in 1..=GHOST_CELLS {
                let j = if low { -g } else { ny - 1 + g };
                let v = match ghost_source(kind, low, g, ny - 1, ny, 1) {
                    GhostSource::Slot(s, m) => mirror_if(field.avg(i, s), m, 1),
                    GhostSource::Prescribed(s) => {
                        let (x, y) = mesh.cell_center(i, j);
                        inflow_state(kind, x, y, t, gas).unwrap_or(*field.avg(i, s))
                    }
                };
                *field.avg_mut(i, j) = v;
            }
        }
    }
    Ok(())
}

#[inline]
fn mirror_if(u: &ConservedState, m: bool, axis: usize) -> ConservedState {
    if m {
        mirror(u, axis)
    } else {
        *u
    }
}

/// Fill four ghost lattice layers (two ghost cells) of point values and cell-center slots.
///
/// Periodic directions also overwrite the high boundary line with its low image, and inflow
/// sides impose the prescribed state on the boundary line itself.
pub fn fill_ghost_nodes(field: &mut DoFField, bc: &BoundaryPolicy, t: f64, gas: GasModel) -> Result<()> {
    bc.validate()?;
    let mesh = *field.mesh();
    let (ni, nj) = mesh.lattice_extent();
    for j in 0..=nj {
        let y = mesh.node_y(j);
        if bc.periodic_x() {
            *field.node_mut(ni, j) = *field.node(0, j);
        }
        for (kind, low, edge) in [(&bc.left, true, 0), (&bc.right, false, ni)] {
            if let Some(u) = inflow_state(kind, mesh.node_x(edge), y, t, gas) {
                *field.node_mut(edge, j) = u;
            }
            for g in 1..=GHOST_NODES {
                let i = if low { -g } else { ni + g };
                let v = match ghost_source(kind, low, g, ni, ni, 2) {
                    GhostSource::Slot(s, m) => mirror_if(field.node(s, j), m, 0),
                    GhostSource::Prescribed(s) => {
                        inflow_state(kind, mesh.node_x(i), y, t, gas).unwrap_or(*field.node(s, j))
                    }
                };
                *field.node_mut(i, j) = v;
            }
        }
    }
    for i in -GHOST_NODES..=ni + GHOST_NODES {
        let x = mesh.node_x(i);
        if bc.periodic_y() {
            *field.node_mut(i, nj) = *field.node(i, 0);
        }
        for (kind, low, edge) in [(&bc.bottom, true, 0), (&bc.top, false, nj)] {
            if let Some(u) = inflow_state(kind, x, mesh.node_y(edge), t, gas) {
                *field.node_mut(i, edge) = u;
            }
            for g in 1..=GHOST_NODES {
                let j = if low { -g } else { nj + g };
                let v = match ghost_source(kind, low, g, nj, nj, 2) {
                    GhostSource::Slot(s, m) => mirror_if(field.node(i, s), m, 1),
                    GhostSource::Prescribed(s) => {
                        inflow_state(kind, x, mesh.node_y(j), t, gas).unwrap_or(*field.node(i, s))
                    }
                };
                *field.node_mut(i, j) = v;
            }
        }
    }
    Ok(())
}

/// Fill ghost averages, then ghost point values (cell-center slots are copied as-is).
pub fn fill_ghosts(field: &mut DoFField, bc: &BoundaryPolicy, t: f64, gas: GasModel) -> Result<()> {
    fill_ghost_averages(field, bc, t, gas)?;
    fill_ghost_nodes(field, bc, t, gas)
}

/// Cell-center value of the bi-parabolic reconstruction from the average and the 8 boundary values.
#[inline]
pub fn recover_center(
    avg: &ConservedState,
    faces: [&ConservedState; 4],
    corners: [&ConservedState; 4],
) -> ConservedState {
    let mut out = [0.0; 8];
    for (k, o) in out.iter_mut().enumerate() {
        let f = faces[0][k] + faces[1][k] + faces[2][k] + faces[3][k];
        let c = corners[0][k] + corners[1][k] + corners[2][k] + corners[3][k];
        *o = (36.0 * avg[k] - 4.0 * f - c) / 16.0;
    }
    ConservedState(out)
}

/// Recover the center slot of cell `(i, j)` from its DoFs.
#[inline]
pub fn recover_cell_center(field: &DoFField, i: isize, j: isize) -> ConservedState {
    let (a, b) = (2 * i, 2 * j);
    recover_center(
        field.avg(i, j),
        [field.node(a, b + 1), field.node(a + 2, b + 1), field.node(a + 1, b), field.node(a + 1, b + 2)],
        [field.node(a, b), field.node(a + 2, b), field.node(a, b + 2), field.node(a + 2, b + 2)],
    )
}

/// Recover all interior cell centers in place.
pub fn recover_centers(field: &mut DoFField) {
    let (nx, ny) = (field.mesh().nx as isize, field.mesh().ny as isize);
    for j in 0..ny {
        for i in 0..nx {
            let c = recover_cell_center(field, i, j);
            *field.node_mut(2 * i + 1, 2 * j + 1) = c;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdVariant {
    /// One-sided derivative at the low point of the stencil.
    Minus,
    /// Central derivative at the middle point.
    Central,
    /// One-sided derivative at the high point.
    Plus,
}

/// First derivative from three values spaced `h / 2` apart, exact for quadratics.
#[inline]
pub fn fd(variant: FdVariant, lo: f64, mid: f64, hi: f64, h: f64) -> f64 {
    match variant {
        FdVariant::Minus => (-3.0 * lo + 4.0 * mid - hi) / h,
        FdVariant::Central => (hi - lo) / h,
        FdVariant::Plus => (lo - 4.0 * mid + 3.0 * hi) / h,
    }
}

/// Initialize all DoFs from a pointwise initial condition.
///
/// Point values sample the initial condition; averages use the 3x3 tensor Simpson rule, whose
/// nodes coincide with the cell's lattice nodes. Ghosts are left for [`fill_ghosts`].
pub fn init_dofs(ic: &dyn Fn(f64, f64) -> PrimitiveState, mesh: Mesh2D, gas: GasModel) -> Result<DoFField> {
    let mut field = DoFField::uniform(mesh, ConservedState::ZERO);
    let (ni, nj) = mesh.lattice_extent();
    for j in 0..=nj {
        for i in 0..=ni {
            let u = conserved_of_primitive(&ic(mesh.node_x(i), mesh.node_y(j)), gas);
            if !is_admissible(&u, 0.0, 0.0, gas) {
                return Err(SolverError::InadmissibleState {
                    location: Location::Node { i, j },
                    rho: u.rho(),
                    p: u.pressure(gas),
                });
            }
            *field.node_mut(i, j) = u;
        }
    }
    for j in 0..mesh.ny as isize {
        for i in 0..mesh.nx as isize {
            let mut avg = ConservedState::ZERO;
            for (m, wm) in SIMPSON.iter().enumerate() {
                for (l, wl) in SIMPSON.iter().enumerate() {
                    avg += *field.node(2 * i + l as isize, 2 * j + m as isize) * (wl * wm);
                }
            }
            *field.avg_mut(i, j) = avg;
        }
    }
    Ok(field)
}
