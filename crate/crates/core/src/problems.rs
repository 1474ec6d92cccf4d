//! Registry of test problems: initial data, boundaries, final times and exact solutions.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::grid::{BoundaryKind, BoundaryPolicy, Mesh2D};
use crate::physics::{GasModel, PrimitiveState};

pub type InitialCondition = Arc<dyn Fn(f64, f64) -> PrimitiveState + Send + Sync>;
pub type ExactSolution = Arc<dyn Fn(f64, f64, f64) -> PrimitiveState + Send + Sync>;

/// Vortex strength giving a center pressure of about `5.3e-12`.
pub const VORTEX_MU: f64 = 5.389489439;

/// Problem names understood by [`build_problem`].
pub const PROBLEMS: &[&str] = &[
    "rp1",
    "rp2",
    "leblanc",
    "riemann",
    "sine",
    "vortex",
    "orszag_tang",
    "rotor",
    "blast",
    "shock_cloud",
    "jet",
    "uniform",
];

/// Optional problem parameters; unused fields are ignored by problems that do not need them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemParams {
    /// Vortex magnetic strength.
    pub mu: Option<f64>,
    /// Jet magnetic field.
    pub ba: Option<f64>,
    /// Accept a jet field outside the three published cases.
    pub free_ba: bool,
    /// Use the formulas exactly as printed (vortex without the `1/(2 pi)` scaling, rotor taper
    /// `(r1 - r)/(r - r0)`, shock-cloud tuples in `(rho, v, B, p)` order).
    pub literal: bool,
    /// Riemann data `(rho, v1, v2, v3, B1, B2, B3, p)` left and right of `x0`.
    pub left: Option<[f64; 8]>,
    pub right: Option<[f64; 8]>,
    pub x0: Option<f64>,
    pub gamma: Option<f64>,
    pub t_end: Option<f64>,
    /// Uniform state for `uniform`.
    pub state: Option<[f64; 8]>,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub gamma: f64,
    pub t_end: f64,
    pub kappa: f64,
    pub ic: InitialCondition,
    pub bc: BoundaryPolicy,
    pub exact: Option<ExactSolution>,
    /// y-invariant problem run on `ny = 4` periodic rows of square cells.
    pub pseudo_1d: bool,
    pub default_mesh: (usize, usize),
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("x", &self.x)
            .field("y", &self.y)
            .field("gamma", &self.gamma)
            .field("t_end", &self.t_end)
            .field("kappa", &self.kappa)
            .field("bc", &self.bc)
            .field("pseudo_1d", &self.pseudo_1d)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn gas(&self) -> Result<GasModel> {
        GasModel::new(self.gamma)
    }

    /// Mesh for the requested resolution; pseudo-1D problems force four square rows.
    pub fn mesh(&self, nx: usize, ny: usize) -> Result<Mesh2D> {
        if self.pseudo_1d {
            let dx = (self.x.1 - self.x.0) / nx as f64;
            Mesh2D::new(nx, 4, self.x, (0.0, 4.0 * dx))
        } else {
            Mesh2D::new(nx, ny, self.x, self.y)
        }
    }

    pub fn exact_solution(&self, x: f64, y: f64, t: f64) -> Result<PrimitiveState> {
        self.exact.as_ref().map(|e| e(x, y, t)).ok_or_else(|| SolverError::NoExactSolution(self.name.clone()))
    }
}

fn prim(t: [f64; 8]) -> PrimitiveState {
    PrimitiveState::from_tuple(t)
}

fn sides(left: BoundaryKind, right: BoundaryKind, bottom: BoundaryKind, top: BoundaryKind) -> BoundaryPolicy {
    BoundaryPolicy { left, right, bottom, top }
}

fn riemann(name: &str, l: [f64; 8], r: [f64; 8], x0: f64, gamma: f64, t_end: f64, kappa: f64) -> ProblemSpec {
    let (wl, wr) = (prim(l), prim(r));
    ProblemSpec {
        name: name.into(),
        x: (0.0, 1.0),
        y: (0.0, 1.0),
        gamma,
        t_end,
        kappa,
        ic: Arc::new(move |x, _| if x < x0 { wl } else { wr }),
        bc: sides(BoundaryKind::Outflow, BoundaryKind::Outflow, BoundaryKind::Periodic, BoundaryKind::Periodic),
        exact: None,
        pseudo_1d: true,
        default_mesh: (400, 4),
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(SolverError::BadParams(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Sine wave `rho = 1 + 0.99 sin(2 pi (x + y - 2t))` advected with `v = (1, 1)`.
fn sine_state(x: f64, y: f64, t: f64) -> PrimitiveState {
    prim([1.0 + 0.99 * (2.0 * PI * (x + y - 2.0 * t)).sin(), 1.0, 1.0, 0.0, 0.1, 0.1, 0.0, 1.0])
}

/// Vortex on the background `(1, 1, 1, 0, 0, 0, 0, 1)` centered at the origin.
pub fn vortex_state(x: f64, y: f64, mu: f64, literal: bool) -> PrimitiveState {
    let xi = 2f64.sqrt() * mu;
    let r2 = x * x + y * y;
    let e = (0.5 * (1.0 - r2)).exp();
    let s = if literal { 1.0 } else { 1.0 / (2.0 * PI) };
    let dv = xi * s * e;
    let db = mu * s * e;
    let dp = 0.5 * s * s * (mu * mu * (1.0 - r2) - xi * xi) * e * e;
    prim([1.0, 1.0 - dv * y, 1.0 + dv * x, 0.0, -db * y, db * x, 0.0, 1.0 + dp])
}

fn wrap(v: f64, lo: f64, hi: f64) -> f64 {
    lo + (v - lo).rem_euclid(hi - lo)
}

/// Half width of the jet nozzle. Lattice nodes within round-off of the nozzle edge stay outside.
const JET_HALF_WIDTH: f64 = 0.05;

fn jet_field_ok(ba: f64) -> bool {
    [200.0f64, 2000.0, 20000.0].iter().any(|v| (v.sqrt() - ba).abs() <= 1e-9 * ba)
}

/// Builds a named problem.
pub fn build_problem(name: &str, params: &ProblemParams) -> Result<ProblemSpec> {
    let sq4pi = (4.0 * PI).sqrt();
    let rp1_l = [1.0, 0.0, 0.0, 0.0, 0.75, 1.0, 0.0, 1.0];
    let rp1_r = [0.125, 0.0, 0.0, 0.0, 0.75, -1.0, 0.0, 0.1];
    let spec = match name {
        "rp1" => riemann(name, rp1_l, rp1_r, 0.5, 2.0, 0.2, 10.0),
        "rp2" => riemann(
            name,
            [1.08, 1.2, 0.01, 0.5, 2.0 / sq4pi, 3.6 / sq4pi, 2.0 / sq4pi, 0.95],
            [1.0, 0.0, 0.0, 0.0, 2.0 / sq4pi, 4.0 / sq4pi, 2.0 / sq4pi, 1.0],
            0.5,
            5.0 / 3.0,
            0.2,
            50.0,
        ),
        "leblanc" => {
            let mut s = riemann(name, rp1_l, rp1_r, 0.5, 1.4, 1.5e-6, 1000.0);
            s.default_mesh = (2000, 4);
            s
        }
        "riemann" => {
            let (l, r) = match (params.left, params.right) {
                (Some(l), Some(r)) => (l, r),
                _ => return Err(SolverError::BadParams("riemann needs `left` and `right` states".into())),
            };
            let gamma = params.gamma.ok_or_else(|| SolverError::BadParams("riemann needs `gamma`".into()))?;
            let t_end = positive("t_end", params.t_end.unwrap_or(0.2))?;
            let x0 = params.x0.unwrap_or(0.5);
            if !(0.0..=1.0).contains(&x0) {
                return Err(SolverError::BadParams(format!("x0 must lie in [0, 1], got {x0}")));
            }
            riemann(name, l, r, x0, gamma, t_end, 1.0)
        }
        "sine" => ProblemSpec {
            name: name.into(),
            x: (0.0, 1.0),
            y: (0.0, 1.0),
            gamma: 5.0 / 3.0,
            t_end: 0.1,
            kappa: 0.0,
            ic: Arc::new(|x, y| sine_state(x, y, 0.0)),
            bc: BoundaryPolicy::periodic(),
            exact: Some(Arc::new(sine_state)),
            pseudo_1d: false,
            default_mesh: (64, 64),
        },
        "vortex" => {
            let mu = positive("mu", params.mu.unwrap_or(VORTEX_MU))?;
            let literal = params.literal;
            ProblemSpec {
                name: name.into(),
                x: (-10.0, 10.0),
                y: (-10.0, 10.0),
                gamma: 5.0 / 3.0,
                t_end: 0.1,
                kappa: 0.0,
                ic: Arc::new(move |x, y| vortex_state(x, y, mu, literal)),
                bc: BoundaryPolicy::periodic(),
                exact: Some(Arc::new(move |x, y, t| {
                    vortex_state(wrap(x - t, -10.0, 10.0), wrap(y - t, -10.0, 10.0), mu, literal)
                })),
                pseudo_1d: false,
                default_mesh: (64, 64),
            }
        }
        "orszag_tang" => ProblemSpec {
            name: name.into(),
            x: (0.0, 1.0),
            y: (0.0, 1.0),
            gamma: 5.0 / 3.0,
            t_end: 0.5,
            kappa: 1.0,
            ic: Arc::new(move |x, y| {
                let (sx, sy, s4x) = ((2.0 * PI * x).sin(), (2.0 * PI * y).sin(), (4.0 * PI * x).sin());
                prim([25.0 / (36.0 * PI), -sy, sx, 0.0, -sy / sq4pi, s4x / sq4pi, 0.0, 5.0 / (12.0 * PI)])
            }),
            bc: BoundaryPolicy::periodic(),
            exact: None,
            pseudo_1d: false,
            default_mesh: (128, 128),
        },
        "rotor" => {
            let literal = params.literal;
            let (r0, r1) = (0.1, 0.115);
            ProblemSpec {
                name: name.into(),
                x: (0.0, 1.0),
                y: (0.0, 1.0),
                gamma: 5.0 / 3.0,
                t_end: 0.295,
                kappa: 2.0,
                ic: Arc::new(move |x, y| {
                    let (dx, dy) = (x - 0.5, y - 0.5);
                    let r = (dx * dx + dy * dy).sqrt();
                    let (rho, v1, v2) = if r < r0 {
                        (10.0, -dy / r0, dx / r0)
                    } else if r < r1 {
                        let f = if literal { (r1 - r) / (r - r0) } else { (r1 - r) / (r1 - r0) };
                        (1.0 + 9.0 * f, -f * dy / r, f * dx / r)
                    } else {
                        (1.0, 0.0, 0.0)
                    };
                    prim([rho, v1, v2, 0.0, 2.5 / sq4pi, 0.0, 0.0, 0.5])
                }),
                bc: BoundaryPolicy::periodic(),
                exact: None,
                pseudo_1d: false,
                default_mesh: (128, 128),
            }
        }
        "blast" => {
            let b = 1.0 / 2f64.sqrt();
            ProblemSpec {
                name: name.into(),
                x: (-0.5, 0.5),
                y: (-0.5, 0.5),
                gamma: 5.0 / 3.0,
                t_end: 0.2,
                kappa: 1.0,
                ic: Arc::new(move |x, y| {
                    let p = if (x * x + y * y).sqrt() < 0.1 { 10.0 } else { 0.1 };
                    prim([1.0, 0.0, 0.0, 0.0, b, b, 0.0, p])
                }),
                bc: BoundaryPolicy::outflow(),
                exact: None,
                pseudo_1d: false,
                default_mesh: (128, 128),
            }
        }
        "shock_cloud" => {
            let (left, right) = if params.literal {
                (
                    [3.86859, 0.0, 0.0, 0.0, 167.345, 0.0, 2.1826182, -2.1826182],
                    [1.0, -11.2536, 0.0, 0.0, 1.0, 0.0, 0.56418958, 0.56418958],
                )
            } else {
                (
                    [3.86859, 0.0, 0.0, 0.0, 0.0, 2.1826182, -2.1826182, 167.345],
                    [1.0, -11.2536, 0.0, 0.0, 0.0, 0.56418958, 0.56418958, 1.0],
                )
            };
            let (wl, wr) = (prim(left), prim(right));
            let mut cloud = right;
            cloud[0] = 10.0;
            let wc = prim(cloud);
            let inflow: crate::grid::InflowFn = Arc::new(move |_, _, _| Some(wl));
            ProblemSpec {
                name: name.into(),
                x: (0.0, 1.0),
                y: (0.0, 1.0),
                gamma: 5.0 / 3.0,
                t_end: 0.06,
                kappa: 1.0,
                ic: Arc::new(move |x, y| {
                    if x < 0.6 {
                        wl
                    } else if (x - 0.8).powi(2) + (y - 0.5).powi(2) < 0.15 * 0.15 {
                        wc
                    } else {
                        wr
                    }
                }),
                bc: sides(BoundaryKind::Inflow(inflow), BoundaryKind::Outflow, BoundaryKind::Outflow, BoundaryKind::Outflow),
                exact: None,
                pseudo_1d: false,
                default_mesh: (128, 128),
            }
        }
        "jet" => {
            let ba = positive("ba", params.ba.unwrap_or(20000f64.sqrt()))?;
            if !params.free_ba && !jet_field_ok(ba) {
                return Err(SolverError::BadParams(format!(
                    "jet field {ba} is not one of sqrt(200), sqrt(2000), sqrt(20000); set free_ba to allow it"
                )));
            }
            let gamma = 1.4;
            let ambient = prim([0.1 * gamma, 0.0, 0.0, 0.0, 0.0, ba, 0.0, 1.0]);
            let jet = prim([gamma, 0.0, 800.0, 0.0, 0.0, ba, 0.0, 1.0]);
            let inflow: crate::grid::InflowFn = Arc::new(move |x, _, _| (x.abs() < JET_HALF_WIDTH - 1e-12).then_some(jet));
            ProblemSpec {
                name: name.into(),
                x: (-0.5, 0.0),
                y: (0.0, 1.5),
                gamma,
                t_end: 0.002,
                kappa: 2.0,
                ic: Arc::new(move |_, _| ambient),
                bc: sides(BoundaryKind::Outflow, BoundaryKind::Reflective, BoundaryKind::Inflow(inflow), BoundaryKind::Outflow),
                exact: None,
                pseudo_1d: false,
                default_mesh: (100, 300),
            }
        }
        "uniform" => {
            let w = prim(params.state.unwrap_or([1.0, 0.5, -0.25, 0.1, 0.3, 0.2, 0.1, 1.0]));
            ProblemSpec {
                name: name.into(),
                x: (0.0, 1.0),
                y: (0.0, 1.0),
                gamma: params.gamma.unwrap_or(5.0 / 3.0),
                t_end: params.t_end.unwrap_or(0.1),
                kappa: 1.0,
                ic: Arc::new(move |_, _| w),
                bc: BoundaryPolicy::periodic(),
                exact: Some(Arc::new(move |_, _, _| w)),
                pseudo_1d: false,
                default_mesh: (16, 16),
            }
        }
        other => return Err(SolverError::UnknownProblem(other.into())),
    };
    spec.gas()?;
    Ok(spec)
}
