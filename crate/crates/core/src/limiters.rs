//! Shock-sensor blending, the parametrized flux limiter for cell averages, and the scaling
//! limiter for point values.

use crate::error::{Result, SolverError};
use crate::grid::DoFField;
use crate::physics::{dot, is_admissible, ConservedState, GasModel, MAG};

/// Density and pressure floor used by all limiters.
pub const EPS_FLOOR: f64 = 1e-13;
/// Guard in the denominator of the density box.
pub const LAMBDA_RHO_GUARD: f64 = 1e-12;
/// Number of shrink attempts of the round-off retry.
pub const RETRY_STEPS: u32 = 10;
/// Base decrement of the round-off retry.
pub const RETRY_DECREMENT: f64 = 1e-8;

const TINY: f64 = 1e-300;

/// Sensor coefficients per edge and per cell.
///
/// `theta_x[f + (nx + 1) j]` belongs to vertical face `f` of row `j`,
/// `theta_y[i + nx f]` to horizontal face `f` of column `i`, `theta_cell[i + nx j]` to cell `(i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorCoefficients {
    pub nx: usize,
    pub ny: usize,
    pub kappa: f64,
    pub theta_x: Vec<f64>,
    pub theta_y: Vec<f64>,
    pub theta_cell: Vec<f64>,
}

impl SensorCoefficients {
    /// All coefficients equal to one (sensor disabled).
    pub fn transparent(nx: usize, ny: usize) -> Self {
        SensorCoefficients {
            nx,
            ny,
            kappa: 0.0,
            theta_x: vec![1.0; (nx + 1) * ny],
            theta_y: vec![1.0; nx * (ny + 1)],
            theta_cell: vec![1.0; nx * ny],
        }
    }

    /// Number of edges with a coefficient below one.
    pub fn active_edges(&self) -> usize {
        self.theta_x.iter().chain(&self.theta_y).filter(|&&t| t < 1.0).count()
    }
}

/// Smoothness indicators of one cell.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SensorIndicators {
    /// Total-pressure second-difference ratio along x and y.
    pub phi1: [f64; 2],
    /// Compression indicator.
    pub phi2: f64,
    /// Divergence indicator.
    pub phi3: f64,
}

/// Velocity and total pressure of an average, or an error if it has no primitive state.
fn sensor_primitives(field: &DoFField, i: isize, j: isize, gas: GasModel) -> Result<([f64; 2], f64)> {
    let u = field.avg(i, j);
    if !(u.rho() > 0.0) || !u.is_finite() {
        return Err(SolverError::InadmissibleState {
            location: crate::error::Location::Cell { i, j },
            rho: u.rho(),
            p: u.pressure(gas),
        });
    }
    Ok(([u[1] / u.rho(), u[2] / u.rho()], u.total_pressure(gas)))
}

/// Indicators from the center, left, right, down and up primitives and magnetic fields.
fn indicators_from(
    prim: [&([f64; 2], f64); 5],
    b: [&ConservedState; 5],
    dx: f64,
    dy: f64,
) -> SensorIndicators {
    let [(_, pc), (l, pl), (r, pr), (d, pd), (t, pu)] = prim.map(|p| (p.0, p.1));
    let jameson = |lo: f64, mid: f64, hi: f64| (hi - 2.0 * mid + lo).abs() / (hi + 2.0 * mid + lo).abs();
    let div_v = (r[0] - l[0]) / (2.0 * dx) + (t[1] - d[1]) / (2.0 * dy);
    let curl_v = (r[1] - l[1]) / (2.0 * dx) - (t[0] - d[0]) / (2.0 * dy);
    let phi2 = (-div_v / (div_v * div_v + curl_v * curl_v + 1e-40).sqrt()).max(0.0);
    let [bc, bl, br, bd, bu] = b;
    let phi3 = (br[MAG] - bl[MAG] + bu[MAG + 1] - bd[MAG + 1]).abs() / ((bc[MAG] + bc[MAG + 1]).abs() + 1e-40);
    SensorIndicators { phi1: [jameson(pl, pc, pr), jameson(pd, pc, pu)], phi2, phi3 }
}

/// Indicators of cell `(i, j)` from cell averages; needs one neighbor layer.
pub fn sensor_indicators(field: &DoFField, i: isize, j: isize, gas: GasModel) -> Result<SensorIndicators> {
    let mesh = field.mesh();
    let at = [(i, j), (i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)];
    let mut prim = [([0.0; 2], 0.0); 5];
    for (p, &(a, b)) in prim.iter_mut().zip(&at) {
        *p = sensor_primitives(field, a, b, gas)?;
    }
    Ok(indicators_from(
        [&prim[0], &prim[1], &prim[2], &prim[3], &prim[4]],
        at.map(|(a, b)| field.avg(a, b)),
        mesh.dx,
        mesh.dy,
    ))
}

/// Shock sensor coefficients `exp(-kappa [phi1 phi2 + phi3])` per edge, using the maxima of the
/// two adjacent cells' indicators. Ghost averages (two layers) must be filled.
pub fn shock_sensor(field: &DoFField, kappa: f64, gas: GasModel) -> Result<SensorCoefficients> {
    let mesh = field.mesh();
    let (nx, ny) = (mesh.nx, mesh.ny);
    let pstride = nx + 4;
    let mut prim = Vec::with_capacity(pstride * (ny + 4));
    for j in -2..=ny as isize + 1 {
        for i in -2..=nx as isize + 1 {
            prim.push(sensor_primitives(field, i, j, gas)?);
        }
    }
    let p = |i: isize, j: isize| &prim[(i + 2) as usize + (j + 2) as usize * pstride];
    let stride = nx + 2;
    let mut ind = Vec::with_capacity(stride * (ny + 2));
    for j in -1..=ny as isize {
        for i in -1..=nx as isize {
            let at = [(i, j), (i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)];
            ind.push(indicators_from(at.map(|(a, b)| p(a, b)), at.map(|(a, b)| field.avg(a, b)), mesh.dx, mesh.dy));
        }
    }
    let at = |i: isize, j: isize| &ind[(i + 1) as usize + (j + 1) as usize * stride];
    let edge = |a: &SensorIndicators, b: &SensorIndicators, axis: usize| {
        let p1 = a.phi1[axis].max(b.phi1[axis]);
        let p2 = a.phi2.max(b.phi2);
        let p3 = a.phi3.max(b.phi3);
        (-kappa * (p1 * p2 + p3)).exp()
    };
    let mut s = SensorCoefficients::transparent(nx, ny);
    s.kappa = kappa;
    for j in 0..ny as isize {
        for f in 0..=nx as isize {
            s.theta_x[f as usize + (nx + 1) * j as usize] = edge(at(f - 1, j), at(f, j), 0);
        }
    }
    for f in 0..=ny as isize {
        for i in 0..nx as isize {
            s.theta_y[i as usize + nx * f as usize] = edge(at(i, f - 1), at(i, f), 1);
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            s.theta_cell[i + nx * j] = s.theta_x[i + (nx + 1) * j]
                .min(s.theta_x[i + 1 + (nx + 1) * j])
                .min(s.theta_y[i + nx * j])
                .min(s.theta_y[i + nx * (j + 1)]);
        }
    }
    Ok(s)
}

/// `theta * high + (1 - theta) * low`.
#[inline]
pub fn sensor_blend(high: &ConservedState, low: &ConservedState, theta: f64) -> ConservedState {
    high.blend(low, theta)
}

/// Source coefficient so that `theta U_src + (1 - theta) U_llf` keeps `p >= eps_p`.
pub fn pp_source_theta(u_llf: &ConservedState, u_src: &ConservedState, eps_p: f64, gas: GasModel) -> f64 {
    let p_src = u_src.pressure(gas);
    if p_src >= eps_p {
        return 1.0;
    }
    let p_llf = u_llf.pressure(gas);
    let den = p_llf - p_src;
    if !(den > TINY) {
        return 1.0;
    }
    ((p_llf - eps_p) / den).clamp(0.0, 1.0)
}

/// Coefficients of `g(r) = rho E - |m|^2 / 2 - rho |B|^2 / 2 - rho eps / (gamma - 1)` along
/// `base + r inc`; `g` has the sign of `p - eps` wherever `rho > 0`.
struct PressureCubic {
    base: ConservedState,
    inc: ConservedState,
    shift: f64,
}

impl PressureCubic {
    #[inline]
    fn eval(&self, r: f64) -> (f64, f64) {
        let u = self.base + self.inc * r;
        let (b, d) = (&u.0, &self.inc.0);
        let m = [b[1], b[2], b[3]];
        let dm = [d[1], d[2], d[3]];
        let bb = [b[4], b[5], b[6]];
        let db = [d[4], d[5], d[6]];
        let rho = b[0];
        let b2 = dot(&bb, &bb);
        let g = rho * b[7] - 0.5 * dot(&m, &m) - 0.5 * rho * b2 - rho * self.shift;
        let dg = d[0] * b[7] + rho * d[7] - dot(&m, &dm) - 0.5 * d[0] * b2 - rho * dot(&bb, &db) - d[0] * self.shift;
        (g, dg)
    }
}

/// Largest `r` in `[0, 1]` with `p(base + r' inc) >= eps_p` for all `r'` in `[0, r]`.
///
/// Newton from `r = 1` on the pressure cubic, safeguarded by a sign-change bracket, with
/// bisection after 10 Newton steps. The returned value sits on the admissible side of the root.
pub fn smallest_positive_pressure_root(
    base: &ConservedState,
    inc: &ConservedState,
    eps_p: f64,
    gas: GasModel,
) -> Result<f64> {
    if inc.0.iter().all(|&v| v == 0.0) {
        return Ok(1.0);
    }
    if (*base + *inc).pressure(gas) >= eps_p {
        return Ok(1.0);
    }
    if !(base.pressure(gas) >= eps_p) {
        return Ok(0.0);
    }
    let cubic = PressureCubic { base: *base, inc: *inc, shift: eps_p / (gas.gamma - 1.0) };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut r = 1.0;
    let admissible = |r: f64| (*base + *inc * r).pressure(gas) >= eps_p;
    for it in 0..100 {
        let (g, dg) = cubic.eval(r);
        if g >= 0.0 {
            lo = lo.max(r);
        } else {
            hi = hi.min(r);
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.max(1e-300) || g == 0.0 {
            break;
        }
        let newton = r - g / dg;
        r = if it < 10 && dg != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if it == 99 {
            return Err(SolverError::ConvergenceFailure(100));
        }
    }
    // Step back until the state itself is admissible (guards round-off in the cubic).
    let mut r = lo;
    let mut k = 0;
    while r > 0.0 && !admissible(r) {
        r = (r - 4.0 * f64::EPSILON * (1.0 + r)).max(0.0) * (1.0 - f64::EPSILON * 2f64.powi(k));
        k += 1;
        if k > 60 {
            r = 0.0;
        }
    }
    Ok(r)
}

/// Candidate box `[0, Lambda_L] x [0, Lambda_R] x [0, Lambda_D] x [0, Lambda_U]` of
/// admissible anti-diffusive coefficients for one cell, with `h = [H_L, H_R, H_D, H_U]`.
pub fn pp_lambda_candidates(
    lim1: &ConservedState,
    h: &[ConservedState; 4],
    eps_rho: f64,
    eps_p: f64,
    gas: GasModel,
) -> Result<[f64; 4]> {
    let neg: f64 = h.iter().map(|v| v.rho()).filter(|&r| r < 0.0).sum();
    let mut lam_rho = [1.0; 4];
    for (l, v) in lam_rho.iter_mut().zip(h) {
        if v.rho() < 0.0 {
            *l = ((lim1.rho() - eps_rho) / (LAMBDA_RHO_GUARD - neg)).min(1.0).max(0.0);
        }
    }
    let mut out = lam_rho;
    for k in 1u32..16 {
        let mut inc = ConservedState::ZERO;
        for (q, hv) in h.iter().enumerate() {
            if k & (1 << q) != 0 {
                inc += *hv * lam_rho[q];
            }
        }
        let vertex = *lim1 + inc;
        if vertex.pressure(gas) >= eps_p && vertex.rho() > 0.0 {
            continue;
        }
        let r = smallest_positive_pressure_root(lim1, &inc, eps_p, gas)?;
        for (q, o) in out.iter_mut().enumerate() {
            if k & (1 << q) != 0 {
                *o = o.min(r * lam_rho[q]);
            }
        }
    }
    Ok(out)
}

/// Unique edge coefficients from the per-cell boxes (`lambda[i + nx j] = [L, R, D, U]`),
/// in the face layouts of [`SensorCoefficients`]. Boundary edges of non-periodic directions
/// take the interior cell's value.
pub fn pp_edge_thetas(
    lambda: &[[f64; 4]],
    nx: usize,
    ny: usize,
    periodic_x: bool,
    periodic_y: bool,
) -> (Vec<f64>, Vec<f64>) {
    let mut tx = vec![1.0; (nx + 1) * ny];
    let mut ty = vec![1.0; nx * (ny + 1)];
    for j in 0..ny {
        for f in 0..=nx {
            let left = (f > 0).then(|| lambda[f - 1 + nx * j][1]);
            let right = (f < nx).then(|| lambda[f + nx * j][0]);
            let (left, right) = match (left, right, periodic_x) {
                (None, r, true) => (Some(lambda[nx - 1 + nx * j][1]), r),
                (l, None, true) => (l, Some(lambda[nx * j][0])),
                lr => (lr.0, lr.1),
            };
            tx[f + (nx + 1) * j] = left.unwrap_or(1.0).min(right.unwrap_or(1.0));
        }
    }
    for f in 0..=ny {
        for i in 0..nx {
            let down = (f > 0).then(|| lambda[i + nx * (f - 1)][3]);
            let up = (f < ny).then(|| lambda[i + nx * f][2]);
            let (down, up) = match (down, up, periodic_y) {
                (None, u, true) => (Some(lambda[i + nx * (ny - 1)][3]), u),
                (d, None, true) => (d, Some(lambda[i][2])),
                du => (du.0, du.1),
            };
            ty[i + nx * f] = down.unwrap_or(1.0).min(up.unwrap_or(1.0));
        }
    }
    (tx, ty)
}

/// Scaling limiter coefficients `(theta*, theta**)` pulling `high` toward the admissible `low`.
pub fn scaling_thetas(high: &ConservedState, low: &ConservedState, eps_rho: f64, eps_p: f64, gas: GasModel) -> (f64, f64) {
    let t1 = if high.rho() < eps_rho {
        let den = low.rho() - high.rho();
        if den > TINY {
            ((low.rho() - eps_rho) / den).clamp(0.0, 1.0)
        } else {
            1.0
        }
    } else {
        1.0
    };
    let star = density_blend(high, low, t1);
    let p_star = star.pressure(gas);
    let t2 = if p_star < eps_p || p_star.is_nan() {
        let p_low = low.pressure(gas);
        let den = p_low - p_star;
        if den > TINY {
            ((p_low - eps_p) / den).clamp(0.0, 1.0)
        } else if p_star.is_nan() {
            0.0
        } else {
            1.0
        }
    } else {
        1.0
    };
    (t1, t2)
}

#[inline]
fn density_blend(high: &ConservedState, low: &ConservedState, t1: f64) -> ConservedState {
    let mut star = *high;
    if t1 < 1.0 {
        star[0] = t1 * high.rho() + (1.0 - t1) * low.rho();
    }
    star
}

/// Applies given scaling coefficients: density first, then the whole state.
#[inline]
pub fn apply_scaling(high: &ConservedState, low: &ConservedState, t1: f64, t2: f64) -> ConservedState {
    let star = density_blend(high, low, t1);
    if t2 < 1.0 {
        star.blend(low, t2)
    } else {
        star
    }
}

/// Scaling limiter for one point value with floors `eps_rho`, `eps_p`.
pub fn scaling_limit_point(high: &ConservedState, low: &ConservedState, eps_rho: f64, eps_p: f64, gas: GasModel) -> ConservedState {
    let (t1, t2) = scaling_thetas(high, low, eps_rho, eps_p, gas);
    apply_scaling(high, low, t1, t2)
}

/// Floors `min(1e-13, rho(low))`, `min(1e-13, p(low))` of a first-order state.
#[inline]
pub fn floors(low: &ConservedState, gas: GasModel) -> (f64, f64) {
    (EPS_FLOOR.min(low.rho()), EPS_FLOOR.min(low.pressure(gas)))
}

/// Scaling limiter toward `low` with floors from [`floors`], followed by the round-off retry
/// when the limited state still misses the floors. Returns the state and the retry level used
/// (`None` when no retry was needed), or `None` if every retry fails.
pub fn scaling_limit_retry(
    high: &ConservedState,
    low: &ConservedState,
    gas: GasModel,
) -> Option<(ConservedState, Option<u32>)> {
    let (er, ep) = floors(low, gas);
    let (t1, t2) = scaling_thetas(high, low, er, ep, gas);
    let lim = apply_scaling(high, low, t1, t2);
    if is_admissible(&lim, er, ep, gas) {
        return Some((lim, None));
    }
    let t1_of = |m| if t1 < 1.0 { shrink(t1, m) } else { 1.0 };
    retry_shrink(|m| apply_scaling(high, low, t1_of(m), shrink(t2, m)), |v| is_admissible(v, er, ep, gas))
        .map(|(v, m)| (v, Some(m)))
}

/// Pulls a recovered cell-center value toward the (admissible) cell average.
pub fn limit_cell_center(
    center: &ConservedState,
    avg: &ConservedState,
    gas: GasModel,
) -> Option<(ConservedState, Option<u32>)> {
    scaling_limit_retry(center, avg, gas)
}

/// Retry coefficient `max(0, theta0 - 2^m 1e-8)`.
#[inline]
pub fn shrink(theta0: f64, m: u32) -> f64 {
    (theta0 - 2f64.powi(m as i32) * RETRY_DECREMENT).max(0.0)
}

/// Round-off retry: evaluates `attempt(m)` for `m = 0..10` until `ok` accepts the result.
/// Returns the accepted value and the `m` that produced it.
pub fn retry_shrink<T>(mut attempt: impl FnMut(u32) -> T, ok: impl Fn(&T) -> bool) -> Option<(T, u32)> {
    (0..RETRY_STEPS).find_map(|m| {
        let v = attempt(m);
        ok(&v).then_some((v, m))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{fill_ghosts, init_dofs, BoundaryPolicy, Mesh2D};
    use crate::physics::tests::random_state;
    use crate::physics::{conserved_of_primitive, PrimitiveState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gas() -> GasModel {
        GasModel::new(5.0 / 3.0).unwrap()
    }

    fn field(ic: &dyn Fn(f64, f64) -> PrimitiveState, bc: &BoundaryPolicy) -> DoFField {
        let mesh = Mesh2D::new(8, 8, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        let mut f = init_dofs(ic, mesh, gas()).unwrap();
        fill_ghosts(&mut f, bc, 0.0, gas()).unwrap();
        f
    }

    #[test]
    fn sensor_uniform_is_transparent() {
        let w = PrimitiveState::new(1.0, [0.3, 0.2, 0.0], [0.5, 0.1, 0.0], 1.0);
        let f = field(&|_, _| w, &BoundaryPolicy::periodic());
        let s = shock_sensor(&f, 5.0, gas()).unwrap();
        assert!(s.theta_x.iter().chain(&s.theta_y).chain(&s.theta_cell).all(|&t| t == 1.0));
        assert_eq!(s.active_edges(), 0);
    }

    #[test]
    fn ducros_compression_and_expansion() {
        let comp = |x: f64, _y: f64| PrimitiveState::new(1.0, [-x, 0.0, 0.0], [0.0; 3], 1.0);
        let f = field(&comp, &BoundaryPolicy::outflow());
        let ind = sensor_indicators(&f, 3, 3, gas()).unwrap();
        assert!((ind.phi2 - 1.0).abs() < 1e-12);
        let exp = |x: f64, _y: f64| PrimitiveState::new(1.0, [x, 0.0, 0.0], [0.0; 3], 1.0);
        let f = field(&exp, &BoundaryPolicy::outflow());
        assert_eq!(sensor_indicators(&f, 3, 3, gas()).unwrap().phi2, 0.0);
    }

    #[test]
    fn sensor_in_unit_interval_and_cell_min() {
        let pi = std::f64::consts::PI;
        let ic = |x: f64, y: f64| {
            let p = if x * x + y * y < 0.2 { 10.0 } else { 0.1 };
            PrimitiveState::new(1.0, [-(pi * x).sin(), -(pi * y).sin(), 0.0], [0.3, 0.1 * x, 0.0], p)
        };
        let f = field(&ic, &BoundaryPolicy::outflow());
        let s = shock_sensor(&f, 2.0, gas()).unwrap();
        assert!(s.theta_x.iter().chain(&s.theta_y).all(|&t| t > 0.0 && t <= 1.0));
        assert!(s.active_edges() > 0);
        let nx = 8;
        for j in 0..8 {
            for i in 0..8 {
                let m = s.theta_x[i + 9 * j].min(s.theta_x[i + 1 + 9 * j]).min(s.theta_y[i + nx * j]).min(s.theta_y[i + nx * (j + 1)]);
                assert_eq!(s.theta_cell[i + nx * j], m);
            }
        }
    }

    #[test]
    fn blend_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let a = random_state(&mut rng, gas());
            let b = random_state(&mut rng, gas());
            assert_eq!(sensor_blend(&a, &b, 1.0), a);
            let mid = sensor_blend(&a, &b, 0.5);
            for k in 0..8 {
                assert!((mid[k] - 0.5 * (a[k] + b[k])).abs() <= 1e-15 * (a[k].abs() + b[k].abs()));
            }
            let near = sensor_blend(&a, &b, 1e-300);
            for k in 0..8 {
                assert!((near[k] - b[k]).abs() <= 1e-15 * (1.0 + b[k].abs()));
            }
        }
    }

    fn thermal(rho: f64, p: f64) -> ConservedState {
        conserved_of_primitive(&PrimitiveState::new(rho, [0.0; 3], [0.0; 3], p), gas())
    }

    #[test]
    fn source_theta_examples() {
        assert_eq!(pp_source_theta(&thermal(1.0, 1.0), &thermal(1.0, 0.5), 1e-13, gas()), 1.0);
        let t = pp_source_theta(&thermal(1.0, 1.0), &thermal(1.0, -1.0), 0.0, gas());
        assert!((t - 0.5).abs() < 1e-15);
    }

    #[test]
    fn source_theta_concavity_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = gas();
        for _ in 0..10_000 {
            let llf = random_state(&mut rng, g);
            let mut src = llf;
            for k in 1..8 {
                src[k] += rng.gen_range(-3.0..3.0);
            }
            let eps = EPS_FLOOR.min(llf.pressure(g));
            let t = pp_source_theta(&llf, &src, eps, g);
            let lim = src.blend(&llf, t);
            assert!(lim.pressure(g) >= eps * (1.0 - 1e-9) - 1e-12 * llf.energy().abs(), "{t}");
        }
    }

    #[test]
    fn pressure_root_linear_case() {
        let g = gas();
        let base = thermal(1.0, 2.0);
        let eps = 1e-3;
        // Only energy changes: p(r) = 2 - 3 r * (gamma - 1) * (2 / (gamma - 1)) / 2 ... linear in r.
        let mut inc = ConservedState::ZERO;
        inc[7] = -base.energy() * 1.5;
        let r = smallest_positive_pressure_root(&base, &inc, eps, g).unwrap();
        let exact = (2.0 - eps) / (2.0 * 1.5);
        assert!((r - exact).abs() < 1e-14, "{r} {exact}");
        assert!((base + inc * r).pressure(g) >= eps);
        assert_eq!(smallest_positive_pressure_root(&base, &ConservedState::ZERO, eps, g).unwrap(), 1.0);
    }

    fn bisection_oracle(base: &ConservedState, inc: &ConservedState, eps: f64, g: GasModel) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (*base + *inc * mid).pressure(g) >= eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn pressure_root_matches_bisection() {
        let g = gas();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut n = 0;
        while n < 2000 {
            let base = random_state(&mut rng, g);
            let target = random_state(&mut rng, g);
            let mut inc = target - base;
            inc[0] = inc[0].max(-0.5 * base.rho());
            inc[7] -= rng.gen_range(0.0..2.0) * base.energy();
            let eps = 1e-6;
            if (base + inc).pressure(g) >= eps || (base + inc).rho() <= 0.0 {
                continue;
            }
            n += 1;
            let r = smallest_positive_pressure_root(&base, &inc, eps, g).unwrap();
            let oracle = bisection_oracle(&base, &inc, eps, g);
            assert!((r - oracle).abs() < 1e-10, "{r} {oracle}");
            assert!((base + inc * r).pressure(g) >= eps);
        }
    }

    #[test]
    fn lambda_examples() {
        let g = gas();
        let lim1 = thermal(1.0, 1.0);
        let small = thermal(0.01, 0.01) * 0.1;
        let h = [small, small, small, small];
        assert_eq!(pp_lambda_candidates(&lim1, &h, 1e-13, 1e-13, g).unwrap(), [1.0; 4]);
        // Single negative density increment with margin |rho(H_L)| / 2.
        let eps = 1e-13;
        let mut hl = ConservedState::ZERO;
        hl[0] = -2.0 * (lim1.rho() - eps);
        let lam = pp_lambda_candidates(&lim1, &[hl, ConservedState::ZERO, ConservedState::ZERO, ConservedState::ZERO], eps, eps, g)
            .unwrap();
        assert!((lam[0] - 0.5).abs() < 1e-11, "{lam:?}");
        assert_eq!(lam[1..], [1.0; 3]);
    }

    #[test]
    fn edge_thetas() {
        let nx = 3;
        let ny = 4;
        let lam = vec![[1.0; 4]; nx * ny];
        let (tx, ty) = pp_edge_thetas(&lam, nx, ny, true, false);
        assert!(tx.iter().chain(&ty).all(|&t| t == 1.0));
        let mut lam = vec![[1.0; 4]; nx * ny];
        lam[0][1] = 0.3;
        lam[1][0] = 0.7;
        lam[2][1] = 0.2;
        let (tx, _) = pp_edge_thetas(&lam, nx, ny, true, false);
        assert_eq!(tx[1], 0.3);
        assert_eq!(tx[0], 0.2);
        assert_eq!(tx[3], 0.2);
        let (tx, _) = pp_edge_thetas(&lam, nx, ny, false, false);
        assert_eq!(tx[0], 1.0);
        assert_eq!(tx[3], 0.2);
    }

    #[test]
    fn edge_thetas_mirror_symmetry() {
        let (nx, ny) = (5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let lam: Vec<[f64; 4]> = (0..nx * ny).map(|_| [rng.gen(), rng.gen(), rng.gen(), rng.gen()]).collect();
        // Mirror in x: cell i -> nx-1-i, L <-> R.
        let mut mir = lam.clone();
        for j in 0..ny {
            for i in 0..nx {
                let l = lam[i + nx * j];
                mir[nx - 1 - i + nx * j] = [l[1], l[0], l[2], l[3]];
            }
        }
        let (tx, ty) = pp_edge_thetas(&lam, nx, ny, false, false);
        let (mx, my) = pp_edge_thetas(&mir, nx, ny, false, false);
        for j in 0..ny {
            for f in 0..=nx {
                assert_eq!(tx[f + (nx + 1) * j], mx[nx - f + (nx + 1) * j]);
            }
        }
        for f in 0..=ny {
            for i in 0..nx {
                assert_eq!(ty[i + nx * f], my[nx - 1 - i + nx * f]);
            }
        }
    }

    #[test]
    fn scaling_examples() {
        let g = gas();
        let low = thermal(1.0, 1.0);
        let high = thermal(2.0, 3.0);
        assert_eq!(scaling_limit_point(&high, &low, 1e-13, 1e-13, g), high);
        let eps = 1e-3;
        let low = thermal(2.0 * eps, 1.0);
        let mut high = thermal(1.0, 1.0);
        high[0] = -0.5;
        let (t1, _) = scaling_thetas(&high, &low, eps, 1e-13, g);
        assert!((t1 - eps / (2.0 * eps + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn scaling_randomized_admissible() {
        let g = gas();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let low = random_state(&mut rng, g);
            let mut high = random_state(&mut rng, g);
            high[0] *= rng.gen_range(-1.0..1.0);
            high[7] *= rng.gen_range(-1.0..1.0);
            let (er, ep) = floors(&low, g);
            let out = scaling_limit_point(&high, &low, er, ep, g);
            let (t1, t2) = scaling_thetas(&high, &low, er, ep, g);
            let ok = is_admissible(&out, er, ep, g);
            let retried = retry_shrink(
                |m| apply_scaling(&high, &low, shrink(t1, m), shrink(t2, m)),
                |u| is_admissible(u, er, ep, g),
            );
            assert!(ok || retried.is_some(), "{high:?} {low:?}");
        }
    }

    #[test]
    fn center_limiting() {
        let g = gas();
        let avg = thermal(1.0, 1.0);
        let ok = thermal(0.9, 0.8);
        assert_eq!(limit_cell_center(&ok, &avg, g), Some((ok, None)));
        let mut bad = thermal(1.2, 1.0);
        bad[4] = 3.0;
        bad[5] = -1.0;
        assert!(bad.pressure(g) < 0.0);
        let (out, retry) = limit_cell_center(&bad, &avg, g).unwrap();
        assert!(out.pressure(g) >= 1e-13 * (1.0 - 1e-6));
        assert_eq!(retry, None);
        let (t1, t2) = scaling_thetas(&bad, &avg, 1e-13, 1e-13, g);
        assert_eq!(t1, 1.0);
        for k in 4..7 {
            assert!((out[k] - (t2 * bad[k] + (1.0 - t2) * avg[k])).abs() < 1e-15);
        }
    }

    #[test]
    fn retry_recovers_high_mach_state() {
        let g = GasModel::new(1.4).unwrap();
        let high = ConservedState([1.398344494130834, 1.6e-16, 1118.7502192311754, 0.0, 2.4e-17, 141.4212528168262, 0.0, 457529.91940372036]);
        let low = ConservedState([1.3983146620342555, 1.7e-16, 1118.7264856581348, 0.0, 1.7e-17, 141.42135897501808, 0.0, 457521.3399916266]);
        assert!(high.pressure(g) < 0.0 && low.pressure(g) > 0.3);
        let (v, retry) = scaling_limit_retry(&high, &low, g).unwrap();
        assert!(v.pressure(g) >= 1e-13);
        assert!(retry.is_some());
    }

    #[test]
    fn retry_examples() {
        let (v, m) = retry_shrink(|m| m, |_| true).unwrap();
        assert_eq!((v, m), (0, 0));
        assert_eq!(shrink(5e-9, 0), 0.0);
        let target = 1.0 - 3e-8;
        let (v, m) = retry_shrink(|m| shrink(1.0, m), |t| *t <= target).unwrap();
        assert_eq!(m, 2);
        assert!(v <= target);
        assert!(retry_shrink(|m| m, |_| false).is_none());
    }
}
