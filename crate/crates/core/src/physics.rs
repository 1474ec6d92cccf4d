//! Pointwise ideal-MHD algebra.
//!
//! States are stored in conservative form `(rho, rho v1, rho v2, rho v3, B1, B2, B3, E)`.
//! Pressure is always derived from the conserved vector; nothing is cached.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::error::{Location, Result, SolverError};

pub const NVARS: usize = 8;

pub const RHO: usize = 0;
pub const MOM: usize = 1;
pub const MAG: usize = 4;
pub const ENERGY: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::X, Axis::Y];

    /// 0 for x, 1 for y.
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

/// Conserved MHD state, also used for fluxes and other 8-vectors.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConservedState(pub [f64; NVARS]);

impl ConservedState {
    pub const ZERO: ConservedState = ConservedState([0.0; NVARS]);

    #[inline]
    pub fn rho(&self) -> f64 {
        self.0[RHO]
    }

    #[inline]
    pub fn mom(&self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }

    #[inline]
    pub fn mag(&self) -> [f64; 3] {
        [self.0[4], self.0[5], self.0[6]]
    }

    #[inline]
    pub fn energy(&self) -> f64 {
        self.0[ENERGY]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Thermal pressure; meaningful only for `rho > 0`.
    #[inline]
    pub fn pressure(&self, gas: GasModel) -> f64 {
        let u = &self.0;
        let m2 = u[1] * u[1] + u[2] * u[2] + u[3] * u[3];
        let b2 = u[4] * u[4] + u[5] * u[5] + u[6] * u[6];
        (gas.gamma - 1.0) * (u[7] - 0.5 * m2 / u[0] - 0.5 * b2)
    }

    /// Total pressure `p + |B|^2 / 2`.
    #[inline]
    pub fn total_pressure(&self, gas: GasModel) -> f64 {
        let b = self.mag();
        self.pressure(gas) + 0.5 * dot(&b, &b)
    }

    /// Convex combination `theta * self + (1 - theta) * other`.
    #[inline]
    pub fn blend(&self, other: &ConservedState, theta: f64) -> ConservedState {
        let mut out = [0.0; NVARS];
        for k in 0..NVARS {
            out[k] = theta * self.0[k] + (1.0 - theta) * other.0[k];
        }
        ConservedState(out)
    }
}

impl Index<usize> for ConservedState {
    type Output = f64;
    #[inline]
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

impl IndexMut<usize> for ConservedState {
    #[inline]
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.0[k]
    }
}

impl Add for ConservedState {
    type Output = ConservedState;
    #[inline]
    fn add(mut self, rhs: ConservedState) -> ConservedState {
        self += rhs;
        self
    }
}

impl AddAssign for ConservedState {
    #[inline]
    fn add_assign(&mut self, rhs: ConservedState) {
        for k in 0..NVARS {
            self.0[k] += rhs.0[k];
        }
    }
}

impl Sub for ConservedState {
    type Output = ConservedState;
    #[inline]
    fn sub(mut self, rhs: ConservedState) -> ConservedState {
        self -= rhs;
        self
    }
}

impl SubAssign for ConservedState {
    #[inline]
    fn sub_assign(&mut self, rhs: ConservedState) {
        for k in 0..NVARS {
            self.0[k] -= rhs.0[k];
        }
    }
}

impl Mul<f64> for ConservedState {
    type Output = ConservedState;
    #[inline]
    fn mul(mut self, a: f64) -> ConservedState {
        for v in self.0.iter_mut() {
            *v *= a;
        }
        self
    }
}

impl Mul<ConservedState> for f64 {
    type Output = ConservedState;
    #[inline]
    fn mul(self, u: ConservedState) -> ConservedState {
        u * self
    }
}

impl Neg for ConservedState {
    type Output = ConservedState;
    #[inline]
    fn neg(self) -> ConservedState {
        self * -1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrimitiveState {
    pub rho: f64,
    pub vel: [f64; 3],
    pub mag: [f64; 3],
    pub pressure: f64,
}

impl PrimitiveState {
    pub fn new(rho: f64, vel: [f64; 3], mag: [f64; 3], pressure: f64) -> Self {
        PrimitiveState { rho, vel, mag, pressure }
    }

    /// From the tuple ordering `(rho, v1, v2, v3, B1, B2, B3, p)`.
    pub fn from_tuple(t: [f64; 8]) -> Self {
        PrimitiveState {
            rho: t[0],
            vel: [t[1], t[2], t[3]],
            mag: [t[4], t[5], t[6]],
            pressure: t[7],
        }
    }

    pub fn to_tuple(&self) -> [f64; 8] {
        [
            self.rho, self.vel[0], self.vel[1], self.vel[2], self.mag[0], self.mag[1], self.mag[2],
            self.pressure,
        ]
    }
}

/// Perfect-gas equation of state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GasModel {
    pub gamma: f64,
}

impl GasModel {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(SolverError::Config(format!("adiabatic index must exceed 1, got {gamma}")));
        }
        Ok(GasModel { gamma })
    }
}

#[inline]
pub fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn primitive_of_conserved(u: &ConservedState, gas: GasModel) -> Result<PrimitiveState> {
    let rho = u.rho();
    if !(rho > 0.0) {
        return Err(SolverError::NonpositiveDensity { rho });
    }
    let m = u.mom();
    Ok(PrimitiveState {
        rho,
        vel: [m[0] / rho, m[1] / rho, m[2] / rho],
        mag: u.mag(),
        pressure: u.pressure(gas),
    })
}

pub fn conserved_of_primitive(w: &PrimitiveState, gas: GasModel) -> ConservedState {
    let v = w.vel;
    let b = w.mag;
    let energy = w.pressure / (gas.gamma - 1.0) + 0.5 * w.rho * dot(&v, &v) + 0.5 * dot(&b, &b);
    ConservedState([
        w.rho,
        w.rho * v[0],
        w.rho * v[1],
        w.rho * v[2],
        b[0],
        b[1],
        b[2],
        energy,
    ])
}

/// Physical flux along `axis`. Requires `rho > 0`.
pub fn flux(axis: Axis, u: &ConservedState, gas: GasModel) -> Result<ConservedState> {
    if !(u.rho() > 0.0) {
        return Err(SolverError::NonpositiveDensity { rho: u.rho() });
    }
    Ok(flux_unchecked(axis, u, gas))
}

/// Flux without the density check, for hot loops whose states were validated upstream.
#[inline]
pub fn flux_unchecked(axis: Axis, u: &ConservedState, gas: GasModel) -> ConservedState {
    let s = &u.0;
    let rho = s[0];
    let v = [s[1] / rho, s[2] / rho, s[3] / rho];
    let b = [s[4], s[5], s[6]];
    let b2 = dot(&b, &b);
    let m2 = s[1] * v[0] + s[2] * v[1] + s[3] * v[2];
    let p = (gas.gamma - 1.0) * (s[7] - 0.5 * m2 - 0.5 * b2);
    let pt = p + 0.5 * b2;
    let vb = dot(&v, &b);
    let l = axis.index();
    let vn = v[l];
    let bn = b[l];
    let mut f = [0.0; NVARS];
    f[0] = s[1 + l];
    for k in 0..3 {
        f[1 + k] = s[1 + l] * v[k] - bn * b[k];
        f[4 + k] = vn * b[k] - bn * v[k];
    }
    f[1 + l] += pt;
    // The normal induction component is identically zero; avoid round-off residue.
    f[4 + l] = 0.0;
    f[7] = (s[7] + pt) * vn - bn * vb;
    ConservedState(f)
}

/// Godunov-Powell source direction `(0, B, v, v.B)`.
pub fn powell_psi(u: &ConservedState) -> Result<ConservedState> {
    if !(u.rho() > 0.0) {
        return Err(SolverError::NonpositiveDensity { rho: u.rho() });
    }
    Ok(powell_psi_unchecked(u))
}

#[inline]
pub fn powell_psi_unchecked(u: &ConservedState) -> ConservedState {
    let s = &u.0;
    let rho = s[0];
    let v = [s[1] / rho, s[2] / rho, s[3] / rho];
    ConservedState([
        0.0,
        s[4],
        s[5],
        s[6],
        v[0],
        v[1],
        v[2],
        v[0] * s[4] + v[1] * s[5] + v[2] * s[6],
    ])
}

fn require_admissible_primitive(w: &PrimitiveState) -> Result<()> {
    if w.rho > 0.0 && w.pressure > 0.0 {
        Ok(())
    } else {
        Err(SolverError::InadmissibleState { location: Location::Point, rho: w.rho, p: w.pressure })
    }
}

/// Fast magnetosonic speed along `axis`.
pub fn fast_speed(axis: Axis, w: &PrimitiveState, gas: GasModel) -> Result<f64> {
    require_admissible_primitive(w)?;
    Ok(fast_speed_raw(gas.gamma * w.pressure / w.rho, &w.mag, w.rho, axis))
}

#[inline]
fn fast_speed_raw(c2: f64, b: &[f64; 3], rho: f64, axis: Axis) -> f64 {
    let b2 = dot(b, b) / rho;
    let bn = b[axis.index()];
    let s = c2 + b2;
    let disc = (s * s - 4.0 * c2 * bn * bn / rho).max(0.0);
    (0.5 * (s + disc.sqrt())).sqrt()
}

/// Maximal spectral radius `|v_l| + c_f,l` of the flux Jacobian along `axis`.
pub fn spectral_radius(axis: Axis, u: &ConservedState, gas: GasModel) -> Result<f64> {
    let w = primitive_of_conserved(u, gas)?;
    let cf = fast_speed(axis, &w, gas)?;
    Ok(w.vel[axis.index()].abs() + cf)
}

/// Wave-speed data of one state, computed once and reused by the flux splitting and LLF fluxes.
#[derive(Clone, Copy, Debug, Default)]
pub struct WaveData {
    pub sqrt_rho: f64,
    pub vel: [f64; 2],
    pub cf: [f64; 2],
}

impl WaveData {
    /// Returns `None` unless `rho > 0` and `p > 0`.
    #[inline]
    pub fn of(u: &ConservedState, gas: GasModel) -> Option<WaveData> {
        let rho = u.rho();
        if !(rho > 0.0) {
            return None;
        }
        let p = u.pressure(gas);
        if !(p > 0.0) {
            return None;
        }
        let b = u.mag();
        let c2 = gas.gamma * p / rho;
        Some(WaveData {
            sqrt_rho: rho.sqrt(),
            vel: [u[1] / rho, u[2] / rho],
            cf: [fast_speed_raw(c2, &b, rho, Axis::X), fast_speed_raw(c2, &b, rho, Axis::Y)],
        })
    }

    #[inline]
    pub fn radius(&self, axis: Axis) -> f64 {
        let l = axis.index();
        self.vel[l].abs() + self.cf[l]
    }
}

/// LLF flux vector splitting `F± = (F ± alpha U) / 2`.
pub fn llf_split(
    axis: Axis,
    u: &ConservedState,
    alpha: f64,
    gas: GasModel,
) -> Result<(ConservedState, ConservedState)> {
    debug_assert!(
        spectral_radius(axis, u, gas).map_or(true, |r| alpha >= r * (1.0 - 1e-12)),
        "splitting coefficient below the spectral radius"
    );
    let f = flux(axis, u, gas)?;
    Ok(((f + *u * alpha) * 0.5, (f - *u * alpha) * 0.5))
}

/// Wave speed for which the first-order LLF scheme with Godunov-Powell source is positivity preserving.
pub fn pp_alpha(axis: Axis, u: &ConservedState, ut: &ConservedState, gas: GasModel) -> Result<f64> {
    let a = WaveData::of(u, gas).ok_or_else(|| inadmissible(u, gas))?;
    let b = WaveData::of(ut, gas).ok_or_else(|| inadmissible(ut, gas))?;
    Ok(pp_alpha_from(axis, u, &a, ut, &b))
}

fn inadmissible(u: &ConservedState, gas: GasModel) -> SolverError {
    SolverError::InadmissibleState { location: Location::Point, rho: u.rho(), p: u.pressure(gas) }
}

#[inline]
pub(crate) fn pp_alpha_from(
    axis: Axis,
    u: &ConservedState,
    wu: &WaveData,
    ut: &ConservedState,
    wt: &WaveData,
) -> f64 {
    let l = axis.index();
    let sum_sqrt = wu.sqrt_rho + wt.sqrt_rho;
    let roe = (wu.sqrt_rho * wu.vel[l] + wt.sqrt_rho * wt.vel[l]).abs() / sum_sqrt;
    let db = [ut[4] - u[4], ut[5] - u[5], ut[6] - u[6]];
    let jump = dot(&db, &db).sqrt() / sum_sqrt;
    let cf = wu.cf[l].max(wt.cf[l]);
    let star_fwd = wu.vel[l].abs().max(roe) + cf + jump;
    let star_bwd = wt.vel[l].abs().max(roe) + cf + jump;
    wu.radius(axis).max(wt.radius(axis)).max(star_fwd).max(star_bwd)
}

/// `rho >= eps_rho` and `p >= eps_p` (with `rho > 0` so that `p` is defined).
#[inline]
pub fn is_admissible(u: &ConservedState, eps_rho: f64, eps_p: f64, gas: GasModel) -> bool {
    let rho = u.rho();
    if !(rho > 0.0 && rho >= eps_rho) {
        return false;
    }
    let p = u.pressure(gas);
    p >= eps_p && p.is_finite() && u.is_finite()
}
