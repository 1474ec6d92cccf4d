#![allow(dead_code)]

use afmhd::grid::{fill_ghosts, DoFField, Mesh2D};
use afmhd::limiters::pp_lambda_candidates;
use afmhd::llf::{llf_average_update, llf_point_update};
use afmhd::physics::{conserved_of_primitive, is_admissible};
use afmhd::scheme::compute_dt;
use afmhd::{BoundaryPolicy, ConservedState, GasModel, PrimitiveState};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_primitive(rng: &mut impl Rng) -> PrimitiveState {
    let rho = 10f64.powf(rng.gen_range(-3.0..1.0));
    let p = 10f64.powf(rng.gen_range(-4.0..1.0));
    let mut v = [0.0; 3];
    let mut b = [0.0; 3];
    for k in 0..3 {
        v[k] = rng.gen_range(-3.0..3.0);
        b[k] = rng.gen_range(-3.0..3.0);
    }
    PrimitiveState::new(rho, v, b, p)
}

pub fn random_state(rng: &mut impl Rng, gas: GasModel) -> ConservedState {
    conserved_of_primitive(&random_primitive(rng), gas)
}

pub fn random_gas(rng: &mut impl Rng) -> GasModel {
    GasModel::new([5.0 / 3.0, 1.4, 2.0][rng.gen_range(0..3)]).unwrap()
}

/// Periodic field with independent random admissible states at every average and node.
pub fn random_field(rng: &mut impl Rng, n: usize, gas: GasModel) -> DoFField {
    let mesh = Mesh2D::new(n, n, (0.0, 1.0), (0.0, 1.0)).unwrap();
    let mut f = DoFField::uniform(mesh, random_state(rng, gas));
    for (i, j) in f.cells().collect::<Vec<_>>() {
        *f.avg_mut(i, j) = random_state(rng, gas);
    }
    let (ni, nj) = mesh.lattice_extent();
    for j in 0..nj {
        for i in 0..ni {
            *f.node_mut(i, j) = random_state(rng, gas);
        }
    }
    fill_ghosts(&mut f, &BoundaryPolicy::periodic(), 0.0, gas).unwrap();
    f
}

/// Outcome of a randomized first-order positivity check.
#[derive(Debug, Default)]
pub struct OracleReport {
    pub neighborhoods: usize,
    pub outputs: usize,
    pub failures: usize,
}

/// One forward-Euler step of every first-order fallback update on `count` random periodic
/// neighborhoods at the largest admissible step (CFL number 1); every output must be admissible
/// with zero floors.
pub fn first_order_oracle(count: usize, seed: u64) -> OracleReport {
    let mut r = rng(seed);
    let mut rep = OracleReport::default();
    for _ in 0..count {
        let gas = random_gas(&mut r);
        let n = 4;
        let f = random_field(&mut r, n, gas);
        rep.neighborhoods += 1;
        let dt = compute_dt(&f, 1.0, gas).unwrap().dt;
        match llf_average_update(&f, dt, gas) {
            Ok(avgs) => {
                rep.outputs += avgs.len();
                rep.failures += avgs.iter().filter(|u| !is_admissible(u, 0.0, 0.0, gas)).count();
            }
            Err(_) => {
                rep.outputs += n * n;
                rep.failures += 1;
            }
        }
        for (i, j) in f.dof_nodes().collect::<Vec<_>>() {
            rep.outputs += 1;
            match llf_point_update(&f, i, j, dt, gas) {
                Ok(u) if is_admissible(&u, 0.0, 0.0, gas) => {}
                _ => rep.failures += 1,
            }
        }
    }
    rep
}

/// Samples `samples` coefficient vectors uniformly inside the box returned for each of `cells`
/// random cells and counts states below the floors.
pub fn lambda_box_violations(cells: usize, samples: usize, seed: u64) -> (usize, usize) {
    let mut r = rng(seed);
    let (er, ep) = (1e-13, 1e-13);
    let mut violations = 0;
    let mut limited = 0;
    for _ in 0..cells {
        let gas = random_gas(&mut r);
        let lim1 = random_state(&mut r, gas);
        let scale = 10f64.powf(r.gen_range(-0.5..1.0));
        let h: [ConservedState; 4] = std::array::from_fn(|_| {
            let d = random_state(&mut r, gas) - lim1;
            d * (0.25 * scale * r.gen_range(0.0..1.0))
        });
        let lam = pp_lambda_candidates(&lim1, &h, er, ep, gas).unwrap();
        if lam.iter().any(|&l| l < 1.0) {
            limited += 1;
        }
        for _ in 0..samples {
            let mut u = lim1;
            for (q, hq) in h.iter().enumerate() {
                u += *hq * (lam[q] * r.gen_range(0.0..=1.0));
            }
            if !is_admissible(&u, er, ep, gas) {
                violations += 1;
            }
        }
    }
    (violations, limited)
}
