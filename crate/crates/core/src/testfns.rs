//! Seeded test-function families.

use crate::dyadic::{haar_function, signatures, DyadicLattice};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::weights::{exp_log_bridge, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `Σ c_Q h_Q^ε` over `terms` random cubes with side ≥ 2 cells, `c ~ N(0,1)·√|Q|·⟨w⟩_Q`.
pub fn random_haar_sum(lattice: &DyadicLattice, w: &Weight, terms: usize, seed: u64) -> Result<GridFunction> {
    let grid = lattice.grid;
    let usable: Vec<_> = lattice.cubes().filter(|q| lattice.side_cells(q.generation) >= 2).collect();
    if usable.is_empty() {
        return Err(Error::Parameter("no cube carries a Haar function".into()));
    }
    let sigs = signatures(grid.dim);
    let mut r = rng(seed);
    let mut acc = vec![0.0; grid.len()];
    for _ in 0..terms {
        let q = usable[r.gen_range(0..usable.len())];
        let sig = sigs[r.gen_range(0..sigs.len())];
        let b = lattice.cell_box(&q);
        let z: f64 = r.sample(StandardNormal);
        let c = z * b.measure(&grid).sqrt() * w.average(&b);
        let h = haar_function(lattice, &q, sig)?;
        for (a, v) in acc.iter_mut().zip(&h.values) {
            *a += c * v;
        }
    }
    GridFunction::new(grid, acc)
}

/// `Σ a_k φ((x − c_k)/r_k)` with `φ(x) = exp(−1/(1−|x|²))` on the unit ball.
pub fn smooth_bumps(grid: Grid, count: usize, seed: u64) -> Result<GridFunction> {
    let mut r = rng(seed);
    let l = grid.halfwidth;
    let bumps: Vec<([f64; 2], f64, f64)> = (0..count)
        .map(|_| {
            let mut c = [0.0; 2];
            for v in c.iter_mut().take(grid.dim) {
                *v = r.gen_range(-0.8 * l..0.8 * l);
            }
            (c, r.gen_range(0.05 * l..0.4 * l), r.sample(StandardNormal))
        })
        .collect();
    GridFunction::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|(c, rad, a)| {
                let s: f64 = (0..grid.dim).map(|k| ((x[k] - c[k]) / rad).powi(2)).sum();
                if s < 1.0 {
                    a * (-1.0 / (1.0 - s)).exp()
                } else {
                    0.0
                }
            })
            .sum()
    })
}

/// `b / ‖b‖_∞`, or `None` for the zero function.
pub fn normalize_sup(b: &GridFunction) -> Option<GridFunction> {
    let m = b.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    (m > 0.0).then(|| b.map(|v| v / m).expect("finite"))
}

/// `e^{δ b}` for a unit-sup random Haar sum `b`.
pub fn random_weight(lattice: &DyadicLattice, terms: usize, delta: f64, seed: u64) -> Result<Weight> {
    let unit = Weight::unit(lattice.grid);
    let b = random_haar_sum(lattice, &unit, terms, seed)?;
    match normalize_sup(&b) {
        Some(b) => exp_log_bridge(&b, delta),
        None => Ok(unit),
    }
}
