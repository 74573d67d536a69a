//! Dense operator-norm estimation.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Matrices up to this order use a full SVD; larger ones use power iteration on `AᵀA`.
pub const SVD_LIMIT: usize = 1024;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NormCertificate {
    pub method: String,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
    pub seed: u64,
    pub relative_change: f64,
}

pub fn largest_singular_value(a: &DMatrix<f64>) -> (f64, NormCertificate) {
    if a.nrows().max(a.ncols()) <= SVD_LIMIT {
        let s = a.clone().singular_values();
        let v = s.iter().cloned().fold(0.0, f64::max);
        return (
            v,
            NormCertificate {
                method: "svd".into(),
                iterations: 0,
                restarts: 0,
                converged: true,
                seed: 0,
                relative_change: 0.0,
            },
        );
    }
    let ata = a.transpose() * a;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut x = nalgebra::DVector::from_fn(a.ncols(), |_, _| StandardNormal.sample(&mut rng));
    x /= x.norm();
    let mut lam = 0.0;
    let mut rel = f64::INFINITY;
    let mut it = 0;
    while it < 20_000 {
        it += 1;
        let y = &ata * &x;
        let l = y.norm();
        rel = (l - lam).abs() / l.max(f64::MIN_POSITIVE);
        lam = l;
        x = y / l;
        if rel < 1e-14 {
            break;
        }
    }
    (
        lam.sqrt(),
        NormCertificate {
            method: "power_iteration_gram".into(),
            iterations: it,
            restarts: 1,
            converged: rel < 1e-14,
            seed: 0,
            relative_change: rel,
        },
    )
}

fn lp_norm(v: &nalgebra::DVector<f64>, p: f64) -> f64 {
    v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

fn dual(v: &nalgebra::DVector<f64>, p: f64) -> nalgebra::DVector<f64> {
    v.map(|x| x.signum() * x.abs().powf(p - 1.0))
}

/// Boyd's fixed-point ascent for `‖A‖_{ℓ^p → ℓ^p}`; returns the best ratio found.
pub fn lp_norm_ascent(
    a: &DMatrix<f64>,
    p: f64,
    restarts: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> (f64, NormCertificate) {
    let pc = p / (p - 1.0);
    let at = a.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    let mut total_it = 0;
    let mut all_converged = true;
    let mut last_rel = 0.0;
    for _ in 0..restarts {
        let mut x = nalgebra::DVector::from_fn(a.ncols(), |_, _| StandardNormal.sample(&mut rng));
        x /= lp_norm(&x, p);
        let mut prev = 0.0f64;
        let mut converged = false;
        let mut rel = f64::INFINITY;
        for _ in 0..max_iter {
            total_it += 1;
            let y = a * &x;
            let val = lp_norm(&y, p);
            best = best.max(val);
            rel = (val - prev).abs() / val.max(f64::MIN_POSITIVE);
            if rel < tol {
                converged = true;
                break;
            }
            prev = val;
            let z = &at * dual(&y, p);
            let xn = dual(&z, pc);
            let nx = lp_norm(&xn, p);
            if nx == 0.0 {
                converged = true;
                break;
            }
            x = xn / nx;
        }
        all_converged &= converged;
        last_rel = rel;
    }
    (
        best,
        NormCertificate {
            method: "iterative_ascent".into(),
            iterations: total_it,
            restarts,
            converged: all_converged,
            seed,
            relative_change: last_rel,
        },
    )
}
