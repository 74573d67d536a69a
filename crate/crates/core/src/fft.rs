//! Periodic Fourier-multiplier backend on full-space grids.

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Angular frequencies `ξ_k = π k / L` in FFT order; index `N/2` carries `-N/2`.
pub fn frequencies(n: usize, halfwidth: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let kk = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
            std::f64::consts::PI * kk as f64 / halfwidth
        })
        .collect()
}

fn fft_nd(data: &mut [Complex64], n: usize, dim: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let plan = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    if dim == 1 {
        plan.process(data);
        return;
    }
    for row in data.chunks_exact_mut(n) {
        plan.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = data[i * n + j];
        }
        plan.process(&mut col);
        for i in 0..n {
            data[i * n + j] = col[i];
        }
    }
}

/// Real part of `F^{-1}[m(ξ) F f]`.
pub fn apply_multiplier(f: &GridFunction, m: impl Fn(&[f64]) -> Complex64) -> Result<GridFunction> {
    let g = f.grid;
    if !g.is_full() {
        return Err(Error::Backend("Fourier multipliers need a full-space grid".into()));
    }
    let n = g.points_per_axis;
    let xi = frequencies(n, g.halfwidth);
    let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut data, n, g.dim, false);
    if g.dim == 1 {
        for (k, d) in data.iter_mut().enumerate() {
            *d *= m(&[xi[k]]);
        }
    } else {
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] *= m(&[xi[i], xi[j]]);
            }
        }
    }
    fft_nd(&mut data, n, g.dim, true);
    let scale = 1.0 / g.len() as f64;
    GridFunction::new(g, data.iter().map(|c| c.re * scale).collect())
}

pub fn norm(xi: &[f64]) -> f64 {
    xi.iter().map(|v| v * v).sum::<f64>().sqrt()
}
