//! Area functions, `G*` functions and weighted Hardy norms.

use crate::dyadic::{haar_coefficients, max_generation_for, DyadicLattice};
use crate::error::{Error, Result};
use crate::fft::{apply_multiplier, norm};
use crate::grid::{extend_even, restrict, sidewise_even, Grid, GridFunction, Side};
use crate::weights::Weight;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cone {
    Free,
    /// Excludes `y` with `x_n y_n < 0`.
    Neumann,
}

/// Geometric times `t_m = t_min 2^{m/M}` with weight `ln 2 / M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_min: f64,
    pub per_octave: usize,
    pub t_values: Vec<f64>,
}

impl TimeGrid {
    pub fn new(grid: &Grid, t_min: f64, t_max: f64, per_octave: usize) -> Result<Self> {
        let h = grid.cell_width();
        if t_min < h * (1.0 - 1e-12) {
            return Err(Error::Parameter(format!("t_min = {t_min} is below the cell width {h}")));
        }
        if t_max > 2.0 * grid.halfwidth * (1.0 + 1e-12) || t_max < t_min || per_octave == 0 {
            return Err(Error::Parameter(format!("invalid time range [{t_min}, {t_max}]")));
        }
        let mut t_values = Vec::new();
        let mut m = 0;
        loop {
            let t = t_min * 2f64.powf(m as f64 / per_octave as f64);
            if t > t_max * (1.0 + 1e-12) {
                break;
            }
            t_values.push(t);
            m += 1;
        }
        Ok(TimeGrid { t_min, per_octave, t_values })
    }

    /// `t ∈ [h, L]` with eight steps per octave.
    pub fn standard(grid: &Grid) -> Self {
        Self::new(grid, grid.cell_width(), grid.halfwidth, 8).expect("valid standard range")
    }

    pub fn step_weight(&self) -> f64 {
        std::f64::consts::LN_2 / self.per_octave as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Generator {
    /// `t²Δ e^{-t²Δ}`.
    HeatQt,
    /// `φ_t *` with β = 0 the first Gaussian derivative along `x_n`, β = 1 the Laplacian of a Gaussian.
    Phi { beta: u8 },
}

impl Generator {
    /// `G_t f` on a full grid through its Fourier multiplier.
    pub fn field(&self, f: &GridFunction, t: f64) -> Result<GridFunction> {
        let n = f.grid.dim;
        let g = *self;
        apply_multiplier(f, move |xi| {
            let r = norm(xi) * t;
            match g {
                Generator::HeatQt => Complex64::new(r * r * (-r * r).exp(), 0.0),
                Generator::Phi { beta: 0 } => Complex64::new(0.0, t * xi[n - 1] * (-0.5 * r * r).exp()),
                Generator::Phi { .. } => Complex64::new(r * r * (-0.5 * r * r).exp(), 0.0),
            }
        })
    }
}

/// `G_t f` on a full grid, using `f_{±,e}` on each side for the Neumann cone.
fn generator_field(f: &GridFunction, gen: Generator, cone: Cone, t: f64) -> Result<Vec<f64>> {
    match cone {
        Cone::Free => Ok(gen.field(f, t)?.values),
        Cone::Neumann => {
            let up = gen.field(&sidewise_even(f, Side::Upper)?, t)?;
            let lo = gen.field(&sidewise_even(f, Side::Lower)?, t)?;
            let g = f.grid;
            let half = g.points_per_axis / 2;
            Ok((0..g.len())
                .map(|i| if g.global_index(i)[g.dim - 1] >= half { up.values[i] } else { lo.values[i] })
                .collect())
        }
    }
}

/// For every `x`, `Σ_{|x-y|<t, cone} e(y) hⁿ` on a full grid.
pub fn cone_sums(grid: &Grid, e: &[f64], t: f64, cone: Cone) -> Vec<f64> {
    let n = grid.points_per_axis;
    let h = grid.cell_width();
    let hv = grid.cell_volume();
    let half = n / 2;
    let side_range = |k: usize| -> (usize, usize) {
        match cone {
            Cone::Free => (0, n),
            Cone::Neumann if k >= half => (half, n),
            Cone::Neumann => (0, half),
        }
    };
    let mut r = 0usize;
    while ((r + 1) as f64 * h) < t && r + 1 < n {
        r += 1;
    }
    if grid.dim == 1 {
        let mut pre = vec![0.0; n + 1];
        for i in 0..n {
            pre[i + 1] = pre[i] + e[i];
        }
        return (0..n)
            .map(|i| {
                let (a, b) = side_range(i);
                let lo = i.saturating_sub(r).max(a);
                let hi = (i + r + 1).min(b);
                (pre[hi] - pre[lo]) * hv
            })
            .collect();
    }
    let mut pre = vec![0.0; n * (n + 1)];
    for i in 0..n {
        for j in 0..n {
            pre[i * (n + 1) + j + 1] = pre[i * (n + 1) + j] + e[i * n + j];
        }
    }
    let widths: Vec<usize> = (0..=r)
        .map(|d| {
            let mut k = 0usize;
            while (((d * d + (k + 1) * (k + 1)) as f64) * h * h) < t * t && k + 1 < n {
                k += 1;
            }
            k
        })
        .collect();
    (0..n * n)
        .into_par_iter()
        .map(|x| {
            let (i, j) = (x / n, x % n);
            let (a, b) = side_range(j);
            let mut acc = 0.0;
            for ii in i.saturating_sub(r)..(i + r + 1).min(n) {
                let d = i.abs_diff(ii);
                let k = widths[d];
                let lo = j.saturating_sub(k).max(a);
                let hi = (j + k + 1).min(b);
                if hi > lo {
                    acc += pre[ii * (n + 1) + hi] - pre[ii * (n + 1) + lo];
                }
            }
            acc * hv
        })
        .collect()
}

fn lift(f: &GridFunction, cone: Cone) -> Result<(GridFunction, Option<Side>)> {
    if f.grid.is_full() {
        return Ok((f.clone(), None));
    }
    if cone != Cone::Neumann {
        return Err(Error::Domain("half-space functions use the Neumann cone".into()));
    }
    let side = if f.grid.domain == crate::grid::Domain::UpperHalf { Side::Upper } else { Side::Lower };
    Ok((extend_even(f)?, Some(side)))
}

/// `S(f)(x) = (Σ_m Σ_{|x-y|<t_m, cone} |G_{t_m} f(y)|² hⁿ (ln 2/M) / t_mⁿ)^{1/2}`.
pub fn area_function(f: &GridFunction, gen: Generator, cone: Cone, tg: &TimeGrid) -> Result<GridFunction> {
    let (full, side) = lift(f, cone)?;
    let g = full.grid;
    if tg.t_min < g.cell_width() * (1.0 - 1e-12) {
        return Err(Error::Parameter("t_min is below the cell width".into()));
    }
    let mut acc = vec![0.0; g.len()];
    for &t in &tg.t_values {
        let field = generator_field(&full, gen, cone, t)?;
        let e: Vec<f64> = field.iter().map(|v| v * v).collect();
        let s = cone_sums(&g, &e, t, cone);
        let w = tg.step_weight() / t.powi(g.dim as i32);
        for (a, v) in acc.iter_mut().zip(s) {
            *a += v * w;
        }
    }
    let out = GridFunction::new(g, acc.into_iter().map(f64::sqrt).collect())?;
    match side {
        Some(s) => restrict(&out, s),
        None => Ok(out),
    }
}

/// `G*(h)(x) = (Σ_m Σ_y (t/(t+|x-y|))^λ |G_{t_m} h(y)|² hⁿ (ln 2/M)/t_mⁿ)^{1/2}`.
pub fn g_star(h: &GridFunction, gen: Generator, lambda_exponent: f64, tg: &TimeGrid) -> Result<GridFunction> {
    let g = h.grid;
    if !g.is_full() {
        return Err(Error::Domain("G* is evaluated on full-space grids".into()));
    }
    if tg.t_min < g.cell_width() * (1.0 - 1e-12) {
        return Err(Error::Parameter("t_min is below the cell width".into()));
    }
    let pts = g.points();
    let hv = g.cell_volume();
    let d = g.dim;
    let mut acc = vec![0.0; g.len()];
    for &t in &tg.t_values {
        let field = gen.field(h, t)?;
        let e: Vec<f64> = field.values.iter().map(|v| v * v * hv).collect();
        let w = tg.step_weight() / t.powi(d as i32);
        let row: Vec<f64> = (0..g.len())
            .into_par_iter()
            .map(|i| {
                let mut s = 0.0;
                for (j, y) in pts.iter().enumerate() {
                    let r = ((0..d).map(|a| (pts[i][a] - y[a]).powi(2)).sum::<f64>()).sqrt();
                    s += (t / (t + r)).powf(lambda_exponent) * e[j];
                }
                s
            })
            .collect();
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v * w;
        }
    }
    GridFunction::new(g, acc.into_iter().map(f64::sqrt).collect())
}

/// `S_ψ(f) = (Σ_Q Σ_ε |⟨f,h_Q^ε⟩|² 1_{2Q}/|Q|)^{1/2}`, with 2Q clipped to the base cube.
pub fn haar_square_function(f: &GridFunction, lattice: &DyadicLattice) -> Result<GridFunction> {
    let g = lattice.grid;
    let n = g.points_per_axis;
    let coeffs = haar_coefficients(f, lattice)?;
    let mut acc = vec![0.0; g.len()];
    for (q, _, c) in &coeffs.entries {
        if *c == 0.0 {
            continue;
        }
        let b = lattice.cell_box(q);
        let v = c * c / b.measure(&g);
        for cell in b.dilate_clipped(2, n).cells(n) {
            acc[g.flat_index(cell)] += v;
        }
    }
    GridFunction::new(g, acc.into_iter().map(f64::sqrt).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum HardyFlavor {
    Classical { beta: u8 },
    HeatFree,
    HeatNeumann,
    HaarWavelet,
}

impl HardyFlavor {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "heat-free" => HardyFlavor::HeatFree,
            "heat-neumann" => HardyFlavor::HeatNeumann,
            "haar" | "haar-wavelet" => HardyFlavor::HaarWavelet,
            "classical-dog" | "classical-0" => HardyFlavor::Classical { beta: 0 },
            "classical-log" | "classical-1" => HardyFlavor::Classical { beta: 1 },
            _ => return Err(Error::Parameter(format!("unknown square-function flavor {s}"))),
        })
    }
}

/// Square function of the chosen flavor.
pub fn square_function(f: &GridFunction, flavor: HardyFlavor, tg: &TimeGrid) -> Result<GridFunction> {
    match flavor {
        HardyFlavor::Classical { beta } => area_function(f, Generator::Phi { beta }, Cone::Free, tg),
        HardyFlavor::HeatFree => area_function(f, Generator::HeatQt, Cone::Free, tg),
        HardyFlavor::HeatNeumann => area_function(f, Generator::HeatQt, Cone::Neumann, tg),
        HardyFlavor::HaarWavelet => {
            let l = DyadicLattice::unshifted(&f.grid, max_generation_for(&f.grid))?;
            haar_square_function(f, &l)
        }
    }
}

/// `‖S(f)‖_{L¹_w}`.
pub fn hardy_norm(f: &GridFunction, flavor: HardyFlavor, w: &Weight, tg: &TimeGrid) -> Result<f64> {
    if w.grid() != f.grid {
        return Err(Error::Domain("weight and function grids differ".into()));
    }
    let s = square_function(f, flavor, tg)?;
    Ok(s.values.iter().zip(&w.values.values).map(|(a, b)| a * b).sum::<f64>() * f.grid.cell_volume())
}
