//! Heat semigroups, `t²Δe^{-t²Δ}`, `ψ(t√Δ)`, Riesz transforms and commutators on grids.

use crate::error::{Error, Result};
use crate::fft::{apply_multiplier, norm};
use crate::grid::{Grid, GridFunction};
use crate::kernels::{eval_kernel_regular, psi_multiplier, Boundary, KernelFamily, KernelSpec};
use crate::linalg::{largest_singular_value, lp_norm_ascent, NormCertificate};
use crate::weights::Weight;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest point count for which dense matrices are assembled.
pub const DENSE_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Quadrature,
    FourierMultiplier,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorHandle {
    Identity,
    Semigroup { boundary: Boundary, t: f64, backend: Backend },
    Qt { t: f64, backend: Backend },
    Psi { t: f64, backend: Backend },
    /// Component `j` is 1-based.
    Riesz { boundary: Boundary, j: usize, backend: Backend },
    Commutator { b: GridFunction, inner: Box<OperatorHandle> },
}

impl OperatorHandle {
    pub fn riesz(boundary: Boundary, j: usize) -> Self {
        OperatorHandle::Riesz { boundary, j, backend: Backend::Quadrature }
    }

    pub fn commutator(b: GridFunction, inner: OperatorHandle) -> Result<Self> {
        if !matches!(inner, OperatorHandle::Riesz { .. }) {
            return Err(Error::Backend("commutators are formed with Riesz transforms only".into()));
        }
        Ok(OperatorHandle::Commutator { b, inner: Box::new(inner) })
    }

    /// Handle for a CLI kernel name.
    pub fn from_kernel(family: KernelFamily, t: f64, backend: Backend) -> Self {
        match family {
            KernelFamily::HeatFree => OperatorHandle::Semigroup { boundary: Boundary::Free, t, backend },
            KernelFamily::HeatNeumann => OperatorHandle::Semigroup { boundary: Boundary::Neumann, t, backend },
            KernelFamily::HeatDirichlet => OperatorHandle::Semigroup { boundary: Boundary::Dirichlet, t, backend },
            KernelFamily::Qt => OperatorHandle::Qt { t, backend },
            KernelFamily::RieszFree(j) => OperatorHandle::Riesz { boundary: Boundary::Free, j, backend },
            KernelFamily::RieszNeumann(j) => OperatorHandle::Riesz { boundary: Boundary::Neumann, j, backend },
            KernelFamily::RieszDirichlet(j) => OperatorHandle::Riesz { boundary: Boundary::Dirichlet, j, backend },
        }
    }

    fn kernel(&self, dim: usize) -> Result<Option<KernelSpec<f64>>> {
        let fam = match *self {
            OperatorHandle::Semigroup { boundary, t, .. } => {
                let f = match boundary {
                    Boundary::Free => KernelFamily::HeatFree,
                    Boundary::Neumann => KernelFamily::HeatNeumann,
                    Boundary::Dirichlet => KernelFamily::HeatDirichlet,
                };
                return KernelSpec::new(f, dim, t).map(Some);
            }
            OperatorHandle::Qt { t, .. } => return KernelSpec::new(KernelFamily::Qt, dim, t).map(Some),
            OperatorHandle::Riesz { boundary, j, .. } => match boundary {
                Boundary::Free => KernelFamily::RieszFree(j),
                Boundary::Neumann => KernelFamily::RieszNeumann(j),
                Boundary::Dirichlet => KernelFamily::RieszDirichlet(j),
            },
            _ => return Ok(None),
        };
        KernelSpec::riesz(fam, dim).map(Some)
    }

    fn backend(&self) -> Option<Backend> {
        match *self {
            OperatorHandle::Semigroup { backend, .. }
            | OperatorHandle::Qt { backend, .. }
            | OperatorHandle::Psi { backend, .. }
            | OperatorHandle::Riesz { backend, .. } => Some(backend),
            _ => None,
        }
    }

    fn boundary(&self) -> Boundary {
        match *self {
            OperatorHandle::Semigroup { boundary, .. } | OperatorHandle::Riesz { boundary, .. } => boundary,
            _ => Boundary::Free,
        }
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        if let OperatorHandle::Commutator { b, inner } = self {
            if b.grid != *grid {
                return Err(Error::Domain("commutator symbol lives on a different grid".into()));
            }
            return inner.validate(grid);
        }
        if let Some(Backend::FourierMultiplier) = self.backend() {
            if self.boundary() != Boundary::Free || !grid.is_full() {
                return Err(Error::Backend(
                    "Fourier multipliers apply only to free operators on full-space grids".into(),
                ));
            }
        }
        if !grid.is_full() && self.boundary() == Boundary::Free && !matches!(self, OperatorHandle::Identity) {
            return Err(Error::Domain("free operators need a full-space grid".into()));
        }
        if let OperatorHandle::Psi { backend: Backend::Quadrature, .. } = self {
            if grid.dim != 1 {
                return Err(Error::Backend("ψ(t√Δ) quadrature is available for n = 1 only".into()));
            }
        }
        Ok(())
    }
}

/// Exact integral of the periodized `ψ(t√Δ)` kernel over each cell, indexed by offset.
fn psi_cell_weights(grid: &Grid, t: f64) -> Vec<f64> {
    let n = grid.points_per_axis;
    let h = grid.cell_width();
    let period = 2.0 * grid.halfwidth;
    let overlap = |c: f64, r: f64| -> f64 {
        let lo = (c - 0.5 * h).max(-r);
        let hi = (c + 0.5 * h).min(r);
        (hi - lo).max(0.0)
    };
    (0..n)
        .map(|k| {
            let d = k as f64 * h;
            let mut acc = 0.0;
            let images = (t / period).ceil() as i64 + 1;
            for m in -images..=images {
                let c = d + m as f64 * period;
                acc += overlap(c, 0.5 * t) - 0.5 * overlap(c, t);
            }
            acc / t
        })
        .collect()
}

fn multiplier(op: &OperatorHandle) -> impl Fn(&[f64]) -> Complex64 + '_ {
    move |xi: &[f64]| {
        let r = norm(xi);
        match *op {
            OperatorHandle::Semigroup { t, .. } => Complex64::new((-t * r * r).exp(), 0.0),
            OperatorHandle::Qt { t, .. } => Complex64::new(t * t * r * r * (-t * t * r * r).exp(), 0.0),
            OperatorHandle::Psi { t, .. } => Complex64::new(psi_multiplier(t * r), 0.0),
            OperatorHandle::Riesz { j, .. } => {
                if r == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, xi[j - 1] / r)
                }
            }
            _ => Complex64::new(1.0, 0.0),
        }
    }
}

/// Applies the discretized operator.
pub fn apply(op: &OperatorHandle, f: &GridFunction) -> Result<GridFunction> {
    let grid = f.grid;
    op.validate(&grid)?;
    match op {
        OperatorHandle::Identity => Ok(f.clone()),
        OperatorHandle::Commutator { b, inner } => commutator_apply(b, inner, f),
        _ => match op.backend().expect("leaf operator") {
            Backend::FourierMultiplier => apply_multiplier(f, multiplier(op)),
            Backend::Quadrature => {
                if let OperatorHandle::Psi { t, .. } = op {
                    let w = psi_cell_weights(&grid, *t);
                    let n = grid.points_per_axis;
                    let values = (0..n)
                        .into_par_iter()
                        .map(|i| (0..n).map(|j| w[(i + n - j) % n] * f.values[j]).sum())
                        .collect();
                    return GridFunction::new(grid, values);
                }
                let spec = op.kernel(grid.dim)?.expect("kernel operator");
                let pts = grid.points();
                let hv = grid.cell_volume();
                let d = grid.dim;
                let values = (0..grid.len())
                    .into_par_iter()
                    .map(|i| {
                        let mut acc = 0.0;
                        for (j, y) in pts.iter().enumerate() {
                            acc += eval_kernel_regular(&spec, &pts[i][..d], &y[..d]) * f.values[j];
                        }
                        acc * hv
                    })
                    .collect();
                GridFunction::new(grid, values)
            }
        },
    }
}

/// `b·T f − T(b f)`.
pub fn commutator_apply(b: &GridFunction, op: &OperatorHandle, f: &GridFunction) -> Result<GridFunction> {
    if !matches!(op, OperatorHandle::Riesz { .. }) {
        return Err(Error::Backend("commutators are formed with Riesz transforms only".into()));
    }
    if b.grid != f.grid {
        return Err(Error::Domain("symbol and function grids differ".into()));
    }
    let tf = apply(op, f)?;
    let bf = b.zip_with(f, |x, y| x * y)?;
    let tbf = apply(op, &bf)?;
    let values = b.values.iter().zip(&tf.values).zip(&tbf.values).map(|((b, t), s)| b * t - s).collect();
    GridFunction::new(f.grid, values)
}

/// Dense matrix of the operator on `grid`.
pub fn dense_matrix(op: &OperatorHandle, grid: &Grid) -> Result<DMatrix<f64>> {
    op.validate(grid)?;
    let m = grid.len();
    if m > DENSE_CAP {
        return Err(Error::Size(format!("{m} points exceed the dense cap {DENSE_CAP}")));
    }
    match op {
        OperatorHandle::Identity => Ok(DMatrix::identity(m, m)),
        OperatorHandle::Commutator { b, inner } => {
            let k = dense_matrix(inner, grid)?;
            Ok(DMatrix::from_fn(m, m, |i, j| (b.values[i] - b.values[j]) * k[(i, j)]))
        }
        _ => match op.backend().expect("leaf") {
            Backend::Quadrature if !matches!(op, OperatorHandle::Psi { .. }) => {
                let spec = op.kernel(grid.dim)?.expect("kernel operator");
                let pts = grid.points();
                let hv = grid.cell_volume();
                let d = grid.dim;
                let rows: Vec<Vec<f64>> = (0..m)
                    .into_par_iter()
                    .map(|i| (0..m).map(|j| eval_kernel_regular(&spec, &pts[i][..d], &pts[j][..d]) * hv).collect())
                    .collect();
                Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
            }
            _ => {
                let cols: Vec<Vec<f64>> = (0..m)
                    .into_par_iter()
                    .map(|j| {
                        let mut e = GridFunction::zeros(*grid);
                        e.values[j] = 1.0;
                        apply(op, &e).map(|c| c.values)
                    })
                    .collect::<Result<_>>()?;
                Ok(DMatrix::from_fn(m, m, |i, j| cols[j][i]))
            }
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    SvdExact,
    IterativeAscent,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OperatorNorm {
    pub value: f64,
    pub p: f64,
    pub certificate: NormCertificate,
}

pub const ASCENT_RESTARTS: usize = 10;
pub const ASCENT_MAX_ITER: usize = 500;
pub const ASCENT_TOL: f64 = 1e-8;

/// `D_λ^{1/p} M D_μ^{-1/p}` with `D = diag(w hⁿ)`.
pub fn scaled_matrix(op: &OperatorHandle, grid: &Grid, mu: &Weight, lambda: &Weight, p: f64) -> Result<DMatrix<f64>> {
    if mu.grid() != *grid || lambda.grid() != *grid {
        return Err(Error::Domain("weights live on a different grid than the operator".into()));
    }
    let m = dense_matrix(op, grid)?;
    let hv = grid.cell_volume();
    let dl: Vec<f64> = lambda.values.values.iter().map(|w| (w * hv).powf(1.0 / p)).collect();
    let dm: Vec<f64> = mu.values.values.iter().map(|w| (w * hv).powf(-1.0 / p)).collect();
    Ok(DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| dl[i] * m[(i, j)] * dm[j]))
}

/// Discrete `‖op : L^p_μ → L^p_λ‖`.
pub fn weighted_operator_norm(
    op: &OperatorHandle,
    grid: &Grid,
    mu: &Weight,
    lambda: &Weight,
    p: f64,
    method: NormMethod,
    seed: u64,
) -> Result<OperatorNorm> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Parameter(format!("p = {p} must lie in (1, ∞)")));
    }
    let a = scaled_matrix(op, grid, mu, lambda, p)?;
    let (value, certificate) = match method {
        NormMethod::SvdExact => {
            if p != 2.0 {
                return Err(Error::Parameter("the SVD method needs p = 2".into()));
            }
            largest_singular_value(&a)
        }
        NormMethod::IterativeAscent => lp_norm_ascent(&a, p, ASCENT_RESTARTS, ASCENT_MAX_ITER, ASCENT_TOL, seed),
    };
    Ok(OperatorNorm { value, p, certificate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Domain;

    #[test]
    fn heat_preserves_constants() {
        let g = Grid::full(1, 1.0, 64).unwrap();
        let op = OperatorHandle::Semigroup { boundary: Boundary::Free, t: 0.3, backend: Backend::FourierMultiplier };
        let out = apply(&op, &GridFunction::constant(g, 1.0)).unwrap();
        assert!(out.values.iter().all(|v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn multiplier_backend_rejects_reflected_families() {
        let g = Grid::full(1, 1.0, 16).unwrap();
        let op = OperatorHandle::Riesz { boundary: Boundary::Neumann, j: 1, backend: Backend::FourierMultiplier };
        assert!(matches!(apply(&op, &GridFunction::zeros(g)), Err(Error::Backend(_))));
        let h = g.with_domain(Domain::UpperHalf);
        let free = OperatorHandle::riesz(Boundary::Free, 1);
        assert!(apply(&free, &GridFunction::zeros(h)).is_err());
    }

    #[test]
    fn commutator_with_constant_vanishes() {
        let g = Grid::full(1, 1.0, 32).unwrap();
        let f = GridFunction::from_fn(g, |x| (-x[0] * x[0] * 10.0).exp()).unwrap();
        let b = GridFunction::constant(g, 2.5);
        let c = commutator_apply(&b, &OperatorHandle::riesz(Boundary::Neumann, 1), &f).unwrap();
        assert!(c.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn psi_weights_integrate_to_zero() {
        let g = Grid::full(1, 2.0, 64).unwrap();
        let w = psi_cell_weights(&g, 0.37);
        assert!(w.iter().sum::<f64>().abs() < 1e-14);
    }
}
