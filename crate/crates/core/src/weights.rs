//! Weights: A^p constants, the reflected class A^p_{Δ_N}, Bloom and conjugate weights.

use crate::dyadic::{max_generation_for, LatticeFamily};
use crate::error::{Error, Result};
use crate::grid::{sidewise_even, CellBox, Domain, Grid, GridFunction, Side};
use serde::{Deserialize, Serialize};

/// Summed-area table over full-grid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct MassTable {
    dim: usize,
    n: usize,
    table: Vec<f64>,
    cell_volume: f64,
}

impl MassTable {
    pub fn new(f: &GridFunction) -> Self {
        let g = f.grid;
        let n = g.points_per_axis;
        let table = if g.dim == 1 {
            let mut t = vec![0.0; n + 1];
            for i in 0..n {
                t[i + 1] = t[i] + f.values[i];
            }
            t
        } else {
            let mut t = vec![0.0; (n + 1) * (n + 1)];
            for i in 0..n {
                let mut row = 0.0;
                for j in 0..n {
                    row += f.values[i * n + j];
                    t[(i + 1) * (n + 1) + j + 1] = t[i * (n + 1) + j + 1] + row;
                }
            }
            t
        };
        MassTable { dim: g.dim, n, table, cell_volume: g.cell_volume() }
    }

    /// `Σ_B v hⁿ` for a box inside `[0,N)ⁿ`.
    pub fn mass(&self, b: &CellBox) -> f64 {
        let s = if self.dim == 1 {
            let lo = b.lo[0] as usize;
            self.table[lo + b.len[0]] - self.table[lo]
        } else {
            let m = self.n + 1;
            let (i0, j0) = (b.lo[0] as usize, b.lo[1] as usize);
            let (i1, j1) = (i0 + b.len[0], j0 + b.len[1]);
            self.table[i1 * m + j1] - self.table[i0 * m + j1] - self.table[i1 * m + j0]
                + self.table[i0 * m + j0]
        };
        s * self.cell_volume
    }
}

/// Strictly positive grid function with a cached mass table.
#[derive(Debug, Clone)]
pub struct Weight {
    pub values: GridFunction,
    table: Option<MassTable>,
}

impl PartialEq for Weight {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values
    }
}

impl Weight {
    pub fn new(values: GridFunction) -> Result<Self> {
        if let Some((i, v)) = values.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::Weight(format!("weight value {v} at index {i} is not positive")));
        }
        let table = values.grid.is_full().then(|| MassTable::new(&values));
        Ok(Weight { values, table })
    }

    pub fn unit(grid: Grid) -> Self {
        Self::new(GridFunction::constant(grid, 1.0)).expect("positive")
    }

    pub fn grid(&self) -> Grid {
        self.values.grid
    }

    pub fn at(&self, i: usize) -> f64 {
        self.values.values[i]
    }

    /// `w(B) = Σ_B w hⁿ`.
    pub fn mass(&self, b: &CellBox) -> f64 {
        match &self.table {
            Some(t) if b.is_contiguous(self.values.grid.points_per_axis) => t.mass(b),
            _ => self.values.box_sum(b),
        }
    }

    pub fn mass_direct(&self, b: &CellBox) -> f64 {
        self.values.box_sum(b)
    }

    pub fn average(&self, b: &CellBox) -> f64 {
        self.mass(b) / b.measure(&self.values.grid)
    }

    pub fn powf(&self, e: f64) -> Result<Weight> {
        Weight::new(self.values.map(|v| v.powf(e))?)
    }

    pub fn restrict(&self, side: Side) -> Result<Weight> {
        Weight::new(crate::grid::restrict(&self.values, side)?)
    }

    /// `w_{±,e}`.
    pub fn sidewise_even(&self, side: Side) -> Result<Weight> {
        Weight::new(sidewise_even(&self.values, side)?)
    }

    pub fn min(&self) -> f64 {
        self.values.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Parameter(format!("p = {p} must lie in (1, ∞)")));
    }
    Ok(())
}

/// `⟨w⟩_B ⟨w^{-1/(p-1)}⟩_B^{p-1}` on one box.
pub fn ap_quotient(w: &Weight, sigma: &Weight, p: f64, b: &CellBox) -> f64 {
    w.average(b) * sigma.average(b).powf(p - 1.0)
}

/// Maximising box and the value of the A^p supremum over a lattice family.
pub fn ap_constant_with_argmax(w: &Weight, p: f64, family: &LatticeFamily) -> Result<(f64, CellBox)> {
    check_p(p)?;
    let sigma = w.powf(-1.0 / (p - 1.0))?;
    let mut best = (f64::NEG_INFINITY, CellBox::whole(family.grid()));
    for b in family.contiguous_boxes() {
        let q = ap_quotient(w, &sigma, p, &b);
        if q > best.0 {
            best = (q, b);
        }
    }
    Ok(best)
}

pub fn ap_constant(w: &Weight, p: f64, family: &LatticeFamily) -> Result<f64> {
    Ok(ap_constant_with_argmax(w, p, family)?.0)
}

/// `sup_Q ⟨w⟩_Q / min_Q w`.
pub fn a1_constant(w: &Weight, family: &LatticeFamily) -> f64 {
    let grid = w.grid();
    family
        .contiguous_boxes()
        .iter()
        .map(|b| {
            let m = b
                .flat_cells(&grid)
                .iter()
                .map(|&i| w.at(i))
                .fold(f64::INFINITY, f64::min);
            w.average(b) / m
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `[w_{+,e}]_{A^p} + [w_{-,e}]_{A^p}` over the standard lattice family.
pub fn ap_deltan_constant(w: &Weight, p: f64) -> Result<f64> {
    let (a, b) = ap_deltan_parts(w, p)?;
    Ok(a + b)
}

pub fn ap_deltan_parts(w: &Weight, p: f64) -> Result<(f64, f64)> {
    check_p(p)?;
    let grid = w.grid();
    if !grid.is_full() {
        return Err(Error::Domain("A^p_{Δ_N} needs a full-space weight".into()));
    }
    let family = LatticeFamily::standard(&grid, max_generation_for(&grid))?;
    let up = ap_constant(&w.sidewise_even(Side::Upper)?, p, &family)?;
    let lo = ap_constant(&w.sidewise_even(Side::Lower)?, p, &family)?;
    Ok((up, lo))
}

/// `w(2Q)/w(Q)`.
pub fn doubling_ratio(w: &Weight, q: &CellBox) -> Result<f64> {
    let n = w.grid().points_per_axis;
    let d = q.dilate(2);
    if !q.is_contiguous(n) || !d.is_contiguous(n) {
        return Err(Error::Domain("2Q leaves the grid box".into()));
    }
    Ok(w.mass(&d) / w.mass(q))
}

/// `μ, λ, p` and the derived Bloom weight `ν = μ^{1/p} λ^{-1/p}`.
#[derive(Debug, Clone)]
pub struct WeightTriple {
    pub mu: Weight,
    pub lambda: Weight,
    pub p: f64,
    pub nu: Weight,
}

impl WeightTriple {
    pub fn new(mu: Weight, lambda: Weight, p: f64) -> Result<Self> {
        check_p(p)?;
        let nu = Weight::new(mu.values.zip_with(&lambda.values, |m, l| m.powf(1.0 / p) * l.powf(-1.0 / p))?)?;
        Ok(WeightTriple { mu, lambda, p, nu })
    }

    pub fn p_conjugate(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// `λ' = λ^{-1/(p-1)}`.
    pub fn lambda_conjugate(&self) -> Result<Weight> {
        self.lambda.powf(-1.0 / (self.p - 1.0))
    }
}

/// `w^{1-p'}`.
pub fn conjugate_weight(w: &Weight, p: f64) -> Result<Weight> {
    check_p(p)?;
    let pc = p / (p - 1.0);
    w.powf(1.0 - pc)
}

/// Analytic and file-backed weight descriptions as they appear in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub kind: WeightKind,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Unit,
    Power,
    Prop33,
    Grid,
    ExpBmo,
}

impl WeightSpec {
    pub fn unit() -> Self {
        WeightSpec { kind: WeightKind::Unit, alpha: 0.0, delta: 0.0, file: None }
    }

    pub fn power(alpha: f64) -> Self {
        WeightSpec { kind: WeightKind::Power, alpha, delta: 0.0, file: None }
    }

    pub fn prop33(alpha: f64) -> Self {
        WeightSpec { kind: WeightKind::Prop33, alpha, delta: 0.0, file: None }
    }

    /// Builds the weight on `grid`; file-backed kinds read via `load`.
    pub fn build(&self, grid: Grid, load: &dyn Fn(&str) -> Result<GridFunction>) -> Result<Weight> {
        match self.kind {
            WeightKind::Unit => Ok(Weight::unit(grid)),
            WeightKind::Power => power_weight(grid, self.alpha),
            WeightKind::Prop33 => prop33_weight(grid, self.alpha),
            WeightKind::Grid => {
                let f = load(self.file.as_deref().ok_or_else(|| Error::Parameter("grid weight needs a file".into()))?)?;
                if f.grid != grid {
                    return Err(Error::Domain("weight file grid differs from experiment grid".into()));
                }
                Weight::new(f)
            }
            WeightKind::ExpBmo => {
                let b = load(self.file.as_deref().ok_or_else(|| Error::Parameter("exp_bmo weight needs a file".into()))?)?;
                if b.grid != grid {
                    return Err(Error::Domain("exp_bmo file grid differs from experiment grid".into()));
                }
                exp_log_bridge(&b, self.delta)
            }
        }
    }
}

/// Exact average of `|s|^α` over `[a, b]` with `a, b` of one sign.
pub fn power_cell_average(a: f64, b: f64, alpha: f64) -> f64 {
    let (lo, hi) = if b <= 0.0 { (-b, -a) } else { (a, b) };
    let e = alpha + 1.0;
    (hi.powf(e) - lo.powf(e)) / (e * (hi - lo))
}

/// Weight depending on the last coordinate, sampled as exact cell averages of `profile`.
fn last_axis_weight(grid: Grid, avg: impl Fn(f64, f64) -> f64) -> Result<Weight> {
    let h = grid.cell_width();
    let values = (0..grid.len())
        .map(|i| {
            let k = grid.global_index(i)[grid.dim - 1];
            let a = grid.edge(k);
            avg(a, a + h)
        })
        .collect();
    Weight::new(GridFunction::new(grid, values)?)
}

/// `|x_n|^α`, as exact cell averages; requires `α > -1`.
pub fn power_weight(grid: Grid, alpha: f64) -> Result<Weight> {
    if alpha <= -1.0 {
        return Err(Error::Weight(format!("|x_n|^{alpha} is not locally integrable")));
    }
    last_axis_weight(grid, |a, b| power_cell_average(a, b, alpha))
}

/// `x_n^α` on `x_n > 0` and `1` on `x_n < 0`.
pub fn prop33_weight(grid: Grid, alpha: f64) -> Result<Weight> {
    if alpha <= -1.0 {
        return Err(Error::Weight(format!("x_n^{alpha} is not locally integrable")));
    }
    last_axis_weight(grid, |a, b| if a >= 0.0 { power_cell_average(a, b, alpha) } else { 1.0 })
}

/// `e^{δ b}` as a weight.
pub fn exp_log_bridge(b: &GridFunction, delta: f64) -> Result<Weight> {
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!("δ = {delta} must be positive")));
    }
    let values: Vec<f64> = b.values.iter().map(|v| (delta * v).exp()).collect();
    if values.iter().any(|v| !v.is_finite() || *v == 0.0) {
        return Err(Error::Range(format!("e^(δb) leaves the f64 range at δ = {delta}")));
    }
    Weight::new(GridFunction::new(b.grid, values)?)
}

pub fn log_weight(w: &Weight) -> Result<GridFunction> {
    w.values.map(f64::ln)
}

/// Largest `δ ∈ (0, hi]` (by bisection) with `[e^{δb}]_{A^p_{Δ_N}} ≤ threshold`.
pub fn max_delta_for_ap(b: &GridFunction, p: f64, threshold: f64, hi: f64, iters: usize) -> Result<(f64, Vec<(f64, f64)>)> {
    let mut curve = Vec::new();
    let mut eval = |d: f64| -> Result<f64> {
        let v = match exp_log_bridge(b, d) {
            Ok(w) => ap_deltan_constant(&w, p)?,
            Err(Error::Range(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        curve.push((d, v));
        Ok(v)
    };
    if eval(hi)? <= threshold {
        return Ok((hi, curve));
    }
    let (mut lo, mut up) = (0.0, hi);
    for _ in 0..iters {
        let mid = 0.5 * (lo + up);
        if eval(mid)? <= threshold {
            lo = mid;
        } else {
            up = mid;
        }
    }
    Ok((lo, curve))
}

/// Box `[lo, hi)` in cells along the last axis and the full range on the others.
pub fn slab_box(grid: &Grid, lo: usize, hi: usize) -> CellBox {
    let n = grid.points_per_axis;
    if grid.dim == 1 {
        CellBox::new(1, [lo as i64, 0], [hi - lo, 1])
    } else {
        CellBox::new(2, [0, lo as i64], [n, hi - lo])
    }
}

pub fn full_grid_of(grid: &Grid) -> Grid {
    grid.with_domain(Domain::FullSpace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_weight_constants() {
        let g = Grid::full(1, 1.0, 32).unwrap();
        let w = Weight::unit(g);
        let fam = LatticeFamily::standard(&g, 5).unwrap();
        for p in [1.5, 2.0, 3.0] {
            assert_eq!(ap_constant(&w, p, &fam).unwrap(), 1.0);
        }
        assert_eq!(ap_deltan_constant(&w, 2.0).unwrap(), 2.0);
        let q = CellBox::cube(1, [8, 0], 8);
        assert_eq!(doubling_ratio(&w, &q).unwrap(), 2.0);
        assert!(doubling_ratio(&w, &CellBox::cube(1, [0, 0], 8)).is_err());
        assert!(ap_constant(&w, 1.0, &fam).is_err());
    }

    #[test]
    fn cell_average_is_exact_integral() {
        let g = Grid::full(1, 2.0, 64).unwrap();
        let w = power_weight(g, 0.5).unwrap();
        let total = w.mass(&CellBox::whole(&g));
        assert!((total - 2.0 * (2.0f64).powf(1.5) / 1.5).abs() < 1e-12);
    }

    #[test]
    fn mass_table_matches_direct() {
        let g = Grid::full(2, 1.0, 16).unwrap();
        let w = Weight::new(GridFunction::from_fn(g, |x| 1.0 + x[0] * x[0] + x[1].abs()).unwrap()).unwrap();
        for (lo0, lo1, l0, l1) in [(0, 0, 16, 16), (3, 5, 7, 2), (8, 8, 4, 4)] {
            let b = CellBox::new(2, [lo0, lo1], [l0, l1]);
            let a = w.mass(&b);
            assert!((a - w.mass_direct(&b)).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn exp_log_round_trip() {
        let g = Grid::full(1, 1.0, 32).unwrap();
        let w = prop33_weight(g, 0.5).unwrap();
        let b = log_weight(&w).unwrap();
        let back = exp_log_bridge(&b, 1.0).unwrap();
        for (a, c) in back.values.values.iter().zip(&w.values.values) {
            assert!((a - c).abs() <= 1e-14 * c);
        }
        let z = exp_log_bridge(&GridFunction::zeros(g), 1.0).unwrap();
        assert_eq!(ap_deltan_constant(&z, 2.0).unwrap(), 2.0);
        let big = GridFunction::constant(g, 1e3);
        assert!(matches!(exp_log_bridge(&big, 1.0), Err(Error::Range(_))));
    }
}
