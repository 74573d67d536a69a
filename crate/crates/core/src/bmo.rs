//! Weighted BMO norms: classical, John–Nirenberg variants, Haar and heat Carleson norms.

use crate::dyadic::{haar_coefficients, max_generation_for, DyadicLattice, LatticeFamily};
use crate::error::{Error, Result};
use crate::grid::{extend_even, extend_odd, sidewise_even, CellBox, Domain, Grid, GridFunction, Side};
use crate::squarefn::Generator;
use crate::weights::{ap_constant, Weight};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BmoFlavor {
    ClassicalW,
    ClassicalWr { r: f64 },
    CarlesonHaar,
    CarlesonHeatFree,
    CarlesonHeatNeumann,
    /// Neumann heat Carleson norm of a half-space function, with `P` inside the half-space.
    CarlesonHeatNeumannHalf,
    UnweightedHalf,
    OddExtensionHalf,
    EvenExtensionHalf,
}

impl BmoFlavor {
    pub fn parse(s: &str, r: f64) -> Result<Self> {
        Ok(match s {
            "classical-w" => BmoFlavor::ClassicalW,
            "classical-wr" => BmoFlavor::ClassicalWr { r },
            "carleson-haar" => BmoFlavor::CarlesonHaar,
            "carleson-heat-free" => BmoFlavor::CarlesonHeatFree,
            "carleson-heat-neumann" => BmoFlavor::CarlesonHeatNeumann,
            "carleson-heat-neumann-half" => BmoFlavor::CarlesonHeatNeumannHalf,
            "unweighted-half" => BmoFlavor::UnweightedHalf,
            "odd-ext" => BmoFlavor::OddExtensionHalf,
            "even-ext" => BmoFlavor::EvenExtensionHalf,
            _ => return Err(Error::Parameter(format!("unknown BMO flavor {s}"))),
        })
    }

    pub fn is_half(self) -> bool {
        matches!(
            self,
            BmoFlavor::CarlesonHeatNeumannHalf
                | BmoFlavor::UnweightedHalf
                | BmoFlavor::OddExtensionHalf
                | BmoFlavor::EvenExtensionHalf
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmoOptions {
    /// Time steps per octave inside each Whitney slab.
    pub per_octave: usize,
    /// Smallest side, in cells, of the outer cube `P` in Carleson suprema.
    pub min_side_cells: usize,
    /// Include the shifted lattices in suprema.
    pub shifted: bool,
}

impl Default for BmoOptions {
    fn default() -> Self {
        BmoOptions { per_octave: 8, min_side_cells: 4, shifted: true }
    }
}

fn family(grid: &Grid, opts: &BmoOptions) -> Result<LatticeFamily> {
    let k = max_generation_for(grid);
    if opts.shifted {
        LatticeFamily::standard(grid, k)
    } else {
        Ok(LatticeFamily::single(DyadicLattice::unshifted(grid, k)?))
    }
}

fn side_of(grid: &Grid) -> Result<Side> {
    match grid.domain {
        Domain::UpperHalf => Ok(Side::Upper),
        Domain::LowerHalf => Ok(Side::Lower),
        Domain::FullSpace => Err(Error::Domain("half-space BMO flavor needs a half-grid function".into())),
    }
}

/// Weight on the full grid for a half-space flavor: the even extension of the matching side.
fn lift_weight(w: &Weight, side: Side) -> Result<Weight> {
    if w.grid().is_full() {
        w.sidewise_even(side)
    } else {
        Weight::new(extend_even(&w.values)?)
    }
}

/// `sup_B (1/w(B)) Σ_B |f − ⟨f⟩_B|^r w^{1−r} hⁿ`, to the power `1/r`.
fn classical(f: &GridFunction, w: &Weight, r: f64, boxes: &[CellBox]) -> f64 {
    let grid = f.grid;
    let hv = grid.cell_volume();
    let mut best: f64 = 0.0;
    for b in boxes {
        let cells = b.flat_cells(&grid);
        let mean = cells.iter().map(|&i| f.values[i]).sum::<f64>() / cells.len() as f64;
        let mut acc = 0.0;
        for &i in &cells {
            let d = (f.values[i] - mean).abs();
            acc += if r == 1.0 { d } else { d.powf(r) * w.at(i).powf(1.0 - r) };
        }
        best = best.max(acc * hv / w.mass(b));
    }
    best.powf(1.0 / r)
}

fn check_grids(f: &GridFunction, w: &Weight) -> Result<()> {
    if w.grid() != f.grid {
        return Err(Error::Domain("weight and function grids differ".into()));
    }
    Ok(())
}

/// The BMO norm of the requested flavor.
pub fn bmo_norm(f: &GridFunction, w: &Weight, flavor: BmoFlavor, opts: &BmoOptions) -> Result<f64> {
    if flavor.is_half() != !f.grid.is_full() {
        return Err(Error::Domain(format!("flavor {flavor:?} does not match the function's domain")));
    }
    let full = f.grid.with_domain(Domain::FullSpace);
    match flavor {
        BmoFlavor::ClassicalW | BmoFlavor::ClassicalWr { .. } => {
            check_grids(f, w)?;
            let r = if let BmoFlavor::ClassicalWr { r } = flavor { r } else { 1.0 };
            if r < 1.0 {
                return Err(Error::Parameter(format!("r = {r} must be at least 1")));
            }
            Ok(classical(f, w, r, &family(&full, opts)?.contiguous_boxes()))
        }
        BmoFlavor::CarlesonHaar => {
            check_grids(f, w)?;
            carleson_haar(f, w)
        }
        BmoFlavor::CarlesonHeatFree => {
            check_grids(f, w)?;
            carleson_heat(f, w, Generator::HeatQt, false, None, opts)
        }
        BmoFlavor::CarlesonHeatNeumann => {
            check_grids(f, w)?;
            carleson_heat(f, w, Generator::HeatQt, true, None, opts)
        }
        BmoFlavor::CarlesonHeatNeumannHalf => {
            let side = side_of(&f.grid)?;
            let fe = extend_even(f)?;
            carleson_heat(&fe, &lift_weight(w, side)?, Generator::HeatQt, true, Some(side), opts)
        }
        BmoFlavor::UnweightedHalf => {
            let side = side_of(&f.grid)?;
            let fe = extend_even(f)?;
            let n = full.points_per_axis;
            let boxes: Vec<CellBox> = family(&full, opts)?
                .contiguous_boxes()
                .into_iter()
                .filter(|b| b.within_side(side, n))
                .collect();
            Ok(classical(&fe, &Weight::unit(full), 1.0, &boxes))
        }
        BmoFlavor::OddExtensionHalf => {
            let fo = extend_odd(f)?;
            Ok(classical(&fo, &Weight::unit(full), 1.0, &family(&full, opts)?.contiguous_boxes()))
        }
        BmoFlavor::EvenExtensionHalf => {
            let side = side_of(&f.grid)?;
            let fe = extend_even(f)?;
            Ok(classical(&fe, &lift_weight(w, side)?, 1.0, &family(&full, opts)?.contiguous_boxes()))
        }
    }
}

/// `sup_P ((1/w(P)) Σ_{Q⊆P} Σ_ε |⟨f,h_Q^ε⟩|² |Q|/w(Q))^{1/2}` over the unshifted lattice.
pub fn carleson_haar(f: &GridFunction, w: &Weight) -> Result<f64> {
    let grid = f.grid;
    let lattice = DyadicLattice::unshifted(&grid, max_generation_for(&grid))?;
    let coeffs = haar_coefficients(f, &lattice)?;
    let mut s = vec![0.0; lattice.len()];
    for (q, _, c) in &coeffs.entries {
        let b = lattice.cell_box(q);
        s[lattice.id(q)] += c * c * b.measure(&grid) / w.mass(&b);
    }
    for k in (1..=lattice.max_generation).rev() {
        for id in lattice.generation_range(k) {
            let q = lattice.cube(id);
            let parent = lattice.parent(&q).expect("non-root");
            let v = s[id];
            s[lattice.id(&parent)] += v;
        }
    }
    let mut best: f64 = 0.0;
    for id in 0..lattice.len() {
        let b = lattice.cell_box(&lattice.cube(id));
        best = best.max(s[id] / w.mass(&b));
    }
    Ok(best.sqrt())
}

/// Per-generation prefix sums of Whitney-box energies `∬_{Q̂} |G_t f|² tⁿ dy dt/t / w(Q)`.
struct WhitneyTable {
    lattice: DyadicLattice,
    prefix: Vec<Vec<f64>>,
}

impl WhitneyTable {
    fn build(f: &GridFunction, w: &Weight, gen: Generator, neumann: bool, per_octave: usize) -> Result<Self> {
        let grid = f.grid;
        let top = max_generation_for(&grid);
        if top == 0 {
            return Err(Error::GridAlignment("grid too coarse for Whitney boxes".into()));
        }
        let kmax = top - 1;
        let lattice = DyadicLattice::unshifted(&grid, kmax)?;
        let hv = grid.cell_volume();
        let dt = std::f64::consts::LN_2 / per_octave as f64;
        let dim = grid.dim;
        let fields = if neumann {
            Some((sidewise_even(f, Side::Upper)?, sidewise_even(f, Side::Lower)?))
        } else {
            None
        };
        let half = grid.points_per_axis / 2;
        let mut prefix = Vec::with_capacity(kmax as usize + 1);
        for k in 0..=kmax {
            let ell = lattice.sidelength(k);
            let mut energy = vec![0.0; grid.len()];
            for j in 0..per_octave {
                let t = ell * 2f64.powf(-(j as f64) / per_octave as f64);
                let g = match &fields {
                    None => gen.field(f, t)?.values,
                    Some((up, lo)) => {
                        let a = gen.field(up, t)?;
                        let b = gen.field(lo, t)?;
                        (0..grid.len())
                            .map(|i| if grid.global_index(i)[dim - 1] >= half { a.values[i] } else { b.values[i] })
                            .collect()
                    }
                };
                let c = dt * t.powi(dim as i32) * hv;
                for (e, v) in energy.iter_mut().zip(&g) {
                    *e += c * v * v;
                }
            }
            let m = lattice.per_axis(k);
            let mut vals = vec![0.0; lattice.generation_range(k).len()];
            for (local, id) in lattice.generation_range(k).enumerate() {
                let b = lattice.cell_box(&lattice.cube(id));
                let e: f64 = b.flat_cells(&grid).iter().map(|&i| energy[i]).sum();
                vals[local] = e / w.mass(&b);
            }
            prefix.push(prefix_table(&vals, m, dim));
        }
        Ok(WhitneyTable { lattice, prefix })
    }

    /// `Σ_{Q ⊆ P}` of the stored energies.
    fn sum_inside(&self, p: &CellBox) -> f64 {
        let dim = self.lattice.grid.dim;
        let mut total = 0.0;
        for k in 0..=self.lattice.max_generation {
            let s = self.lattice.side_cells(k) as i64;
            let m = self.lattice.per_axis(k);
            let mut lo = [0usize; 2];
            let mut hi = [1usize; 2];
            let mut empty = false;
            for a in 0..dim {
                let l = (p.lo[a] + s - 1).div_euclid(s);
                let h = (p.lo[a] + p.len[a] as i64).div_euclid(s);
                if h <= l {
                    empty = true;
                }
                lo[a] = l.max(0) as usize;
                hi[a] = h.max(0) as usize;
            }
            if empty {
                continue;
            }
            total += box_from_prefix(&self.prefix[k as usize], m, dim, lo, hi);
        }
        total
    }
}

fn prefix_table(vals: &[f64], m: usize, dim: usize) -> Vec<f64> {
    if dim == 1 {
        let mut t = vec![0.0; m + 1];
        for i in 0..m {
            t[i + 1] = t[i] + vals[i];
        }
        t
    } else {
        let mut t = vec![0.0; (m + 1) * (m + 1)];
        for i in 0..m {
            let mut row = 0.0;
            for j in 0..m {
                row += vals[i * m + j];
                t[(i + 1) * (m + 1) + j + 1] = t[i * (m + 1) + j + 1] + row;
            }
        }
        t
    }
}

fn box_from_prefix(t: &[f64], m: usize, dim: usize, lo: [usize; 2], hi: [usize; 2]) -> f64 {
    if dim == 1 {
        t[hi[0]] - t[lo[0]]
    } else {
        let w = m + 1;
        t[hi[0] * w + hi[1]] - t[lo[0] * w + hi[1]] - t[hi[0] * w + lo[1]] + t[lo[0] * w + lo[1]]
    }
}

/// Semigroup Carleson norm; `side` restricts the outer cubes to a half-space.
fn carleson_heat(
    f: &GridFunction,
    w: &Weight,
    gen: Generator,
    neumann: bool,
    side: Option<Side>,
    opts: &BmoOptions,
) -> Result<f64> {
    let grid = f.grid;
    let table = WhitneyTable::build(f, w, gen, neumann, opts.per_octave)?;
    let n = grid.points_per_axis;
    let mut best: f64 = 0.0;
    for p in family(&grid, opts)?.contiguous_boxes() {
        if p.len[0] < opts.min_side_cells {
            continue;
        }
        if let Some(s) = side {
            if !p.within_side(s, n) {
                continue;
            }
        }
        best = best.max(table.sum_inside(&p) / w.mass(&p));
    }
    Ok(best.sqrt())
}

/// `‖f‖_{BMO_{Δ_N,w}}`.
pub fn bmo_deltan_norm(f: &GridFunction, w: &Weight, opts: &BmoOptions) -> Result<f64> {
    bmo_norm(f, w, BmoFlavor::CarlesonHeatNeumann, opts)
}

/// `(‖f_{+,e}‖_{BMO_{Δ,w_{+,e}}}, ‖f_{−,e}‖_{BMO_{Δ,w_{−,e}}})`.
pub fn bmo_deltan_parts(f: &GridFunction, w: &Weight, opts: &BmoOptions) -> Result<(f64, f64)> {
    let up = bmo_norm(&sidewise_even(f, Side::Upper)?, &w.sidewise_even(Side::Upper)?, BmoFlavor::CarlesonHeatFree, opts)?;
    let lo = bmo_norm(&sidewise_even(f, Side::Lower)?, &w.sidewise_even(Side::Lower)?, BmoFlavor::CarlesonHeatFree, opts)?;
    Ok((up, lo))
}

/// `‖f_{+,e}‖_{BMO} + ‖f_{−,e}‖_{BMO}` with unweighted classical norms.
pub fn bmo_deltan_classical(f: &GridFunction, opts: &BmoOptions) -> Result<f64> {
    let unit = Weight::unit(f.grid);
    let a = bmo_norm(&sidewise_even(f, Side::Upper)?, &unit, BmoFlavor::ClassicalW, opts)?;
    let b = bmo_norm(&sidewise_even(f, Side::Lower)?, &unit, BmoFlavor::ClassicalW, opts)?;
    Ok(a + b)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct JnInstance {
    pub norm_w: f64,
    pub norm_wr: f64,
    pub rho: f64,
    pub ap: f64,
    pub predictor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct JnReport {
    pub p: f64,
    pub r: f64,
    pub instances: Vec<JnInstance>,
    pub min_rho: f64,
    /// `max ρ / [w]_{A^p}^{max(1, 1/(p−1))}`.
    pub fitted_c: f64,
}

pub fn john_nirenberg_report(
    suite: &[(GridFunction, Weight)],
    p: f64,
    r: f64,
    opts: &BmoOptions,
) -> Result<JnReport> {
    let pc = p / (p - 1.0);
    if !(1.0..=pc + 1e-12).contains(&r) {
        return Err(Error::Parameter(format!("r = {r} outside [1, p'] = [1, {pc}]")));
    }
    let mut instances = Vec::with_capacity(suite.len());
    for (b, w) in suite {
        let norm_w = bmo_norm(b, w, BmoFlavor::ClassicalW, opts)?;
        let norm_wr = bmo_norm(b, w, BmoFlavor::ClassicalWr { r }, opts)?;
        let ap = ap_constant(w, p, &family(&b.grid, opts)?)?;
        let predictor = ap.powf(1f64.max(1.0 / (p - 1.0)));
        instances.push(JnInstance { norm_w, norm_wr, rho: norm_wr / norm_w, ap, predictor });
    }
    let min_rho = instances.iter().map(|i| i.rho).fold(f64::INFINITY, f64::min);
    let fitted_c = instances.iter().map(|i| i.rho / i.predictor).fold(0.0, f64::max);
    Ok(JnReport { p, r, instances, min_rho, fitted_c })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_have_zero_norm() {
        let g = Grid::full(1, 1.0, 32).unwrap();
        let w = Weight::unit(g);
        let f = GridFunction::constant(g, 3.0);
        let o = BmoOptions::default();
        for fl in [
            BmoFlavor::ClassicalW,
            BmoFlavor::ClassicalWr { r: 2.0 },
            BmoFlavor::CarlesonHaar,
            BmoFlavor::CarlesonHeatFree,
            BmoFlavor::CarlesonHeatNeumann,
        ] {
            assert!(bmo_norm(&f, &w, fl, &o).unwrap() < 1e-12, "{fl:?}");
        }
        let h = GridFunction::constant(g.with_domain(Domain::UpperHalf), 2.0);
        for fl in [BmoFlavor::UnweightedHalf, BmoFlavor::EvenExtensionHalf, BmoFlavor::CarlesonHeatNeumannHalf] {
            assert!(bmo_norm(&h, &w, fl, &o).unwrap() < 1e-12, "{fl:?}");
        }
        assert!(bmo_norm(&h, &w, BmoFlavor::OddExtensionHalf, &o).unwrap() > 0.5);
        assert!(bmo_norm(&f, &w, BmoFlavor::OddExtensionHalf, &o).is_err());
    }

    #[test]
    fn sign_is_sidewise_constant() {
        let g = Grid::full(1, 1.0, 32).unwrap();
        let f = GridFunction::from_fn(g, |x| x[0].signum()).unwrap();
        let w = Weight::unit(g);
        let o = BmoOptions::default();
        assert!(bmo_deltan_norm(&f, &w, &o).unwrap() < 1e-12);
        assert!(bmo_norm(&f, &w, BmoFlavor::ClassicalW, &o).unwrap() > 0.1);
    }
}
