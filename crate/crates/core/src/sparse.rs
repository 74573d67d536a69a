//! Stopping times, sparse collections, sparse operators and the good-function decomposition.

use crate::dyadic::{haar_coefficients, DyadicCube, DyadicLattice};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::linalg::{largest_singular_value, lp_norm_ascent, NormCertificate};
use crate::weights::Weight;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StoppingFamily {
    pub parent: DyadicCube,
    pub alpha: f64,
    pub parent_average: f64,
    pub selected: Vec<DyadicCube>,
}

fn abs_average(g: &GridFunction, lattice: &DyadicLattice, q: &DyadicCube) -> f64 {
    let cells = lattice.cell_box(q).flat_cells(&g.grid);
    cells.iter().map(|&i| g.values[i].abs()).sum::<f64>() / cells.len() as f64
}

fn cell_count(lattice: &DyadicLattice, q: &DyadicCube) -> usize {
    lattice.cell_box(q).cell_count()
}

/// Maximal `R ⊊ Q₀` with `⟨|g|⟩_R > threshold`, in lattice order.
fn maximal_above(g: &GridFunction, lattice: &DyadicLattice, q0: &DyadicCube, threshold: f64) -> Vec<DyadicCube> {
    let mut out = Vec::new();
    let mut stack: Vec<DyadicCube> = lattice.children(q0).into_iter().rev().collect();
    while let Some(q) = stack.pop() {
        if abs_average(g, lattice, &q) > threshold {
            out.push(q);
        } else {
            stack.extend(lattice.children(&q).into_iter().rev());
        }
    }
    out.sort_by_key(|q| lattice.id(q));
    out
}

/// Calderón–Zygmund stopping cubes: maximal `R ⊊ Q₀` with `⟨g⟩_R > α⟨g⟩_{Q₀}`.
pub fn cz_stopping(g: &GridFunction, lattice: &DyadicLattice, q0: &DyadicCube, alpha: f64) -> Result<StoppingFamily> {
    if !(alpha > 1.0) {
        return Err(Error::Parameter(format!("α = {alpha} must exceed 1")));
    }
    if !g.grid.compatible(&lattice.grid) || !g.grid.is_full() {
        return Err(Error::GridAlignment("function grid does not match lattice".into()));
    }
    let avg0 = abs_average(g, lattice, q0);
    let selected = if avg0 > 0.0 { maximal_above(g, lattice, q0, alpha * avg0) } else { Vec::new() };
    let fam = StoppingFamily { parent: *q0, alpha, parent_average: avg0, selected };
    let dim = lattice.grid.dim as i32;
    let total: usize = fam.selected.iter().map(|r| cell_count(lattice, r)).sum();
    if alpha * total as f64 > cell_count(lattice, q0) as f64 * (1.0 + 1e-12) {
        return Err(Error::Sparsity(format!("stopping mass bound violated under {q0:?}")));
    }
    for r in &fam.selected {
        let a = abs_average(g, lattice, r);
        if !(a > alpha * avg0 && a <= 2f64.powi(dim) * alpha * avg0 * (1.0 + 1e-12)) {
            return Err(Error::Sparsity(format!("stopping average bound violated at {r:?}")));
        }
    }
    Ok(fam)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SparseCollection {
    pub grid: Grid,
    pub max_generation: u32,
    pub cubes: Vec<DyadicCube>,
    /// Flat cell indices of `E_Q`, parallel to `cubes`.
    pub carriers: Vec<Vec<usize>>,
    pub eta: f64,
}

impl SparseCollection {
    pub fn lattice(&self) -> DyadicLattice {
        DyadicLattice::new(&self.grid, self.max_generation, self.cubes.first().map(|c| c.shift).unwrap_or([crate::dyadic::Shift::None; 2]))
            .expect("collection lattice")
    }

    /// Disjoint carriers inside their cubes with `|E_Q| ≥ η|Q|`.
    pub fn verify(&self) -> bool {
        let l = self.lattice();
        let mut seen = HashSet::new();
        for (q, e) in self.cubes.iter().zip(&self.carriers) {
            let b = l.cell_box(q);
            let inside: HashSet<usize> = b.flat_cells(&self.grid).into_iter().collect();
            if !e.iter().all(|c| inside.contains(c) && seen.insert(*c)) {
                return false;
            }
            if (e.len() as f64) < self.eta * b.cell_count() as f64 * (1.0 - 1e-12) {
                return false;
            }
        }
        true
    }

    /// Smallest `|E_Q|/|Q|`.
    pub fn measured_eta(&self) -> f64 {
        let l = self.lattice();
        self.cubes
            .iter()
            .zip(&self.carriers)
            .map(|(q, e)| e.len() as f64 / cell_count(&l, q) as f64)
            .fold(1.0, f64::min)
    }

    /// JSON with cube ids and run-length encoded carrier bitmaps in the cube's row-major cell order.
    pub fn to_json(&self) -> serde_json::Value {
        let l = self.lattice();
        let cubes: Vec<serde_json::Value> = self
            .cubes
            .iter()
            .zip(&self.carriers)
            .map(|(q, e)| {
                let cells = l.cell_box(q).flat_cells(&self.grid);
                let set: HashSet<usize> = e.iter().cloned().collect();
                let bits: Vec<bool> = cells.iter().map(|c| set.contains(c)).collect();
                serde_json::json!({
                    "id": l.id(q),
                    "generation": q.generation,
                    "index": &q.index[..self.grid.dim],
                    "carrier_rle": run_length(&bits),
                })
            })
            .collect();
        serde_json::json!({
            "grid": self.grid,
            "max_generation": self.max_generation,
            "eta": self.eta,
            "encoding": "runs of [value, length] starting from the cube's first cell",
            "cubes": cubes,
        })
    }
}

pub fn run_length(bits: &[bool]) -> Vec<(u8, usize)> {
    let mut out: Vec<(u8, usize)> = Vec::new();
    for &b in bits {
        let v = b as u8;
        match out.last_mut() {
            Some((last, n)) if *last == v => *n += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

pub fn run_length_decode(runs: &[(u8, usize)]) -> Vec<bool> {
    runs.iter().flat_map(|&(v, n)| std::iter::repeat_n(v == 1, n)).collect()
}

/// Recursive collection with `E_Q = Q \ ∪ children(Q)`; η = 1 − 1/α.
pub fn build_sparse_from_recursion(
    lattice: &DyadicLattice,
    q0: &DyadicCube,
    alpha: f64,
    rule: &dyn Fn(&DyadicCube) -> Result<Vec<DyadicCube>>,
) -> Result<SparseCollection> {
    if !(alpha > 1.0) {
        return Err(Error::Parameter(format!("α = {alpha} must exceed 1")));
    }
    let grid = lattice.grid;
    let mut cubes = Vec::new();
    let mut carriers = Vec::new();
    let mut queue = std::collections::VecDeque::from([*q0]);
    while let Some(q) = queue.pop_front() {
        let children = if q.generation < lattice.max_generation { rule(&q)? } else { Vec::new() };
        let qc = cell_count(lattice, &q);
        let mut covered = HashSet::new();
        let mut mass = 0usize;
        for c in &children {
            if !(lattice.contains(&q, c) && c.generation > q.generation) {
                return Err(Error::Sparsity(format!("child {c:?} is not a strict subcube of {q:?}")));
            }
            for cell in lattice.cell_box(c).flat_cells(&grid) {
                if !covered.insert(cell) {
                    return Err(Error::Sparsity(format!("children of {q:?} overlap")));
                }
            }
            mass += cell_count(lattice, c);
        }
        if alpha * mass as f64 > qc as f64 * (1.0 + 1e-12) {
            return Err(Error::Sparsity(format!(
                "children of {q:?} cover {mass} of {qc} cells, above 1/α"
            )));
        }
        let e: Vec<usize> = lattice.cell_box(&q).flat_cells(&grid).into_iter().filter(|c| !covered.contains(c)).collect();
        cubes.push(q);
        carriers.push(e);
        queue.extend(children);
    }
    Ok(SparseCollection { grid, max_generation: lattice.max_generation, cubes, carriers, eta: 1.0 - 1.0 / alpha })
}

/// Recursion of CZ stopping cubes on `g`.
pub fn cz_sparse(g: &GridFunction, lattice: &DyadicLattice, q0: &DyadicCube, alpha: f64) -> Result<SparseCollection> {
    build_sparse_from_recursion(lattice, q0, alpha, &|q| Ok(cz_stopping(g, lattice, q, alpha)?.selected))
}

/// `max_{Q∈S} Σ_{P∈S, P⊆Q} |P| / |Q|`.
pub fn carleson_constant(cubes: &[DyadicCube], lattice: &DyadicLattice) -> f64 {
    cubes
        .iter()
        .map(|q| {
            let s: usize = cubes.iter().filter(|p| lattice.contains(q, p)).map(|p| cell_count(lattice, p)).sum();
            s as f64 / cell_count(lattice, q) as f64
        })
        .fold(0.0, f64::max)
}

/// Carriers for a Λ-Carleson family with η = 1/Λ, claimed greedily from the smallest cubes up.
pub fn sparse_from_carleson(cubes: &[DyadicCube], lattice: &DyadicLattice, lambda: f64) -> Result<SparseCollection> {
    if !(lambda >= 1.0) {
        return Err(Error::Parameter(format!("Carleson constant {lambda} below 1")));
    }
    let grid = lattice.grid;
    let eta = 1.0 / lambda;
    let mut order: Vec<usize> = (0..cubes.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(cubes[i].generation), lattice.id(&cubes[i])));
    let mut claimed = vec![false; grid.len()];
    let mut carriers = vec![Vec::new(); cubes.len()];
    for i in order {
        let q = &cubes[i];
        let need = (eta * cell_count(lattice, q) as f64 - 1e-9).ceil().max(0.0) as usize;
        let mut got = Vec::with_capacity(need);
        for c in lattice.cell_box(q).flat_cells(&grid) {
            if got.len() == need {
                break;
            }
            if !claimed[c] {
                got.push(c);
            }
        }
        if got.len() < need {
            return Err(Error::Sparsity(format!("cube {q:?} cannot claim {need} free cells")));
        }
        for &c in &got {
            claimed[c] = true;
        }
        got.sort_unstable();
        carriers[i] = got;
    }
    Ok(SparseCollection { grid, max_generation: lattice.max_generation, cubes: cubes.to_vec(), carriers, eta })
}

/// `A_S f = Σ_{Q∈S} ⟨f⟩_Q 1_Q`.
pub fn sparse_operator_apply(s: &SparseCollection, f: &GridFunction) -> Result<GridFunction> {
    if f.grid != s.grid {
        return Err(Error::Domain("function grid differs from collection grid".into()));
    }
    let l = s.lattice();
    let mut out = vec![0.0; f.len()];
    for q in &s.cubes {
        let cells = l.cell_box(q).flat_cells(&f.grid);
        let avg = cells.iter().map(|&i| f.values[i]).sum::<f64>() / cells.len() as f64;
        for i in cells {
            out[i] += avg;
        }
    }
    GridFunction::new(f.grid, out)
}

pub fn sparse_dense_matrix(s: &SparseCollection) -> DMatrix<f64> {
    let l = s.lattice();
    let m = s.grid.len();
    let mut a = DMatrix::zeros(m, m);
    for q in &s.cubes {
        let cells = l.cell_box(q).flat_cells(&s.grid);
        let v = 1.0 / cells.len() as f64;
        for &i in &cells {
            for &j in &cells {
                a[(i, j)] += v;
            }
        }
    }
    a
}

/// `‖A_S‖_{L^p(w) → L^p(w)}`: SVD at p = 2, ascent otherwise.
pub fn sparse_weighted_norm(s: &SparseCollection, w: &Weight, p: f64, seed: u64) -> Result<(f64, NormCertificate)> {
    if w.grid() != s.grid {
        return Err(Error::Domain("weight grid differs from collection grid".into()));
    }
    let a = sparse_dense_matrix(s);
    let hv = s.grid.cell_volume();
    let d: Vec<f64> = w.values.values.iter().map(|x| (x * hv).powf(1.0 / p)).collect();
    let b = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| d[i] * a[(i, j)] / d[j]);
    Ok(if p == 2.0 {
        largest_singular_value(&b)
    } else {
        lp_norm_ascent(&b, p, 10, 500, 1e-8, seed)
    })
}

/// `a = 1_{Q₀} b − Σ_R (b − ⟨b⟩_R) 1_R` with `R` the stopping cubes of `w`.
pub fn bmo_good_function(
    b: &GridFunction,
    w: &Weight,
    lattice: &DyadicLattice,
    q0: &DyadicCube,
    alpha: f64,
) -> Result<(GridFunction, StoppingFamily)> {
    if w.grid() != b.grid {
        return Err(Error::Domain("weight and function grids differ".into()));
    }
    let fam = cz_stopping(&w.values, lattice, q0, alpha)?;
    let mut a = vec![0.0; b.len()];
    for i in lattice.cell_box(q0).flat_cells(&b.grid) {
        a[i] = b.values[i];
    }
    for r in &fam.selected {
        let cells = lattice.cell_box(r).flat_cells(&b.grid);
        let avg = cells.iter().map(|&i| b.values[i]).sum::<f64>() / cells.len() as f64;
        for i in cells {
            a[i] = avg;
        }
    }
    Ok((GridFunction::new(b.grid, a)?, fam))
}

/// Dyadic `sup_Q (1/w(Q)) Σ_Q |b − ⟨b⟩_Q| hⁿ` over cubes of the lattice inside `q0`.
pub fn dyadic_bmo(b: &GridFunction, w: &Weight, lattice: &DyadicLattice, q0: &DyadicCube) -> f64 {
    let hv = b.grid.cell_volume();
    let mut best: f64 = 0.0;
    for q in lattice.cubes().filter(|q| lattice.contains(q0, q)) {
        let bx = lattice.cell_box(&q);
        let cells = bx.flat_cells(&b.grid);
        let mean = cells.iter().map(|&i| b.values[i]).sum::<f64>() / cells.len() as f64;
        let osc: f64 = cells.iter().map(|&i| (b.values[i] - mean).abs()).sum::<f64>() * hv;
        best = best.max(osc / w.mass(&bx));
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PairingReport {
    pub lhs: f64,
    pub bmo: f64,
    pub sparse_sum: f64,
    /// `lhs / (bmo · sparse_sum)`.
    pub constant: f64,
    pub cubes: usize,
}

/// Pairing `Σ |⟨b,h⟩||⟨f,h⟩|` against `‖b‖ Σ_{Q∈S} ⟨|f|⟩_Q w(Q)` with `S` from joint stopping on `w` and `|f|`.
pub fn pairing_bound(b: &GridFunction, f: &GridFunction, w: &Weight, lattice: &DyadicLattice, alpha: f64) -> Result<PairingReport> {
    let q0 = lattice.cube(0);
    let s = build_sparse_from_recursion(lattice, &q0, alpha, &|q| {
        let aw = abs_average(&w.values, lattice, q);
        let af = abs_average(f, lattice, q);
        let mut sel = maximal_above(&w.values, lattice, q, 2.0 * alpha * aw);
        if af > 0.0 {
            sel.extend(maximal_above(f, lattice, q, 2.0 * alpha * af));
        }
        let mut keep: Vec<DyadicCube> = Vec::new();
        sel.sort_by_key(|c| (c.generation, lattice.id(c)));
        for c in sel {
            if !keep.iter().any(|k| lattice.contains(k, &c)) {
                keep.push(c);
            }
        }
        Ok(keep)
    })?;
    let cb = haar_coefficients(b, lattice)?;
    let cf = haar_coefficients(f, lattice)?;
    let lhs: f64 = cb.entries.iter().zip(&cf.entries).map(|(x, y)| (x.2 * y.2).abs()).sum();
    let bmo = dyadic_bmo(b, w, lattice, &q0);
    let sparse_sum: f64 = s
        .cubes
        .iter()
        .map(|q| {
            let bx = lattice.cell_box(q);
            abs_average(f, lattice, q) * w.mass(&bx)
        })
        .sum();
    Ok(PairingReport { lhs, bmo, sparse_sum, constant: lhs / (bmo * sparse_sum), cubes: s.cubes.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_weight_never_stops() {
        let g = Grid::full(1, 1.0, 32).unwrap();
        let l = DyadicLattice::unshifted(&g, 5).unwrap();
        let f = cz_stopping(&GridFunction::constant(g, 1.0), &l, &l.cube(0), 2.0).unwrap();
        assert!(f.selected.is_empty());
    }

    #[test]
    fn single_bump_is_selected() {
        let g = Grid::full(2, 1.0, 16).unwrap();
        let l = DyadicLattice::unshifted(&g, 4).unwrap();
        let star = DyadicCube { generation: 2, index: [1, 2], shift: l.shift };
        let bx = l.cell_box(&star);
        let mut w = GridFunction::constant(g, 1.0);
        for i in bx.flat_cells(&g) {
            w.values[i] = 4.0;
        }
        let f = cz_stopping(&w, &l, &l.cube(0), 2.0).unwrap();
        assert_eq!(f.selected, vec![star]);
    }

    #[test]
    fn no_children_rule() {
        let g = Grid::full(1, 1.0, 16).unwrap();
        let l = DyadicLattice::unshifted(&g, 4).unwrap();
        let s = build_sparse_from_recursion(&l, &l.cube(0), 2.0, &|_| Ok(Vec::new())).unwrap();
        assert_eq!(s.cubes.len(), 1);
        assert_eq!(s.carriers[0].len(), 16);
        assert_eq!(s.measured_eta(), 1.0);
        let bad = build_sparse_from_recursion(&l, &l.cube(0), 2.0, &|q| Ok(l.children(q)));
        assert!(matches!(bad, Err(Error::Sparsity(_))));
    }

    #[test]
    fn rle_round_trip() {
        let bits = vec![true, true, false, true, false, false];
        assert_eq!(run_length_decode(&run_length(&bits)), bits);
    }
}
