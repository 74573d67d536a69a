//! Dyadic lattices, the Haar system and the weighted dyadic maximal function.

use crate::error::{Error, Result};
use crate::grid::{fmt_f64, CellBox, Grid, GridFunction};
use crate::weights::Weight;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shift {
    None,
    Third,
    TwoThirds,
}

impl Shift {
    pub fn cells(self, n: usize) -> i64 {
        match self {
            Shift::None => 0,
            Shift::Third => (n / 3) as i64,
            Shift::TwoThirds => (2 * n / 3) as i64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicCube {
    pub generation: u32,
    pub index: [usize; 2],
    pub shift: [Shift; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DyadicLattice {
    pub grid: Grid,
    pub max_generation: u32,
    pub shift: [Shift; 2],
    offsets: Vec<usize>,
}

/// Largest generation the grid supports, `log2` of the power of two dividing N.
pub fn max_generation_for(grid: &Grid) -> u32 {
    grid.points_per_axis.trailing_zeros()
}

impl DyadicLattice {
    pub fn new(grid: &Grid, max_generation: u32, shift: [Shift; 2]) -> Result<Self> {
        let n = grid.points_per_axis;
        if max_generation > 30 || !n.is_multiple_of(1usize << max_generation) {
            return Err(Error::GridAlignment(format!(
                "2^{max_generation} does not divide {n}"
            )));
        }
        let mut grid = *grid;
        grid.domain = crate::grid::Domain::FullSpace;
        let per = 1usize << grid.dim;
        let mut offsets = Vec::with_capacity(max_generation as usize + 2);
        let mut acc = 0usize;
        let mut count = 1usize;
        for _ in 0..=max_generation {
            offsets.push(acc);
            acc += count;
            count *= per;
        }
        offsets.push(acc);
        let mut shift = shift;
        if grid.dim == 1 {
            shift[1] = Shift::None;
        }
        Ok(DyadicLattice { grid, max_generation, shift, offsets })
    }

    pub fn unshifted(grid: &Grid, max_generation: u32) -> Result<Self> {
        Self::new(grid, max_generation, [Shift::None; 2])
    }

    pub fn is_shifted(&self) -> bool {
        self.shift.iter().any(|s| *s != Shift::None)
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().expect("offsets")
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn per_axis(&self, generation: u32) -> usize {
        1usize << generation
    }

    pub fn side_cells(&self, generation: u32) -> usize {
        self.grid.points_per_axis >> generation
    }

    pub fn sidelength(&self, generation: u32) -> f64 {
        2.0 * self.grid.halfwidth / (1u64 << generation) as f64
    }

    pub fn generation_range(&self, generation: u32) -> std::ops::Range<usize> {
        self.offsets[generation as usize]..self.offsets[generation as usize + 1]
    }

    pub fn id(&self, q: &DyadicCube) -> usize {
        let m = self.per_axis(q.generation);
        let local = if self.grid.dim == 1 { q.index[0] } else { q.index[0] * m + q.index[1] };
        self.offsets[q.generation as usize] + local
    }

    pub fn cube(&self, id: usize) -> DyadicCube {
        let generation = (0..=self.max_generation)
            .rev()
            .find(|&k| self.offsets[k as usize] <= id)
            .expect("id in range");
        let local = id - self.offsets[generation as usize];
        let m = self.per_axis(generation);
        let index = if self.grid.dim == 1 { [local, 0] } else { [local / m, local % m] };
        DyadicCube { generation, index, shift: self.shift }
    }

    pub fn cubes(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        (0..self.len()).map(move |i| self.cube(i))
    }

    pub fn cubes_of_generation(&self, generation: u32) -> impl Iterator<Item = DyadicCube> + '_ {
        self.generation_range(generation).map(move |i| self.cube(i))
    }

    pub fn cell_box(&self, q: &DyadicCube) -> CellBox {
        let s = self.side_cells(q.generation);
        let n = self.grid.points_per_axis;
        let mut lo = [0i64; 2];
        for (a, l) in lo.iter_mut().enumerate().take(self.grid.dim) {
            *l = self.shift[a].cells(n) + (q.index[a] * s) as i64;
        }
        CellBox::cube(self.grid.dim, lo, s)
    }

    pub fn children(&self, q: &DyadicCube) -> Vec<DyadicCube> {
        if q.generation >= self.max_generation {
            return Vec::new();
        }
        let g = q.generation + 1;
        let mut out = Vec::with_capacity(1 << self.grid.dim);
        if self.grid.dim == 1 {
            for c in 0..2 {
                out.push(DyadicCube { generation: g, index: [2 * q.index[0] + c, 0], shift: q.shift });
            }
        } else {
            for c0 in 0..2 {
                for c1 in 0..2 {
                    out.push(DyadicCube {
                        generation: g,
                        index: [2 * q.index[0] + c0, 2 * q.index[1] + c1],
                        shift: q.shift,
                    });
                }
            }
        }
        out
    }

    pub fn parent(&self, q: &DyadicCube) -> Option<DyadicCube> {
        if q.generation == 0 {
            return None;
        }
        Some(DyadicCube {
            generation: q.generation - 1,
            index: [q.index[0] / 2, q.index[1] / 2],
            shift: q.shift,
        })
    }

    /// Whether `p ⊆ q` inside this lattice.
    pub fn contains(&self, q: &DyadicCube, p: &DyadicCube) -> bool {
        if p.generation < q.generation {
            return false;
        }
        let d = p.generation - q.generation;
        (0..self.grid.dim).all(|a| p.index[a] >> d == q.index[a])
    }

    /// The generation-`k` cube containing full-grid cell `g`.
    pub fn cube_of_cell(&self, g: [usize; 2], generation: u32) -> DyadicCube {
        let n = self.grid.points_per_axis as i64;
        let s = self.side_cells(generation) as i64;
        let mut index = [0usize; 2];
        for (a, idx) in index.iter_mut().enumerate().take(self.grid.dim) {
            let rel = (g[a] as i64 - self.shift[a].cells(n as usize)).rem_euclid(n);
            *idx = (rel / s) as usize;
        }
        DyadicCube { generation, index, shift: self.shift }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let h = self.grid.cell_width();
        let cubes: Vec<serde_json::Value> = self
            .cubes()
            .map(|q| {
                let b = self.cell_box(&q);
                serde_json::json!({
                    "generation": q.generation,
                    "index": &q.index[..self.grid.dim],
                    "lo_cells": &b.lo[..self.grid.dim],
                    "side_cells": b.len[0],
                    "lo": b.lo[..self.grid.dim].iter().map(|&l| -self.grid.halfwidth + l as f64 * h).collect::<Vec<_>>(),
                    "sidelength": self.sidelength(q.generation),
                })
            })
            .collect();
        serde_json::json!({
            "grid": self.grid,
            "max_generation": self.max_generation,
            "shift": &self.shift[..self.grid.dim],
            "cubes": cubes,
        })
    }
}

/// Unshifted lattice plus the third and two-thirds shifted copies.
#[derive(Debug, Clone)]
pub struct LatticeFamily {
    pub lattices: Vec<DyadicLattice>,
}

impl LatticeFamily {
    pub fn standard(grid: &Grid, max_generation: u32) -> Result<Self> {
        let lattices = [Shift::None, Shift::Third, Shift::TwoThirds]
            .iter()
            .map(|&s| DyadicLattice::new(grid, max_generation, [s, s]))
            .collect::<Result<Vec<_>>>()?;
        Ok(LatticeFamily { lattices })
    }

    pub fn single(lattice: DyadicLattice) -> Self {
        LatticeFamily { lattices: vec![lattice] }
    }

    pub fn grid(&self) -> &Grid {
        &self.lattices[0].grid
    }

    /// Cell boxes of all cubes that do not wrap around the box.
    pub fn contiguous_boxes(&self) -> Vec<CellBox> {
        let n = self.grid().points_per_axis;
        let mut out = Vec::new();
        for l in &self.lattices {
            for q in l.cubes() {
                let mut b = l.cell_box(&q);
                for a in 0..b.dim {
                    b.lo[a] = b.lo[a].rem_euclid(n as i64);
                }
                if b.is_contiguous(n) {
                    out.push(b);
                }
            }
        }
        out
    }
}

/// Signatures ε ∈ {0,1}ⁿ minus (1,…,1), encoded as bit masks (bit a ↔ ε_a).
pub fn signatures(dim: usize) -> Vec<u8> {
    (0..(1u8 << dim) - 1).collect()
}

/// Value of `h_Q^ε` (without the `|Q|^{-1/2}` factor) at the local cell offset.
fn haar_sign(sig: u8, local: [usize; 2], side: usize, dim: usize) -> f64 {
    let mut s = 1.0;
    for (a, &l) in local.iter().enumerate().take(dim) {
        if sig >> a & 1 == 0 && l >= side / 2 {
            s = -s;
        }
    }
    s
}

pub fn haar_function(lattice: &DyadicLattice, q: &DyadicCube, sig: u8) -> Result<GridFunction> {
    let grid = lattice.grid;
    let b = lattice.cell_box(q);
    let side = b.len[0];
    if side < 2 {
        return Err(Error::Parameter("Haar functions need cubes of at least two cells per side".into()));
    }
    let scale = b.measure(&grid).powf(-0.5);
    let mut values = vec![0.0; grid.len()];
    for (k, g) in b.cells(grid.points_per_axis).into_iter().enumerate() {
        let local = if grid.dim == 1 { [k, 0] } else { [k / side, k % side] };
        values[grid.flat_index(g)] = scale * haar_sign(sig, local, side, grid.dim);
    }
    GridFunction::new(grid, values)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HaarCoefficients {
    pub dim: usize,
    /// `(cube, signature, coefficient)` in lattice order.
    pub entries: Vec<(DyadicCube, u8, f64)>,
}

impl HaarCoefficients {
    pub fn get(&self, q: &DyadicCube, sig: u8) -> Option<f64> {
        self.entries.iter().find(|(c, s, _)| c == q && *s == sig).map(|e| e.2)
    }

    pub fn sum_squares(&self) -> f64 {
        self.entries.iter().map(|e| e.2 * e.2).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(if self.dim == 1 {
            "generation,i0,signature,value\n"
        } else {
            "generation,i0,i1,signature,value\n"
        });
        for (q, sig, v) in &self.entries {
            let sg: String = (0..self.dim).map(|a| if sig >> a & 1 == 1 { '1' } else { '0' }).collect();
            if self.dim == 1 {
                let _ = writeln!(s, "{},{},{},{}", q.generation, q.index[0], sg, fmt_f64(*v));
            } else {
                let _ = writeln!(s, "{},{},{},{},{}", q.generation, q.index[0], q.index[1], sg, fmt_f64(*v));
            }
        }
        s
    }
}

fn check_full_compatible(f: &GridFunction, lattice: &DyadicLattice) -> Result<()> {
    if !f.grid.is_full() || !f.grid.compatible(&lattice.grid) {
        return Err(Error::GridAlignment("function grid does not match lattice grid".into()));
    }
    Ok(())
}

/// `⟨f, h_Q^ε⟩` for every cube with at least two cells per side.
pub fn haar_coefficients(f: &GridFunction, lattice: &DyadicLattice) -> Result<HaarCoefficients> {
    check_full_compatible(f, lattice)?;
    let grid = lattice.grid;
    let hv = grid.cell_volume();
    let sigs = signatures(grid.dim);
    let mut entries = Vec::new();
    for q in lattice.cubes() {
        let b = lattice.cell_box(&q);
        let side = b.len[0];
        if side < 2 {
            continue;
        }
        let scale = b.measure(&grid).powf(-0.5);
        let cells = b.cells(grid.points_per_axis);
        for &sig in &sigs {
            let mut acc = 0.0;
            for (k, g) in cells.iter().enumerate() {
                let local = if grid.dim == 1 { [k, 0] } else { [k / side, k % side] };
                acc += f.values[grid.flat_index(*g)] * haar_sign(sig, local, side, grid.dim);
            }
            entries.push((q, sig, acc * scale * hv));
        }
    }
    Ok(HaarCoefficients { dim: grid.dim, entries })
}

/// `⟨f⟩_{Q₀} + Σ ⟨f,h⟩ h`.
pub fn haar_reconstruct(
    coeffs: &HaarCoefficients,
    mean: f64,
    lattice: &DyadicLattice,
) -> Result<GridFunction> {
    let grid = lattice.grid;
    let mut values = vec![mean; grid.len()];
    for (q, sig, c) in &coeffs.entries {
        if *c == 0.0 {
            continue;
        }
        let b = lattice.cell_box(q);
        let side = b.len[0];
        let scale = b.measure(&grid).powf(-0.5);
        for (k, g) in b.cells(grid.points_per_axis).into_iter().enumerate() {
            let local = if grid.dim == 1 { [k, 0] } else { [k / side, k % side] };
            values[grid.flat_index(g)] += c * scale * haar_sign(*sig, local, side, grid.dim);
        }
    }
    GridFunction::new(grid, values)
}

/// `(M_w g)(x) = max_{Q ∋ x} (1/w(Q)) Σ_Q |g| w hⁿ` over one lattice.
pub fn weighted_maximal(g: &GridFunction, w: &Weight, lattice: &DyadicLattice) -> Result<GridFunction> {
    check_full_compatible(g, lattice)?;
    if w.values.grid != g.grid {
        return Err(Error::Domain("weight and function grids differ".into()));
    }
    let grid = lattice.grid;
    let n = grid.points_per_axis;
    let mut out = vec![0.0f64; grid.len()];
    for q in lattice.cubes() {
        let cells = lattice.cell_box(&q).cells(n);
        let mut num = 0.0;
        let mut den = 0.0;
        for c in &cells {
            let i = grid.flat_index(*c);
            num += g.values[i].abs() * w.values.values[i];
            den += w.values.values[i];
        }
        let avg = num / den;
        for c in &cells {
            let i = grid.flat_index(*c);
            if avg > out[i] {
                out[i] = avg;
            }
        }
    }
    GridFunction::new(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_counts() {
        let g = Grid::full(1, 1.0, 8).unwrap();
        assert_eq!(DyadicLattice::unshifted(&g, 3).unwrap().len(), 15);
        let g2 = Grid::full(2, 1.0, 8).unwrap();
        assert_eq!(DyadicLattice::unshifted(&g2, 2).unwrap().len(), 21);
        let s = DyadicLattice::new(&g2, 2, [Shift::Third; 2]).unwrap();
        assert_eq!(s.len(), 21);
        assert!(DyadicLattice::unshifted(&Grid::full(1, 1.0, 12).unwrap(), 3).is_err());
    }

    #[test]
    fn id_round_trip_and_nesting() {
        let g = Grid::full(2, 1.0, 16).unwrap();
        let l = DyadicLattice::unshifted(&g, 3).unwrap();
        for id in 0..l.len() {
            let q = l.cube(id);
            assert_eq!(l.id(&q), id);
            for c in l.children(&q) {
                assert_eq!(l.parent(&c), Some(q));
                assert!(l.contains(&q, &c));
                assert!(l.cell_box(&q).contains_box(&l.cell_box(&c)));
            }
        }
    }

    #[test]
    fn haar_examples() {
        let g = Grid::full(1, 1.0, 16).unwrap();
        let l = DyadicLattice::unshifted(&g, 4).unwrap();
        let c = haar_coefficients(&GridFunction::constant(g, 3.0), &l).unwrap();
        assert!(c.entries.iter().all(|e| e.2.abs() < 1e-14));
        let q0 = l.cube(0);
        let h = haar_function(&l, &q0, 0).unwrap();
        let c = haar_coefficients(&h, &l).unwrap();
        for (q, s, v) in &c.entries {
            let want = if *q == q0 && *s == 0 { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-12);
        }
        assert!(h.values[0] > 0.0);
    }
}
