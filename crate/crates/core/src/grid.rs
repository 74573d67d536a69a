//! Cell-centered grids on boxes and half-boxes, plus the reflection calculus.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    FullSpace,
    UpperHalf,
    LowerHalf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    pub fn domain(self) -> Domain {
        match self {
            Side::Upper => Domain::UpperHalf,
            Side::Lower => Domain::LowerHalf,
        }
    }
}

/// Uniform grid with cell centers `x_k = -L + (k + 1/2) h`, `h = 2L/N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub halfwidth: f64,
    pub points_per_axis: usize,
    pub domain: Domain,
}

impl Grid {
    pub fn new(dim: usize, halfwidth: f64, points_per_axis: usize, domain: Domain) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Parameter(format!("dimension {dim} not in {{1,2}}")));
        }
        if !(halfwidth > 0.0 && halfwidth.is_finite()) {
            return Err(Error::Parameter(format!("halfwidth {halfwidth} must be positive")));
        }
        if points_per_axis < 2 || !points_per_axis.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "points per axis {points_per_axis} must be even and at least 2"
            )));
        }
        Ok(Grid { dim, halfwidth, points_per_axis, domain })
    }

    pub fn full(dim: usize, halfwidth: f64, points_per_axis: usize) -> Result<Self> {
        Self::new(dim, halfwidth, points_per_axis, Domain::FullSpace)
    }

    pub fn cell_width(&self) -> f64 {
        2.0 * self.halfwidth / self.points_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_width().powi(self.dim as i32)
    }

    pub fn is_full(&self) -> bool {
        self.domain == Domain::FullSpace
    }

    pub fn with_domain(&self, domain: Domain) -> Grid {
        Grid { domain, ..*self }
    }

    pub fn axis_len(&self, axis: usize) -> usize {
        if axis + 1 == self.dim && !self.is_full() {
            self.points_per_axis / 2
        } else {
            self.points_per_axis
        }
    }

    pub fn shape(&self) -> [usize; 2] {
        let mut s = [1, 1];
        for (a, v) in s.iter_mut().enumerate().take(self.dim) {
            *v = self.axis_len(a);
        }
        s
    }

    pub fn len(&self) -> usize {
        (0..self.dim).map(|a| self.axis_len(a)).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Offset of local last-axis indices inside the full grid.
    pub fn last_axis_offset(&self) -> usize {
        match self.domain {
            Domain::UpperHalf => self.points_per_axis / 2,
            _ => 0,
        }
    }

    /// Center of full-grid cell `k` along any axis.
    pub fn center(&self, k: usize) -> f64 {
        -self.halfwidth + (k as f64 + 0.5) * self.cell_width()
    }

    /// Left edge of full-grid cell `k`.
    pub fn edge(&self, k: usize) -> f64 {
        -self.halfwidth + k as f64 * self.cell_width()
    }

    /// Local multi-index of a flat index, last axis fastest.
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            let m = self.axis_len(1);
            [flat / m, flat % m]
        }
    }

    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        if self.dim == 1 {
            idx[0]
        } else {
            idx[0] * self.axis_len(1) + idx[1]
        }
    }

    /// Full-grid multi-index of a local flat index.
    pub fn global_index(&self, flat: usize) -> [usize; 2] {
        let mut idx = self.multi_index(flat);
        idx[self.dim - 1] += self.last_axis_offset();
        idx
    }

    /// Local flat index of a full-grid multi-index, if it belongs to this grid.
    pub fn local_flat(&self, global: [usize; 2]) -> Option<usize> {
        let mut idx = global;
        let last = self.dim - 1;
        let off = self.last_axis_offset();
        if idx[last] < off || idx[last] - off >= self.axis_len(last) {
            return None;
        }
        idx[last] -= off;
        Some(self.flat_index(idx))
    }

    pub fn point(&self, flat: usize) -> [f64; 2] {
        let g = self.global_index(flat);
        let mut x = [0.0; 2];
        for a in 0..self.dim {
            x[a] = self.center(g[a]);
        }
        x
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Full-grid index of the reflection x ↦ x̃.
    pub fn reflect_global(&self, mut g: [usize; 2]) -> [usize; 2] {
        let last = self.dim - 1;
        g[last] = self.points_per_axis - 1 - g[last];
        g
    }

    pub fn compatible(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.points_per_axis == other.points_per_axis
            && self.halfwidth == other.halfwidth
    }
}

/// Axis-aligned block of full-grid cells; `lo` may wrap periodically for shifted lattices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellBox {
    pub dim: usize,
    pub lo: [i64; 2],
    pub len: [usize; 2],
}

impl CellBox {
    pub fn new(dim: usize, lo: [i64; 2], len: [usize; 2]) -> Self {
        let mut len = len;
        if dim == 1 {
            len[1] = 1;
        }
        CellBox { dim, lo, len }
    }

    pub fn cube(dim: usize, lo: [i64; 2], side: usize) -> Self {
        Self::new(dim, lo, [side, side])
    }

    pub fn whole(grid: &Grid) -> Self {
        Self::cube(grid.dim, [0, 0], grid.points_per_axis)
    }

    pub fn cell_count(&self) -> usize {
        self.len[..self.dim].iter().product()
    }

    pub fn measure(&self, grid: &Grid) -> f64 {
        self.cell_count() as f64 * grid.cell_volume()
    }

    pub fn is_contiguous(&self, n: usize) -> bool {
        (0..self.dim).all(|a| self.lo[a] >= 0 && self.lo[a] as usize + self.len[a] <= n)
    }

    /// Full-grid multi-indices of member cells in row-major order.
    pub fn cells(&self, n: usize) -> Vec<[usize; 2]> {
        let w = |a: usize, i: usize| (self.lo[a] + i as i64).rem_euclid(n as i64) as usize;
        let mut out = Vec::with_capacity(self.cell_count());
        if self.dim == 1 {
            for i in 0..self.len[0] {
                out.push([w(0, i), 0]);
            }
        } else {
            for i in 0..self.len[0] {
                for j in 0..self.len[1] {
                    out.push([w(0, i), w(1, j)]);
                }
            }
        }
        out
    }

    /// Flat indices on `grid` of member cells that belong to it.
    pub fn flat_cells(&self, grid: &Grid) -> Vec<usize> {
        self.cells(grid.points_per_axis)
            .into_iter()
            .filter_map(|g| grid.local_flat(g))
            .collect()
    }

    pub fn contains_cell(&self, g: [usize; 2], n: usize) -> bool {
        (0..self.dim).all(|a| {
            let d = (g[a] as i64 - self.lo[a]).rem_euclid(n as i64) as usize;
            d < self.len[a]
        })
    }

    pub fn contains_box(&self, other: &CellBox) -> bool {
        (0..self.dim).all(|a| {
            other.lo[a] >= self.lo[a]
                && other.lo[a] + other.len[a] as i64 <= self.lo[a] + self.len[a] as i64
        })
    }

    /// Concentric dilation by `factor`, clipped to `[0, n)` on every axis.
    pub fn dilate_clipped(&self, factor: usize, n: usize) -> CellBox {
        let mut lo = [0i64; 2];
        let mut len = [1usize; 2];
        for a in 0..self.dim {
            let extra = (factor as i64 - 1) * self.len[a] as i64;
            let l = self.lo[a] - extra / 2;
            let h = self.lo[a] + self.len[a] as i64 + (extra - extra / 2);
            let l = l.max(0);
            let h = h.min(n as i64);
            lo[a] = l;
            len[a] = (h - l).max(0) as usize;
        }
        CellBox::new(self.dim, lo, len)
    }

    /// Concentric dilation by `factor` without clipping.
    pub fn dilate(&self, factor: usize) -> CellBox {
        let mut lo = self.lo;
        let mut len = self.len;
        for a in 0..self.dim {
            let extra = (factor as i64 - 1) * self.len[a] as i64;
            lo[a] = self.lo[a] - extra / 2;
            len[a] = self.len[a] * factor;
        }
        CellBox::new(self.dim, lo, len)
    }

    /// Whether all member cells lie in the half-space of `side`.
    pub fn within_side(&self, side: Side, n: usize) -> bool {
        let a = self.dim - 1;
        if !self.is_contiguous(n) {
            return false;
        }
        let lo = self.lo[a];
        let hi = lo + self.len[a] as i64;
        match side {
            Side::Upper => lo >= (n / 2) as i64,
            Side::Lower => hi <= (n / 2) as i64,
        }
    }
}

/// Sampled function on a grid, one value per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Size(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Range(format!("non-finite value at index {i}")));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        GridFunction { grid, values: vec![c; grid.len()] }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..grid.dim])).collect();
        Self::new(grid, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Domain("grid functions live on different grids".into()));
        }
        Self::new(
            self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        let h = self.grid.cell_volume();
        if p.is_infinite() {
            return self.values.iter().fold(0.0, |m, v| m.max(v.abs()));
        }
        (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * h).powf(1.0 / p)
    }

    pub fn weighted_lp_norm(&self, w: &[f64], p: f64) -> f64 {
        let h = self.grid.cell_volume();
        (self.values.iter().zip(w).map(|(v, w)| v.abs().powf(p) * w).sum::<f64>() * h)
            .powf(1.0 / p)
    }

    pub fn at_global(&self, g: [usize; 2]) -> Option<f64> {
        self.grid.local_flat(g).map(|i| self.values[i])
    }

    /// Average over the member cells of `b` that lie on this grid.
    pub fn box_average(&self, b: &CellBox) -> f64 {
        let cells = b.flat_cells(&self.grid);
        cells.iter().map(|&i| self.values[i]).sum::<f64>() / cells.len() as f64
    }

    pub fn box_sum(&self, b: &CellBox) -> f64 {
        b.flat_cells(&self.grid).iter().map(|&i| self.values[i]).sum::<f64>()
            * self.grid.cell_volume()
    }

    /// Flat CSV: one row per cell, local index coordinates followed by the value.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut s = String::new();
        let dom = match g.domain {
            Domain::FullSpace => "full_space",
            Domain::UpperHalf => "upper_half",
            Domain::LowerHalf => "lower_half",
        };
        let _ = writeln!(
            s,
            "# dim={} halfwidth={} points_per_axis={} domain={}",
            g.dim,
            fmt_f64(g.halfwidth),
            g.points_per_axis,
            dom
        );
        let _ = writeln!(s, "{}", if g.dim == 1 { "i0,value" } else { "i0,i1,value" });
        for (k, v) in self.values.iter().enumerate() {
            let idx = g.multi_index(k);
            if g.dim == 1 {
                let _ = writeln!(s, "{},{}", idx[0], fmt_f64(*v));
            } else {
                let _ = writeln!(s, "{},{},{}", idx[0], idx[1], fmt_f64(*v));
            }
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Io("empty grid csv".into()))?
            .trim_start_matches('#')
            .trim();
        let mut dim = None;
        let mut halfwidth = None;
        let mut n = None;
        let mut domain = Domain::FullSpace;
        for kv in header.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Io(format!("bad header token {kv}")))?;
            let bad = |_| Error::Io(format!("bad header value {kv}"));
            match k {
                "dim" => dim = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "halfwidth" => halfwidth = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "points_per_axis" => n = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "domain" => {
                    domain = match v {
                        "full_space" => Domain::FullSpace,
                        "upper_half" => Domain::UpperHalf,
                        "lower_half" => Domain::LowerHalf,
                        _ => return Err(Error::Io(format!("unknown domain {v}"))),
                    }
                }
                _ => {}
            }
        }
        let grid = Grid::new(
            dim.ok_or_else(|| Error::Io("missing dim".into()))?,
            halfwidth.ok_or_else(|| Error::Io("missing halfwidth".into()))?,
            n.ok_or_else(|| Error::Io("missing points_per_axis".into()))?,
            domain,
        )?;
        let mut values = vec![f64::NAN; grid.len()];
        for line in lines.skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != grid.dim + 1 {
                return Err(Error::Io(format!("bad row {line}")));
            }
            let mut idx = [0usize; 2];
            for a in 0..grid.dim {
                idx[a] = parts[a].trim().parse().map_err(|_| Error::Io(format!("bad row {line}")))?;
                if idx[a] >= grid.axis_len(a) {
                    return Err(Error::Io(format!("index out of range in row {line}")));
                }
            }
            values[grid.flat_index(idx)] = parts[grid.dim]
                .trim()
                .parse()
                .map_err(|_| Error::Io(format!("bad row {line}")))?;
        }
        Self::new(grid, values)
    }

    /// JSON header describing the grid; values go to a separate little-endian f64 column.
    pub fn to_json_header(&self) -> String {
        serde_json::json!({
            "grid": self.grid,
            "count": self.values.len(),
            "encoding": "f64le",
            "layout": "row_major_last_axis_fastest",
        })
        .to_string()
    }

    pub fn to_binary(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_json_binary(header: &str, bytes: &[u8]) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(header)?;
        let grid: Grid = serde_json::from_value(v["grid"].clone())?;
        if bytes.len() != 8 * grid.len() {
            return Err(Error::Size("binary column length does not match grid".into()));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::new(grid, values)
    }
}

/// Shortest round-trip decimal representation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn restrict(f: &GridFunction, side: Side) -> Result<GridFunction> {
    let g = f.grid;
    if !g.is_full() {
        return Err(Error::Domain("restrict expects a full-space grid function".into()));
    }
    let half = g.with_domain(side.domain());
    let values = (0..half.len())
        .map(|i| f.values[g.flat_index(half.global_index(i))])
        .collect();
    Ok(GridFunction { grid: half, values })
}

fn extend(f: &GridFunction, sign: f64) -> Result<GridFunction> {
    let h = f.grid;
    if h.is_full() {
        return Err(Error::Domain("extension expects a half-space grid function".into()));
    }
    let full = h.with_domain(Domain::FullSpace);
    let values = (0..full.len())
        .map(|i| {
            let gi = full.global_index(i);
            match h.local_flat(gi) {
                Some(j) => f.values[j],
                None => {
                    let j = h.local_flat(full.reflect_global(gi)).expect("reflection lands on source side");
                    sign * f.values[j]
                }
            }
        })
        .collect();
    Ok(GridFunction { grid: full, values })
}

pub fn extend_even(f: &GridFunction) -> Result<GridFunction> {
    extend(f, 1.0)
}

pub fn extend_odd(f: &GridFunction) -> Result<GridFunction> {
    extend(f, -1.0)
}

/// `f_{±,e}`: restriction to `side` followed by even extension.
pub fn sidewise_even(f: &GridFunction, side: Side) -> Result<GridFunction> {
    extend_even(&restrict(f, side)?)
}

/// Values of a full-grid function composed with x ↦ x̃.
pub fn reflect(f: &GridFunction) -> Result<GridFunction> {
    let g = f.grid;
    if !g.is_full() {
        return Err(Error::Domain("reflect expects a full-space grid function".into()));
    }
    let values = (0..g.len())
        .map(|i| f.values[g.flat_index(g.reflect_global(g.global_index(i)))])
        .collect();
    Ok(GridFunction { grid: g, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_grids_split_full() {
        let g = Grid::full(2, 1.0, 8).unwrap();
        let up = g.with_domain(Domain::UpperHalf);
        assert_eq!(up.len(), 32);
        assert!(up.points().iter().all(|x| x[1] > 0.0));
        assert!(g.with_domain(Domain::LowerHalf).points().iter().all(|x| x[1] < 0.0));
    }

    #[test]
    fn restriction_examples() {
        let g = Grid::full(1, 1.0, 8).unwrap();
        let one = GridFunction::constant(g, 1.0);
        assert!(restrict(&one, Side::Upper).unwrap().values.iter().all(|&v| v == 1.0));
        let id = GridFunction::from_fn(g, |x| x[0]).unwrap();
        let up = restrict(&id, Side::Upper).unwrap();
        assert_eq!(up.values, up.grid.points().iter().map(|x| x[0]).collect::<Vec<_>>());
        let neg = GridFunction::from_fn(g, |x| if x[0] < 0.0 { 1.0 } else { 0.0 }).unwrap();
        assert!(restrict(&neg, Side::Upper).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(restrict(&up, Side::Upper).is_err());
    }

    #[test]
    fn extension_examples() {
        let g = Grid::full(2, 1.0, 8).unwrap().with_domain(Domain::UpperHalf);
        let f = GridFunction::from_fn(g, |x| x[1]).unwrap();
        let e = extend_even(&f).unwrap();
        for (i, x) in e.grid.points().iter().enumerate() {
            assert_eq!(e.values[i], x[1].abs());
        }
        let o = extend_odd(&f).unwrap();
        for (i, x) in o.grid.points().iter().enumerate() {
            assert_eq!(o.values[i], x[1]);
        }
        let one = extend_odd(&GridFunction::constant(g, 1.0)).unwrap();
        for (i, x) in one.grid.points().iter().enumerate() {
            assert_eq!(one.values[i], x[1].signum());
        }
        assert_eq!(restrict(&e, Side::Upper).unwrap(), f);
        assert!(extend_even(&e).is_err());
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let g = Grid::full(2, 1.5, 4).unwrap().with_domain(Domain::LowerHalf);
        let f = GridFunction::from_fn(g, |x| x[0] * 0.1 + x[1].sin()).unwrap();
        assert_eq!(GridFunction::from_csv(&f.to_csv()).unwrap(), f);
        let back = GridFunction::from_json_binary(&f.to_json_header(), &f.to_binary()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn dilation_clips() {
        let b = CellBox::cube(1, [0, 0], 4);
        let d = b.dilate_clipped(2, 16);
        assert_eq!((d.lo[0], d.len[0]), (0, 6));
    }
}
