//! (1,p,β)-atoms and level-set atomic decompositions.

use crate::dyadic::{haar_coefficients, haar_reconstruct, max_generation_for, weighted_maximal, DyadicCube, DyadicLattice, HaarCoefficients};
use crate::error::{Error, Result};
use crate::grid::{CellBox, GridFunction};
use crate::kernels::psi_multiplier;
use crate::operators::{apply, Backend, OperatorHandle};
use crate::squarefn::{area_function, haar_square_function, Cone, Generator, TimeGrid};
use crate::weights::Weight;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AtomCheck {
    pub support_ok: bool,
    /// Largest `|a|` outside the support box.
    pub support_leak: f64,
    pub moments_ok: bool,
    /// Moments `Σ a (x − c)^γ hⁿ / (‖a‖₁ ℓ^{|γ|})` for `|γ| ≤ β`.
    pub moments: Vec<f64>,
    pub norm_ok: bool,
    pub lp_norm: f64,
    pub bound: f64,
    /// Factor that would make the size condition hold with equality.
    pub required_scale: f64,
}

impl AtomCheck {
    pub fn passes(&self) -> bool {
        self.support_ok && self.moments_ok && self.norm_ok
    }
}

/// Checks support, vanishing moments up to `β` and `‖a‖_{L^p_w} ≤ w(Q)^{1/p−1}`.
pub fn check_atom(a: &GridFunction, support: &CellBox, p: f64, beta: u32, w: &Weight) -> Result<AtomCheck> {
    if w.grid() != a.grid {
        return Err(Error::Domain("weight and atom grids differ".into()));
    }
    let g = a.grid;
    let n = g.points_per_axis;
    let hv = g.cell_volume();
    let mut leak: f64 = 0.0;
    for (i, v) in a.values.iter().enumerate() {
        if !support.contains_cell(g.global_index(i), n) {
            leak = leak.max(v.abs());
        }
    }
    let l1: f64 = a.values.iter().map(|v| v.abs()).sum::<f64>() * hv;
    let side = support.len[0] as f64 * g.cell_width();
    let mut center = [0.0; 2];
    for (a_, c) in center.iter_mut().enumerate().take(g.dim) {
        *c = g.edge(0) + (support.lo[a_] as f64 + support.len[a_] as f64 / 2.0) * g.cell_width();
    }
    let mut moments = Vec::new();
    let mut moments_ok = true;
    for order in 0..=beta {
        let exps: Vec<[u32; 2]> = if g.dim == 1 {
            vec![[order, 0]]
        } else {
            (0..=order).map(|e0| [e0, order - e0]).collect()
        };
        for e in exps {
            let mut m = 0.0;
            for (i, v) in a.values.iter().enumerate() {
                let x = g.point(i);
                let mut mono = 1.0;
                for ax in 0..g.dim {
                    mono *= (x[ax] - center[ax]).powi(e[ax] as i32);
                }
                m += v * mono;
            }
            m *= hv;
            let scale = if l1 > 0.0 { l1 * side.powi(order as i32) } else { 1.0 };
            let rel = m / scale;
            moments_ok &= rel.abs() <= 1e-10;
            moments.push(rel);
        }
    }
    let lp_norm = a.weighted_lp_norm(&w.values.values, p);
    let bound = w.mass(support).powf(1.0 / p - 1.0);
    Ok(AtomCheck {
        support_ok: leak == 0.0,
        support_leak: leak,
        moments_ok,
        moments,
        norm_ok: lp_norm <= bound * (1.0 + 1e-9),
        lp_norm,
        bound,
        required_scale: if lp_norm > 0.0 { bound / lp_norm } else { f64::INFINITY },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomFlavor {
    /// Haar square function; atoms are Haar pieces grouped under `Q̄`.
    HaarWavelet,
    /// Heat area function; atoms are `ψ(t√Δ)` images of Whitney pieces.
    HeatPsi,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AtomEntry {
    pub level: i32,
    pub anchor: DyadicCube,
    pub support: CellBox,
    pub coefficient: f64,
    pub atom: GridFunction,
    pub check: AtomCheck,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AtomicDecomposition {
    pub flavor: AtomFlavor,
    pub atoms: Vec<AtomEntry>,
    pub residual: GridFunction,
    pub coefficient_sum: f64,
    /// `Σ_k 2^k w(Ω_k)`.
    pub level_mass_sum: f64,
    /// `‖S f‖_{L¹_w}`.
    pub square_norm: f64,
    pub residual_l1w: f64,
    pub f_l1w: f64,
}

impl AtomicDecomposition {
    pub fn to_json(&self) -> serde_json::Value {
        let atoms: Vec<serde_json::Value> = self
            .atoms
            .iter()
            .map(|a| {
                serde_json::json!({
                    "level": a.level,
                    "generation": a.anchor.generation,
                    "index": &a.anchor.index[..a.atom.grid.dim],
                    "coefficient": a.coefficient,
                    "support_leak": a.check.support_leak,
                    "moments": a.check.moments,
                    "norm_slack": a.check.lp_norm / a.check.bound,
                })
            })
            .collect();
        serde_json::json!({
            "flavor": self.flavor,
            "coefficient_sum": self.coefficient_sum,
            "level_mass_sum": self.level_mass_sum,
            "square_norm": self.square_norm,
            "residual_l1w": self.residual_l1w,
            "f_l1w": self.f_l1w,
            "atoms": atoms,
        })
    }
}

/// `C_ψ = (∫₀^∞ ψ(s) s² e^{-s²} ds/s)^{-1}` by composite Simpson on `[0, 12]`.
pub fn psi_calibration() -> f64 {
    let m = 120_000;
    let b = 12.0;
    let h = b / m as f64;
    let g = |s: f64| if s == 0.0 { 0.0 } else { psi_multiplier(s) * s * (-s * s).exp() };
    let mut acc = g(0.0) + g(b);
    for i in 1..m {
        acc += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 / (acc * h / 3.0)
}

struct Levels {
    ks: Vec<i32>,
    omega: Vec<GridFunction>,
    omega_tilde: Vec<Vec<bool>>,
}

fn levels(s: &GridFunction, w: &Weight, lattice: &DyadicLattice) -> Result<Levels> {
    let max = s.values.iter().cloned().fold(0.0, f64::max);
    let min_pos = s.values.iter().cloned().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    if !(max > 0.0) {
        return Err(Error::Decomposition("square function vanishes on the grid".into()));
    }
    let k_lo = min_pos.log2().floor() as i32 - 1;
    let k_hi = max.log2().floor() as i32;
    let mut ks = Vec::new();
    let mut omega = Vec::new();
    let mut omega_tilde = Vec::new();
    for k in k_lo..=k_hi {
        let th = 2f64.powi(k);
        let ind = s.map(|v| if v > th { 1.0 } else { 0.0 })?;
        let m = weighted_maximal(&ind, w, lattice)?;
        omega_tilde.push(m.values.iter().map(|v| *v > 0.5).collect());
        omega.push(ind);
        ks.push(k);
    }
    Ok(Levels { ks, omega, omega_tilde })
}

impl Levels {
    /// Index into `ks` of the level `k` with `Q ∈ B_k`, if any.
    fn level_of(&self, q: &CellBox, w: &Weight) -> Option<usize> {
        let g = w.grid();
        let cells = q.flat_cells(&g);
        let wq: f64 = cells.iter().map(|&i| w.at(i)).sum();
        (0..self.ks.len()).rev().find(|&j| {
            let inside: f64 = cells.iter().map(|&i| w.at(i) * self.omega[j].values[i]).sum();
            inside > 0.5 * wq
        })
    }

    /// Largest ancestor of `q` (inclusive) whose cells all lie in `Ω̃_k`.
    fn anchor(&self, j: usize, q: &DyadicCube, lattice: &DyadicLattice) -> DyadicCube {
        let g = lattice.grid;
        let inside = |c: &DyadicCube| lattice.cell_box(c).flat_cells(&g).iter().all(|&i| self.omega_tilde[j][i]);
        let mut best = *q;
        let mut cur = *q;
        while let Some(p) = lattice.parent(&cur) {
            if inside(&p) {
                best = p;
            }
            cur = p;
        }
        best
    }
}

fn l1w(f: &GridFunction, w: &Weight) -> f64 {
    f.values.iter().zip(&w.values.values).map(|(a, b)| a.abs() * b).sum::<f64>() * f.grid.cell_volume()
}

/// Level-set atomic decomposition of `f`.
pub fn atomic_decompose(f: &GridFunction, flavor: AtomFlavor, w: &Weight, p: f64) -> Result<AtomicDecomposition> {
    if w.grid() != f.grid || !f.grid.is_full() {
        return Err(Error::Domain("atomic decomposition needs matching full-space grids".into()));
    }
    let g = f.grid;
    let top = max_generation_for(&g);
    let n = g.points_per_axis;
    let hv = g.cell_volume();
    let (lattice, s) = match flavor {
        AtomFlavor::HaarWavelet => {
            let l = DyadicLattice::unshifted(&g, top)?;
            let s = haar_square_function(f, &l)?;
            (l, s)
        }
        AtomFlavor::HeatPsi => {
            if top == 0 {
                return Err(Error::GridAlignment("grid too coarse for Whitney boxes".into()));
            }
            let l = DyadicLattice::unshifted(&g, top - 1)?;
            let t_min = l.sidelength(top - 1) / 2.0 * 2f64.powf(1.0 / 8.0);
            let tg = TimeGrid::new(&g, t_min, 2.0 * g.halfwidth, 8)?;
            let s = area_function(f, Generator::HeatQt, Cone::Free, &tg)?;
            (l, s)
        }
    };
    let lv = levels(&s, w, &lattice)?;
    let square_norm = l1w(&s, w);
    let level_mass_sum: f64 = lv
        .ks
        .iter()
        .zip(&lv.omega)
        .map(|(k, o)| 2f64.powi(*k) * o.values.iter().zip(&w.values.values).map(|(a, b)| a * b).sum::<f64>() * hv)
        .sum();

    // (level index, anchor id) -> member cubes
    let mut groups: std::collections::BTreeMap<(usize, usize), Vec<DyadicCube>> = Default::default();
    let coeffs: Option<HaarCoefficients> = match flavor {
        AtomFlavor::HaarWavelet => Some(haar_coefficients(f, &lattice)?),
        AtomFlavor::HeatPsi => None,
    };
    for q in lattice.cubes() {
        let b = lattice.cell_box(&q);
        if flavor == AtomFlavor::HaarWavelet && b.len[0] < 2 {
            continue;
        }
        if let Some(j) = lv.level_of(&b, w) {
            let a = lv.anchor(j, &q, &lattice);
            groups.entry((j, lattice.id(&a))).or_default().push(q);
        }
    }

    let c_psi = psi_calibration();
    let per_octave = 8usize;
    let dt = std::f64::consts::LN_2 / per_octave as f64;
    let psi_backend = if g.dim == 1 { Backend::Quadrature } else { Backend::FourierMultiplier };
    let mut atoms = Vec::new();
    let mut synth = vec![0.0; g.len()];
    for ((j, aid), members) in &groups {
        let anchor = lattice.cube(*aid);
        let k = lv.ks[*j];
        let abox = lattice.cell_box(&anchor);
        let lambda = 2f64.powi(k) * w.mass(&abox);
        let piece = match flavor {
            AtomFlavor::HaarWavelet => {
                let cs = coeffs.as_ref().expect("haar coefficients");
                let set: std::collections::HashSet<DyadicCube> = members.iter().cloned().collect();
                let sub = HaarCoefficients {
                    dim: g.dim,
                    entries: cs.entries.iter().filter(|e| set.contains(&e.0)).cloned().collect(),
                };
                haar_reconstruct(&sub, 0.0, &lattice)?
            }
            AtomFlavor::HeatPsi => {
                let mut by_t: std::collections::BTreeMap<(u32, usize), Vec<f64>> = Default::default();
                for q in members {
                    let ell = lattice.sidelength(q.generation);
                    for jt in 0..per_octave {
                        let t = ell * 2f64.powf(-(jt as f64) / per_octave as f64);
                        let field = Generator::HeatQt.field(f, t)?;
                        let u = by_t.entry((q.generation, jt)).or_insert_with(|| vec![0.0; g.len()]);
                        for i in lattice.cell_box(q).flat_cells(&g) {
                            u[i] += field.values[i];
                        }
                    }
                }
                let mut acc = vec![0.0; g.len()];
                for ((gen, jt), u) in by_t {
                    let t = lattice.sidelength(gen) * 2f64.powf(-(jt as f64) / per_octave as f64);
                    let op = OperatorHandle::Psi { t, backend: psi_backend };
                    let out = apply(&op, &GridFunction::new(g, u)?)?;
                    for (a, v) in acc.iter_mut().zip(&out.values) {
                        *a += c_psi * dt * v;
                    }
                }
                GridFunction::new(g, acc)?
            }
        };
        for (sv, v) in synth.iter_mut().zip(&piece.values) {
            *sv += v;
        }
        let atom = piece.map(|v| v / lambda)?;
        let support = match flavor {
            AtomFlavor::HaarWavelet => abox,
            AtomFlavor::HeatPsi => abox.dilate_clipped(3, n),
        };
        let check = check_atom(&atom, &support, p, 0, w)?;
        atoms.push(AtomEntry { level: k, anchor, support, coefficient: lambda, atom, check });
    }
    let residual = f.zip_with(&GridFunction::new(g, synth)?, |a, b| a - b)?;
    Ok(AtomicDecomposition {
        flavor,
        coefficient_sum: atoms.iter().map(|a| a.coefficient.abs()).sum(),
        atoms,
        residual_l1w: l1w(&residual, w),
        f_l1w: l1w(f, w),
        residual,
        level_mass_sum,
        square_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::haar_function;
    use crate::grid::Grid;

    #[test]
    fn zero_function() {
        let g = Grid::full(1, 1.0, 32).unwrap();
        let w = Weight::unit(g);
        let z = GridFunction::zeros(g);
        assert!(check_atom(&z, &CellBox::whole(&g), 2.0, 1, &w).unwrap().passes());
        assert!(matches!(atomic_decompose(&z, AtomFlavor::HaarWavelet, &w, 2.0), Err(Error::Decomposition(_))));
    }

    #[test]
    fn haar_atom_rescale() {
        let g = Grid::full(1, 1.0, 32).unwrap();
        let w = Weight::unit(g);
        let l = DyadicLattice::unshifted(&g, 5).unwrap();
        let q = l.cube(0);
        let h = haar_function(&l, &q, 0).unwrap();
        let c = check_atom(&h, &l.cell_box(&q), 2.0, 0, &w).unwrap();
        assert!(c.support_ok && c.moments_ok && !c.norm_ok, "{c:?} {q:?}");
        let side = l.sidelength(q.generation);
        assert!((c.required_scale - side.powf(-0.5)).abs() < 1e-12);
        let mean = GridFunction::constant(g, 1.0);
        assert!(!check_atom(&mean, &CellBox::whole(&g), 2.0, 0, &w).unwrap().moments_ok);
    }

    #[test]
    fn psi_calibration_is_stable() {
        let c = psi_calibration();
        assert!(c.is_finite() && c > 0.0);
    }
}
