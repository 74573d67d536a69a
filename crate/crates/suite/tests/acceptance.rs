//! One PASS/FAIL line per acceptance criterion.

use reflect_ha::dyadic::*;
use reflect_ha::grid::{extend_even, extend_odd, restrict};
use reflect_ha::harness::{self, Experiment, ExperimentConfig, ExperimentReport};
use reflect_ha::kernels::{eval_kernel, eval_qt, Boundary, KernelFamily, KernelSpec};
use reflect_ha::operators::{apply, commutator_apply, Backend, OperatorHandle};
use reflect_ha::sparse::*;
use reflect_ha::squarefn::{area_function, Cone, Generator, TimeGrid};
use reflect_ha::testfns::{random_haar_sum, random_weight, rng};
use reflect_ha::weights::ap_constant;
use reflect_ha::*;
use rand::Rng;
use std::io::Write;
use std::path::Path;

struct Ledger {
    lines: Vec<(String, bool, String)>,
}

impl Ledger {
    fn record(&mut self, id: &str, pass: bool, detail: String) {
        let line = format!("{} {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        // written straight to the stream so the lines show even when output is captured
        let _ = writeln!(std::io::stderr(), "{line}");
        self.lines.push((id.to_string(), pass, detail));
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sup(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

fn half_grid(n: usize) -> Grid {
    Grid::new(1, 1.0, n, Domain::UpperHalf).unwrap()
}

fn smooth_half(g: Grid) -> GridFunction {
    GridFunction::from_fn(g, |x| (x[g.dim - 1] * 3.0).sin() + 0.5 * (-(x[0] - 0.3).powi(2) * 20.0).exp()).unwrap()
}

fn structural(l: &mut Ledger) {
    // 1.1 semigroup reflection identity
    let g = half_grid(256);
    let f = smooth_half(g);
    let mut worst: f64 = 0.0;
    for t in [0.001, 0.01, 0.1] {
        let n = apply(&OperatorHandle::Semigroup { boundary: Boundary::Neumann, t, backend: Backend::Quadrature }, &f).unwrap();
        let fe = extend_even(&f).unwrap();
        let free = apply(&OperatorHandle::Semigroup { boundary: Boundary::Free, t, backend: Backend::Quadrature }, &fe).unwrap();
        let r = restrict(&free, Side::Upper).unwrap();
        worst = worst.max(max_abs_diff(&n.values, &r.values) / sup(&r.values));
    }
    l.record("1.1 semigroup reflection", worst <= 1e-10, format!("max rel diff {worst:.3e} (tol 1e-10)"));

    // 1.2 Neumann and Dirichlet Riesz reductions
    let g2 = Grid::new(2, 1.0, 32, Domain::UpperHalf).unwrap();
    let mut worst: f64 = 0.0;
    for g in [g, g2] {
        let f = smooth_half(g);
        for j in 1..=g.dim {
            for (bd, ext) in [(Boundary::Neumann, extend_even(&f).unwrap()), (Boundary::Dirichlet, extend_odd(&f).unwrap())] {
                let a = apply(&OperatorHandle::riesz(bd, j), &f).unwrap();
                let b = restrict(&apply(&OperatorHandle::riesz(Boundary::Free, j), &ext).unwrap(), Side::Upper).unwrap();
                worst = worst.max(max_abs_diff(&a.values, &b.values) / sup(&b.values));
            }
        }
    }
    l.record("1.2 Riesz reductions (Neumann even, Dirichlet odd)", worst <= 1e-10, format!("max rel diff {worst:.3e} (tol 1e-10)"));

    // 1.3 commutator reduction
    let f = smooth_half(g);
    let b = GridFunction::from_fn(g, |x| (x[0] + 0.01).ln()).unwrap();
    let a = commutator_apply(&b, &OperatorHandle::riesz(Boundary::Neumann, 1), &f).unwrap();
    let c = commutator_apply(&extend_even(&b).unwrap(), &OperatorHandle::riesz(Boundary::Free, 1), &extend_even(&f).unwrap()).unwrap();
    let c = restrict(&c, Side::Upper).unwrap();
    let d = max_abs_diff(&a.values, &c.values) / sup(&c.values);
    l.record("1.3 commutator reduction", d <= 1e-10, format!("max rel diff {d:.3e} (tol 1e-10)"));

    // 1.4 pointwise (√2/2) identity for the Neumann area function
    let g = half_grid(512);
    let f = smooth_half(g);
    let tg = TimeGrid::standard(&g.with_domain(Domain::FullSpace));
    let sn = area_function(&f, Generator::HeatQt, Cone::Neumann, &tg).unwrap();
    let sf = restrict(&area_function(&extend_even(&f).unwrap(), Generator::HeatQt, Cone::Free, &tg).unwrap(), Side::Upper).unwrap();
    let ratios: Vec<f64> = sn.values.iter().zip(&sf.values).map(|(a, b)| a / b).collect();
    let target = std::f64::consts::FRAC_1_SQRT_2;
    let dev = ratios.iter().map(|r| (r - target).abs() / target).fold(0.0, f64::max);
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
    l.record(
        "1.4 S_N = (√2/2) S(f_e) pointwise",
        dev <= 1e-8,
        format!("max rel dev {dev:.3e} (tol 1e-8); S_N/S(f_e) ranges over [{lo:.4}, {hi:.4}]"),
    );

    // 1.5 Heaviside locality
    let g = Grid::full(1, 1.0, 256).unwrap();
    let base = GridFunction::from_fn(g, |x| (4.0 * x[0]).cos()).unwrap();
    let mut r = rng(5);
    let mut pert = GridFunction::zeros(g);
    for (i, v) in pert.values.iter_mut().enumerate() {
        if g.point(i)[0] < 0.0 {
            *v = r.gen_range(-5.0..5.0);
        }
    }
    let moved = base.zip_with(&pert, |a, b| a + b).unwrap();
    let half = g.points_per_axis / 2;
    let mut worst: f64 = 0.0;
    let ops = [
        OperatorHandle::Semigroup { boundary: Boundary::Neumann, t: 0.05, backend: Backend::Quadrature },
        OperatorHandle::Semigroup { boundary: Boundary::Dirichlet, t: 0.05, backend: Backend::Quadrature },
        OperatorHandle::riesz(Boundary::Neumann, 1),
        OperatorHandle::riesz(Boundary::Dirichlet, 1),
    ];
    for op in &ops {
        let a = apply(op, &base).unwrap();
        let b = apply(op, &moved).unwrap();
        worst = worst.max(max_abs_diff(&a.values[half..], &b.values[half..]));
    }
    let tg = TimeGrid::standard(&g);
    let a = area_function(&base, Generator::HeatQt, Cone::Neumann, &tg).unwrap();
    let b = area_function(&moved, Generator::HeatQt, Cone::Neumann, &tg).unwrap();
    let s_dev = max_abs_diff(&a.values[half..], &b.values[half..]) / sup(&a.values[half..]);
    worst = worst.max(s_dev);
    l.record("1.5 Heaviside locality", worst <= 1e-12, format!("max upper-side change {worst:.3e} (tol 1e-12)"));
}

/// All contiguous boxes of the standard family, each average recomputed cell by cell.
fn brute_ap(w: &Weight, p: f64) -> f64 {
    let g = w.grid();
    let k = max_generation_for(&g);
    let n = g.points_per_axis;
    let mut best: f64 = 0.0;
    for s in [Shift::None, Shift::Third, Shift::TwoThirds] {
        let l = DyadicLattice::new(&g, k, [s, s]).unwrap();
        for q in l.cubes() {
            let b = l.cell_box(&q);
            let cells = b.cells(n);
            let wrapped = (0..g.dim).any(|a| {
                let lo = b.lo[a].rem_euclid(n as i64) as usize;
                lo + b.len[a] > n
            });
            if wrapped {
                continue;
            }
            let m = cells.len() as f64;
            let aw: f64 = cells.iter().map(|c| w.values.values[g.flat_index(*c)]).sum::<f64>() / m;
            let asg: f64 = cells.iter().map(|c| w.values.values[g.flat_index(*c)].powf(-1.0 / (p - 1.0))).sum::<f64>() / m;
            best = best.max(aw * asg.powf(p - 1.0));
        }
    }
    best
}

/// Whole-cell carriers with η = 1/Λ exist iff every `Q ∈ S` holds the rounded-up claims of its subfamily.
fn whole_cell_carriers_exist(cubes: &[DyadicCube], lat: &DyadicLattice, lam: f64) -> bool {
    let eta = 1.0 / lam;
    cubes.iter().all(|q| {
        let need: usize = cubes
            .iter()
            .filter(|p| lat.contains(q, p))
            .map(|p| (eta * lat.cell_box(p).cell_count() as f64 - 1e-9).ceil() as usize)
            .sum();
        need <= lat.cell_box(q).cell_count()
    })
}

fn oracles(l: &mut Ledger) {
    // 2.1 A^p constants vs exhaustive scans
    let mut worst: f64 = 0.0;
    for (dim, n) in [(1, 128), (2, 16)] {
        let g = Grid::full(dim, 1.0, n).unwrap();
        let lat = DyadicLattice::unshifted(&g, max_generation_for(&g)).unwrap();
        let fam = LatticeFamily::standard(&g, max_generation_for(&g)).unwrap();
        for s in 0..10 {
            let w = random_weight(&lat, 6, 1.5, s).unwrap();
            for p in [1.5, 2.0, 3.0] {
                let a = ap_constant(&w, p, &fam).unwrap();
                let b = brute_ap(&w, p);
                worst = worst.max((a - b).abs() / b);
            }
        }
    }
    l.record("2.1a A^p vs exhaustive cube scan", worst <= 1e-12, format!("max rel diff {worst:.3e}"));

    // 2.1b CZ stopping vs brute-force maximality
    let g = Grid::full(1, 1.0, 64).unwrap();
    let lat = DyadicLattice::unshifted(&g, 6).unwrap();
    let mut bad = 0;
    for s in 0..100 {
        let w = random_weight(&lat, 8, 2.0, 100 + s).unwrap();
        let q0 = lat.cube(0);
        let fam = cz_stopping(&w.values, &lat, &q0, 2.0).unwrap();
        let avg = |q: &DyadicCube| w.average(&lat.cell_box(q));
        let thr = 2.0 * avg(&q0);
        let brute: Vec<DyadicCube> = lat
            .cubes()
            .filter(|q| q.generation > 0 && avg(q) > thr)
            .filter(|q| {
                let mut c = *q;
                while let Some(p) = lat.parent(&c) {
                    if p.generation == 0 {
                        break;
                    }
                    if avg(&p) > thr {
                        return false;
                    }
                    c = p;
                }
                true
            })
            .collect();
        if brute != fam.selected {
            bad += 1;
        }
    }
    l.record("2.1b CZ stopping vs brute-force re-scan", bad == 0, format!("{bad} mismatches over 100 instances"));

    // 2.1c sparse ⇔ Carleson at ≤ 6 generations
    let (mut fwd_fail, mut fwd) = (0, 0);
    let (mut back_fail, mut back, mut obstructed) = (0, 0, 0);
    let mut unexplained = 0;
    let (mut cz_back_fail, mut cz_back) = (0, 0);
    for dim in [1usize, 2] {
        let g = Grid::full(dim, 1.0, if dim == 1 { 64 } else { 16 }).unwrap();
        let k = max_generation_for(&g).min(6);
        let lat = DyadicLattice::unshifted(&g, k).unwrap();
        for s in 0..20u64 {
            let w = random_weight(&lat, 8, 2.5, 300 + s).unwrap();
            let sp = cz_sparse(&w.values, &lat, &lat.cube(0), 2.0).unwrap();
            fwd += 1;
            if !(sp.verify() && carleson_constant(&sp.cubes, &lat) <= 1.0 / sp.eta + 1e-12) {
                fwd_fail += 1;
            }
            let lam = carleson_constant(&sp.cubes, &lat);
            cz_back += 1;
            let ok = matches!(sparse_from_carleson(&sp.cubes, &lat, lam), Ok(c) if c.verify());
            if !ok {
                cz_back_fail += 1;
            }
            if ok != whole_cell_carriers_exist(&sp.cubes, &lat, lam) {
                unexplained += 1;
            }
            let mut r = rng(400 + s);
            let cubes: Vec<DyadicCube> = lat.cubes().filter(|_| r.gen_bool(0.3)).collect();
            if cubes.is_empty() {
                continue;
            }
            let lam = carleson_constant(&cubes, &lat);
            let hall = whole_cell_carriers_exist(&cubes, &lat, lam);
            back += 1;
            if !hall {
                obstructed += 1;
            }
            let ok = matches!(sparse_from_carleson(&cubes, &lat, lam), Ok(c) if c.verify());
            if !ok {
                back_fail += 1;
            }
            if ok != hall {
                unexplained += 1;
            }
        }
    }
    l.record(
        "2.1c sparse ⇔ Carleson both directions",
        fwd_fail + back_fail == 0,
        format!(
            "sparse⇒Carleson {fwd_fail}/{fwd} failures; Carleson⇒sparse on stopping families \
             {cz_back_fail}/{cz_back}, on random families {back_fail}/{back} \
             ({obstructed} with no whole-cell carriers, {unexplained} unexplained)"
        ),
    );

    // 2.1d Haar Parseval
    let mut worst: f64 = 0.0;
    for (dim, n) in [(1, 256), (2, 32)] {
        let g = Grid::full(dim, 1.0, n).unwrap();
        let lat = DyadicLattice::unshifted(&g, max_generation_for(&g)).unwrap();
        for s in 0..5 {
            let mut r = rng(s);
            let f = GridFunction::new(g, (0..g.len()).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap();
            let c = haar_coefficients(&f, &lat).unwrap();
            let mean = f.integral() / (2.0f64).powi(dim as i32);
            let lhs = c.sum_squares() + mean * mean * 2f64.powi(dim as i32);
            let rhs = f.lp_norm(2.0).powi(2);
            worst = worst.max((lhs - rhs).abs() / rhs);
        }
    }
    l.record("2.1d Haar Parseval", worst <= 1e-10, format!("max rel diff {worst:.3e}"));

    // 2.1e q_t closed form vs finite differences of the heat kernel
    let mut worst: f64 = 0.0;
    for dim in [1usize, 2] {
        for t in [0.05, 0.3, 1.0] {
            let x = [0.1, -0.2];
            let y = [0.25, 0.05];
            let heat = |s: f64| eval_kernel(&KernelSpec::new(KernelFamily::HeatFree, dim, s).unwrap(), &x[..dim], &y[..dim]).unwrap();
            let s = t * t;
            let eps = s * 1e-4;
            let fd = -s * (heat(s + eps) - heat(s - eps)) / (2.0 * eps);
            let q = eval_qt(&x[..dim], &y[..dim], t).unwrap();
            worst = worst.max((q - fd).abs() / q.abs());
        }
    }
    l.record("2.1e q_t closed form vs finite differences", worst <= 1e-6, format!("max rel diff {worst:.3e}"));
}

fn quantitative(l: &mut Ledger, jn: &ExperimentReport) {
    // 3.1 John–Nirenberg
    let min_rho = jn.fitted["min_rho"];
    let c = jn.fitted["C"];
    let n = jn.rows.len();
    let bounded = jn.rows.iter().all(|r| {
        let rho = r["rho"].as_f64().unwrap();
        let pred = r["predictor"].as_f64().unwrap();
        rho <= c * pred * (1.0 + 1e-12)
    });
    l.record(
        "3.1 John–Nirenberg ρ ≥ 1 and ρ ≤ C [w]^max(1,1/(p−1))",
        min_rho >= 1.0 - 1e-12 && bounded && n == 200,
        format!("{n} instances, min ρ = {min_rho:.15}, fitted C = {c:.4}"),
    );

    // 3.2 sparse A² bound
    let g = Grid::full(1, 1.0, 128).unwrap();
    let lat = DyadicLattice::unshifted(&g, 7).unwrap();
    let fam = LatticeFamily::single(lat.clone());
    let mut fitted: f64 = 0.0;
    let mut rows = Vec::new();
    for s in 0..50u64 {
        let w = random_weight(&lat, 8, 0.5 + (s % 5) as f64 * 0.5, 500 + s).unwrap();
        let driver = random_weight(&lat, 8, 3.0, 600 + s).unwrap();
        let sp = cz_sparse(&driver.values, &lat, &lat.cube(0), 2.0).unwrap();
        let (nm, _) = sparse_weighted_norm(&sp, &w, 2.0, 0).unwrap();
        let a2 = ap_constant(&w, 2.0, &fam).unwrap();
        let c = nm * sp.eta / a2;
        fitted = fitted.max(c);
        rows.push((nm, a2, sp.eta));
    }
    let holds = rows.iter().all(|(nm, a2, eta)| *nm <= fitted * a2 / eta * (1.0 + 1e-12));
    l.record("3.2 sparse ‖A_S‖_{L²(w)} ≤ C [w]_{A²}/η", holds && fitted.is_finite(), format!("50 instances, fitted C = {fitted:.4}"));

    // 3.3 good-function bound with α = 2
    let mut worst: f64 = 0.0;
    let mut viol = 0;
    for (dim, n) in [(1usize, 128usize), (2, 16)] {
        let g = Grid::full(dim, 1.0, n).unwrap();
        let lat = DyadicLattice::unshifted(&g, max_generation_for(&g)).unwrap();
        let q0 = lat.cube(0);
        let unit = Weight::unit(g);
        for s in 0..50u64 {
            let w = random_weight(&lat, 8, 2.0, 700 + s).unwrap();
            let b = random_haar_sum(&lat, &w, 10, 800 + s).unwrap();
            let (a, _) = bmo_good_function(&b, &w, &lat, &q0, 2.0).unwrap();
            let lhs = dyadic_bmo(&a, &unit, &lat, &q0);
            let rhs = 2.0 * 2.0 * w.average(&lat.cell_box(&q0)) * dyadic_bmo(&b, &w, &lat, &q0);
            let slack = lhs / rhs;
            worst = worst.max(slack);
            if lhs > rhs * (1.0 + 1e-9) {
                viol += 1;
            }
        }
    }
    l.record("3.3 good function ‖a‖ ≤ 2α⟨w⟩‖b‖", viol == 0, format!("{viol} violations over 100 instances, max lhs/rhs = {worst:.4}"));

    // 3.4 stopping-family bounds
    let mut viol = 0;
    for (dim, n) in [(1usize, 128usize), (2, 16)] {
        let g = Grid::full(dim, 1.0, n).unwrap();
        let lat = DyadicLattice::unshifted(&g, max_generation_for(&g)).unwrap();
        for s in 0..50u64 {
            let w = random_weight(&lat, 8, 3.0, 900 + s).unwrap();
            for q0 in lat.cubes().filter(|q| q.generation <= 1) {
                let alpha = 2.0;
                let fam = cz_stopping(&w.values, &lat, &q0, alpha).unwrap();
                let a0 = w.average(&lat.cell_box(&q0));
                let cells0 = lat.cell_box(&q0).cell_count();
                let mass: usize = fam.selected.iter().map(|r| lat.cell_box(r).cell_count()).sum();
                if alpha * mass as f64 > cells0 as f64 {
                    viol += 1;
                }
                for r in &fam.selected {
                    let ar = w.average(&lat.cell_box(r));
                    if !(ar > alpha * a0 && ar <= 2f64.powi(dim as i32) * alpha * a0 * (1.0 + 1e-12)) {
                        viol += 1;
                    }
                }
            }
        }
    }
    l.record("3.4 stopping-family bounds", viol == 0, format!("{viol} violations"));
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn check_line(l: &mut Ledger, id: &str, r: &ExperimentReport, names: &[String]) {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in names {
        let c = r.check(n).unwrap_or_else(|| panic!("missing check {n}"));
        pass &= c.passed;
        parts.push(format!("{n}={:.4} (thr {})", c.value, c.threshold));
    }
    l.record(id, pass, parts.join(", "));
}

#[test]
fn acceptance() {
    let mut l = Ledger { lines: Vec::new() };
    let _ = writeln!(std::io::stderr(), "\nacceptance criteria");
    let base = Path::new(".");
    let cfg = ExperimentConfig::default();
    let reports: Vec<(Experiment, ExperimentReport)> =
        Experiment::ALL.iter().map(|&e| (e, harness::run(e, &cfg, base).unwrap())).collect();
    let get = |e: Experiment| &reports.iter().find(|(x, _)| *x == e).unwrap().1;

    structural(&mut l);
    oracles(&mut l);
    quantitative(&mut l, get(Experiment::JohnNirenberg));

    let all = |r: &ExperimentReport| r.checks.iter().map(|c| c.name.clone()).collect::<Vec<_>>();
    let tw = get(Experiment::TwoWeightCommutator);
    check_line(&mut l, "4.1 commutator two-sided band", tw, &all(tw));
    let bc = get(Experiment::BmoCoincidence);
    check_line(&mut l, "4.2 BMO flavor bands", bc, &all(bc));

    let ra = get(Experiment::RieszAp);
    check_line(&mut l, "5.1 Riesz norm and A^p diverge together", ra, &names(&["unit_weight_constant", "co_divergence", "norm_monotone_in_alpha"]));
    check_line(&mut l, "5.2 non-doubling weight", ra, &names(&["doubling_ratio_exceeds", "doubling_closed_form"]));
    check_line(&mut l, "5.3 classical quotient grows, Δ_N quotient stable", ra, &names(&["classical_quotient_increasing", "deltan_quotient_stable"]));
    let dc = get(Experiment::DirichletCounterexample);
    check_line(&mut l, "5.4 log x_n counterexample", dc, &all(dc));

    let mut same = true;
    for (e, r) in &reports {
        let again = harness::run(*e, &cfg, base).unwrap();
        same &= again.to_json() == r.to_json() && again.to_csv() == r.to_csv();
    }
    l.record("6 determinism", same, "all five experiments re-run byte-identically".into());

    let failed: Vec<&str> = l.lines.iter().filter(|x| !x.1).map(|x| x.0.as_str()).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
