use proptest::prelude::*;
use reflect_ha::bmo::{bmo_norm, BmoFlavor, BmoOptions};
use reflect_ha::dyadic::*;
use reflect_ha::grid::{extend_even, extend_odd, restrict};
use reflect_ha::sparse::*;
use reflect_ha::testfns::random_weight;
use reflect_ha::weights::*;
use reflect_ha::*;

const N: usize = 32;

fn grid() -> Grid {
    Grid::full(1, 1.0, N).unwrap()
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, N)
}

fn positive() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..20.0, N)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bmo_ignores_constants_and_scales(v in values(), wv in positive(), c in -50.0f64..50.0, s in -5.0f64..5.0) {
        let g = grid();
        let f = GridFunction::new(g, v).unwrap();
        let w = Weight::new(GridFunction::new(g, wv).unwrap()).unwrap();
        let o = BmoOptions::default();
        for fl in [BmoFlavor::ClassicalW, BmoFlavor::ClassicalWr { r: 2.0 }, BmoFlavor::CarlesonHaar] {
            let base = bmo_norm(&f, &w, fl, &o).unwrap();
            let shifted = bmo_norm(&f.map(|x| x + c).unwrap(), &w, fl, &o).unwrap();
            let scaled = bmo_norm(&f.map(|x| s * x).unwrap(), &w, fl, &o).unwrap();
            prop_assert!(rel_close(base, shifted, 1e-9), "{fl:?}: {base} vs {shifted}");
            prop_assert!(rel_close(s.abs() * base, scaled, 1e-9), "{fl:?}: {base} vs {scaled}");
        }
    }

    #[test]
    fn ap_at_least_one_and_conjugate_duality(wv in positive(), p in 1.2f64..4.0) {
        let g = grid();
        let w = Weight::new(GridFunction::new(g, wv).unwrap()).unwrap();
        let fam = LatticeFamily::standard(&g, max_generation_for(&g)).unwrap();
        let a = ap_constant(&w, p, &fam).unwrap();
        prop_assert!(a >= 1.0 - 1e-12);
        let sigma = conjugate_weight(&w, p).unwrap();
        let pc = p / (p - 1.0);
        let b = ap_constant(&sigma, pc, &fam).unwrap();
        prop_assert!(rel_close(b, a.powf(1.0 / (p - 1.0)), 1e-9), "{b} vs {a}");
    }

    #[test]
    fn sparse_operator_linear_and_positive(seed in 0u64..1000, u in values(), v in values(), s in -3.0f64..3.0) {
        let g = grid();
        let lat = DyadicLattice::unshifted(&g, max_generation_for(&g)).unwrap();
        let w = random_weight(&lat, 6, 3.0, seed).unwrap();
        let sp = cz_sparse(&w.values, &lat, &lat.cube(0), 2.0).unwrap();
        prop_assert!(sp.verify());
        let fu = GridFunction::new(g, u).unwrap();
        let fv = GridFunction::new(g, v).unwrap();
        let comb = fu.zip_with(&fv, |a, b| s * a + b).unwrap();
        let lhs = sparse_operator_apply(&sp, &comb).unwrap();
        let au = sparse_operator_apply(&sp, &fu).unwrap();
        let av = sparse_operator_apply(&sp, &fv).unwrap();
        for i in 0..g.len() {
            prop_assert!((lhs.values[i] - (s * au.values[i] + av.values[i])).abs() <= 1e-10 * (1.0 + lhs.values[i].abs()));
        }
        let absu = fu.map(f64::abs).unwrap();
        let a_abs = sparse_operator_apply(&sp, &absu).unwrap();
        for i in 0..g.len() {
            prop_assert!(a_abs.values[i] >= au.values[i].abs() - 1e-12);
        }
    }

    #[test]
    fn haar_parseval(v in values()) {
        let g = grid();
        let lat = DyadicLattice::unshifted(&g, max_generation_for(&g)).unwrap();
        let f = GridFunction::new(g, v).unwrap();
        let c = haar_coefficients(&f, &lat).unwrap();
        let mean = f.integral() / 2.0;
        let lhs = c.sum_squares() + 2.0 * mean * mean;
        let rhs = f.lp_norm(2.0).powi(2);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300));
    }

    #[test]
    fn csv_round_trip(v in values()) {
        let f = GridFunction::new(grid(), v).unwrap();
        let back = GridFunction::from_csv(&f.to_csv()).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn extensions_restrict_back(v in prop::collection::vec(-10.0f64..10.0, N / 2)) {
        let g = Grid::new(1, 1.0, N, Domain::UpperHalf).unwrap();
        let f = GridFunction::new(g, v).unwrap();
        let e = extend_even(&f).unwrap();
        let o = extend_odd(&f).unwrap();
        prop_assert_eq!(&restrict(&e, Side::Upper).unwrap(), &f);
        prop_assert_eq!(&restrict(&o, Side::Upper).unwrap(), &f);
        let lo_e = restrict(&e, Side::Lower).unwrap();
        let lo_o = restrict(&o, Side::Lower).unwrap();
        for i in 0..N / 2 {
            prop_assert_eq!(lo_e.values[i], f.values[N / 2 - 1 - i]);
            prop_assert_eq!(lo_o.values[i], -f.values[N / 2 - 1 - i]);
        }
    }
}
