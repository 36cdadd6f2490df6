use hlx_core::geometry::cone_value;
use hlx_core::hamiltonian::{legendre_transform, BoxGrid, Mode, SampledTable};
use hlx_core::hopflax::{verify_flow_laws, FlowParams};
use hlx_core::patching::{patch, PatchConfig};
use hlx_core::solver::{comparison_gap, solver_params, sweep, SolveConfig};
use hlx_core::{Grid, HamiltonianModel, ScalarField};
use proptest::prelude::*;

fn grid17() -> Grid {
    Grid::new_2d(17, 17, [0.0, 0.0], [1.0, 1.0]).unwrap()
}

fn field(vals: Vec<f64>) -> ScalarField {
    ScalarField::constant(&grid17(), 0.0).with_values(vals)
}

fn models() -> Vec<HamiltonianModel> {
    vec![
        HamiltonianModel::half_square(2).unwrap(),
        HamiltonianModel::euclidean(2).unwrap(),
        HamiltonianModel::diagonal(&[1.0, 4.0]).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flow_laws_hold(vals in prop::collection::vec(-1.0f64..1.0, 289), t in 0.15f64..0.6, which in 0usize..3, seed in any::<u64>()) {
        let u = field(vals);
        let h = &models()[which];
        let fp = FlowParams::new(h, &u.grid, t, u.osc()).unwrap();
        let rep = verify_flow_laws(&u, &fp, seed).unwrap();
        prop_assert!(rep.ok(), "{:?}", rep.violations.first());
    }

    #[test]
    fn sweep_is_monotone(vals in prop::collection::vec(0.0f64..1.0, 289), bumps in prop::collection::vec(0.0f64..0.5, 289), which in 0usize..2) {
        let u = field(vals);
        let v = u.with_values(u.values.iter().zip(&bumps).enumerate().map(|(x, (a, b))| if u.mask[x] { *a } else { a + b }).collect());
        let h = &models()[which];
        // parameters from the wider field so one FlowParams serves both
        let fp = solver_params(h, &v, &SolveConfig::default()).unwrap();
        let bound = FlowParams::new(h, &v.grid, fp.t, u.osc().max(v.osc())).unwrap();
        let (su, _) = sweep(&bound, &u, 1.0);
        let (sv, _) = sweep(&bound, &v, 1.0);
        prop_assert!(su.values.iter().zip(&sv.values).all(|(a, b)| a <= b));
    }

    #[test]
    fn affine_fields_are_fixed(p0 in -1.0f64..1.0, p1 in -1.0f64..1.0, c in -1.0f64..1.0, which in 0usize..3) {
        let u = ScalarField::from_fn(&grid17(), |x| p0 * x[0] + p1 * x[1] + c);
        let h = &models()[which];
        let fp = solver_params(h, &u, &SolveConfig::default()).unwrap();
        let (next, res) = sweep(&fp, &u, 1.0);
        prop_assert!(res < 1e-12);
        prop_assert!(next.values.iter().zip(&u.values).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn sweep_keeps_boundary_range(vals in prop::collection::vec(-1.0f64..1.0, 289), which in 0usize..3) {
        let u = field(vals);
        let (lo, hi) = (0..u.len()).filter(|&x| u.mask[x]).map(|x| u.values[x]).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let clamped = u.with_values(u.values.iter().map(|v| v.clamp(lo, hi)).collect());
        let fp = solver_params(&models()[which], &clamped, &SolveConfig::default()).unwrap();
        let (next, _) = sweep(&fp, &clamped, 1.0);
        prop_assert!(next.values.iter().all(|v| *v >= lo && *v <= hi));
    }

    #[test]
    fn comparison_gap_ignores_constants(vals in prop::collection::vec(-1.0f64..1.0, 289), c in -3.0f64..3.0) {
        let u = field(vals);
        let v = u.with_values(u.values.iter().map(|a| a + c).collect());
        prop_assert!(comparison_gap(&u, &v).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fast_conjugate_matches_brute(vals in prop::collection::vec(-2.0f64..2.0, 2..80), lo in -3.0f64..0.0, span in 0.5f64..4.0) {
        let n = vals.len();
        let primal = BoxGrid::new(vec![n], vec![-1.0], vec![1.0]).unwrap();
        let table = SampledTable { grid: primal, values: vals };
        let dual = BoxGrid::new(vec![97], vec![lo], vec![lo + span]).unwrap();
        let fast = legendre_transform(&table, &dual, Mode::Fast).unwrap();
        let brute = legendre_transform(&table, &dual, Mode::Brute).unwrap();
        prop_assert!(fast.values.iter().zip(&brute.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn cones_are_positively_homogeneous(x0 in -1.0f64..1.0, x1 in -1.0f64..1.0, lam in 0.0f64..5.0, k in 0.01f64..4.0, which in 0usize..3) {
        let h = &models()[which];
        let a = cone_value(h, k, &[lam * x0, lam * x1]).unwrap();
        let b = lam * cone_value(h, k, &[x0, x1]).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
    }

    #[test]
    fn patch_stays_below_and_keeps_the_mask(amp in 0.05f64..0.4, fx in 0.5f64..3.0, gamma in 0.02f64..0.5) {
        let h = HamiltonianModel::half_square(2).unwrap();
        let grid = Grid::new_2d(17, 17, [0.0, 0.0], [1.0, 1.0]).unwrap();
        let u = ScalarField::from_fn(&grid, |x| amp * (fx * x[0]).sin() * (2.0 * x[1]).cos());
        let r = patch(&h, &u, gamma, &PatchConfig::new(vec![0.04, 0.08])).unwrap();
        prop_assert!(r.u_gamma.values.iter().zip(&u.values).all(|(a, b)| a <= b));
        prop_assert!((0..u.len()).filter(|&x| u.mask[x]).all(|x| r.u_gamma.values[x] == u.values[x]));
    }
}
