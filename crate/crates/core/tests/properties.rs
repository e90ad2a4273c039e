use proptest::prelude::*;

use sclrough::characteristics::{flow_backward, flow_to};
use sclrough::flux::{Coefficient, FluxModel, Preset, StateBox};
use sclrough::kinetic::{chi_field, defect_measure, DefectOptions, XiGrid};
use sclrough::path::RoughPath;
use sclrough::solver::{solve, step, Boundary, Grid1D, NumericalFlux, Snapshots, SolverConfig};
use sclrough::verify::kruzkov_residuals;

const N: usize = 24;

fn inhom() -> FluxModel {
    let c = Coefficient::Sine { mean: 1.0, amp: 0.5, freq: 1.0 };
    FluxModel::new(Preset::InhomBurgers(c), StateBox::new((0.0, std::f64::consts::TAU), (-2.0, 2.0)).unwrap()).unwrap()
}

fn periodic() -> Grid1D {
    Grid1D::new(0.0, std::f64::consts::TAU, N, Boundary::Periodic).unwrap()
}

fn cells() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, N)
}

fn scheme() -> impl Strategy<Value = NumericalFlux> {
    prop_oneof![Just(NumericalFlux::SplitEngquistOsher), Just(NumericalFlux::InterfaceEngquistOsher)]
}

/// A step respecting CFL 0.45 for `|∂u A| ≤ 2 · 1.5 · |u|`.
fn stable_dt(grid: &Grid1D, sigma: f64, data: &[&[f64]]) -> f64 {
    let sup = data.iter().flat_map(|u| u.iter()).fold(1e-3f64, |m, v| m.max(v.abs()));
    0.45 * grid.dx() / (sigma.abs() * 3.0 * sup)
}

fn l1(a: &[f64], b: &[f64], dx: f64) -> f64 {
    dx * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kinetic_field_recovers_cell_values(u in cells(), dxi in 0.005f64..0.2) {
        let g = periodic();
        let xi = XiGrid::covering(1.5, 0.1, dxi).unwrap();
        let rec = chi_field(&u, &g.centers(), g.dx(), xi).unwrap().recover();
        for (a, b) in rec.iter().zip(&u) {
            prop_assert!((a - b).abs() <= dxi + 1e-12);
        }
    }

    #[test]
    fn step_contracts_and_preserves_order(
        u in cells(), v in cells(), sigma in -2.0f64..2.0, s in scheme(),
    ) {
        prop_assume!(sigma.abs() > 1e-3);
        let g = periodic();
        let f = inhom();
        let dt = stable_dt(&g, sigma, &[&u, &v]);
        let a = step(&u, &f, sigma, dt, &g, s).unwrap();
        let b = step(&v, &f, sigma, dt, &g, s).unwrap();
        prop_assert!(l1(&a, &b, g.dx()) <= l1(&u, &v, g.dx()) * (1.0 + 1e-12) + 1e-14);
        let hi: Vec<f64> = u.iter().zip(&v).map(|(x, y)| x.max(*y)).collect();
        let dt_hi = stable_dt(&g, sigma, &[&hi]);
        let top = step(&hi, &f, sigma, dt_hi, &g, s).unwrap();
        let lo = step(&u, &f, sigma, dt_hi, &g, s).unwrap();
        for (x, y) in lo.iter().zip(&top) {
            prop_assert!(x <= &(y + 1e-13));
        }
    }

    #[test]
    fn periodic_step_conserves_mass(u in cells(), sigma in -2.0f64..2.0, s in scheme()) {
        prop_assume!(sigma.abs() > 1e-3);
        let g = periodic();
        let dt = stable_dt(&g, sigma, &[&u]);
        let a = step(&u, &inhom(), sigma, dt, &g, s).unwrap();
        let before: f64 = u.iter().sum();
        let after: f64 = a.iter().sum();
        prop_assert!((before - after).abs() <= 1e-12 * (1.0 + u.len() as f64));
    }

    #[test]
    fn constant_steady_state_is_kept_by_homogeneous_flux(c in -1.5f64..1.5, seed in 0u64..1000) {
        let g = Grid1D::new(-1.0, 1.0, N, Boundary::Outflow).unwrap();
        let f = FluxModel::burgers(StateBox::new((-1.0, 1.0), (-2.0, 2.0)).unwrap());
        let p = RoughPath::sample_brownian(0.2, 17, seed).unwrap();
        let traj = solve(&f, &p, &[c; N], &g, SolverConfig::default(), &Snapshots::Times(vec![0.2])).unwrap();
        for v in &traj.last().u {
            prop_assert!((v - c).abs() <= 1e-13);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn kruzkov_residuals_are_nonpositive(u in cells(), k in -1.5f64..1.5, seed in 0u64..1000, s in scheme()) {
        let g = periodic();
        let f = inhom();
        let p = RoughPath::sample_brownian(0.1, 9, seed).unwrap();
        let cfg = SolverConfig { scheme: s, ..SolverConfig::default() };
        let traj = solve(&f, &p, &u, &g, cfg, &Snapshots::EveryStep { horizon: 0.1 }).unwrap();
        let r = kruzkov_residuals(&traj, &f, k).unwrap();
        let worst = r.values.iter().flatten().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        prop_assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn homogeneous_defect_is_nonnegative(u in cells(), seed in 0u64..1000) {
        // compact data away from the outflow edges
        let g = Grid1D::new(-4.0, 4.0, 2 * N, Boundary::Outflow).unwrap();
        let f = FluxModel::burgers(StateBox::new((-4.0, 4.0), (-2.0, 2.0)).unwrap());
        let p = RoughPath::sample_brownian(0.1, 9, seed).unwrap();
        let mut u0 = vec![0.0; 2 * N];
        u0[N / 2..N / 2 + N].copy_from_slice(&u);
        let traj = solve(&f, &p, &u0, &g, SolverConfig::default(), &Snapshots::EveryStep { horizon: 0.1 }).unwrap();
        let opts = DefectOptions { dxi: 0.05, ..DefectOptions::default() };
        let m = defect_measure(&traj, &f, opts).unwrap();
        prop_assert!(m.min_value() >= -1e-10, "{}", m.min_value());
    }

    #[test]
    fn characteristic_flow_preserves_volume_and_sign(
        y in -3.0f64..3.0, eta in -1.5f64..1.5, s in 0.05f64..1.0, back in any::<bool>(),
    ) {
        prop_assume!(eta.abs() > 1e-6);
        let f = inhom();
        let target = if back { -s } else { s };
        let st = &flow_to(&f, &[y], eta, &[target], 1e-10).unwrap()[0];
        let det = st.jac[0] * st.jac[3] - st.jac[1] * st.jac[2];
        prop_assert!((det - 1.0).abs() <= 1e-6, "{det}");
        prop_assert_eq!(st.vel.signum(), eta.signum());
        // running the same span backwards returns to the start
        if !back {
            let home = flow_backward(&f, s, &st.pos, st.vel, 1e-12).unwrap();
            prop_assert!((home.pos[0] - y).abs() <= 1e-6);
            prop_assert!((home.vel - eta).abs() <= 1e-6);
        }
    }
}
