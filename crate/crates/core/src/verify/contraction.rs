use rayon::prelude::*;

use super::{Relation, Report, Table};
use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::kinetic::{chi_field, XiGrid};
use crate::path::RoughPath;
use crate::solver::{l1_distance, solve, Grid1D, Snapshots, SolverConfig};

/// Kinetic form `∫∫ |χ₁| + |χ₂| − 2χ₁χ₂ dx dξ` of the L¹ distance, next to
/// the direct distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FIdentity {
    pub kinetic: f64,
    pub direct: f64,
}

pub fn contraction_functional(u1: &[f64], u2: &[f64], dx: f64, xi: XiGrid) -> Result<FIdentity> {
    if u1.len() != u2.len() {
        return Err(Error::arg(format!(
            "states live on different grids ({} and {} cells)",
            u1.len(),
            u2.len()
        )));
    }
    let xs: Vec<f64> = (0..u1.len()).map(|i| i as f64 * dx).collect();
    let c1 = chi_field(u1, &xs, dx, xi)?;
    let c2 = chi_field(u2, &xs, dx, xi)?;
    let sum: i64 = c1
        .values
        .iter()
        .zip(&c2.values)
        .map(|(&a, &b)| (a.abs() + b.abs() - 2 * a * b) as i64)
        .sum();
    Ok(FIdentity {
        kinetic: sum as f64 * dx * xi.dxi(),
        direct: l1_distance(u1, u2, dx),
    })
}

/// Solves every pair on the same path and checks
/// `‖u₂(t) − u₁(t)‖₁ ≤ ‖u₂⁰ − u₁⁰‖₁ + 10⁻¹⁰` at every snapshot, and that
/// ordered pairs stay ordered.
pub fn check_contraction(
    flux: &FluxModel,
    path: &RoughPath,
    pairs: &[(Vec<f64>, Vec<f64>)],
    grid: &Grid1D,
    config: SolverConfig,
    times: &[f64],
) -> Result<Report> {
    let snaps = Snapshots::Times(times.to_vec());
    let runs: Vec<_> = pairs
        .par_iter()
        .map(|(a, b)| -> Result<_> {
            let ta = solve(flux, path, a, grid, config, &snaps)?;
            let tb = solve(flux, path, b, grid, config, &snaps)?;
            Ok((ta, tb))
        })
        .collect::<Result<_>>()?;
    let dx = grid.dx();
    let mut table = Table::new("distances", &["pair", "t", "distance", "initial_distance"]);
    let mut worst_margin = f64::INFINITY;
    let mut worst_order = 0.0f64;
    let mut ordered_pairs = 0;
    for (k, ((a0, b0), (ta, tb))) in pairs.iter().zip(&runs).enumerate() {
        let d0 = l1_distance(a0, b0, dx);
        let ordered = a0.iter().zip(b0).all(|(x, y)| x <= y);
        ordered_pairs += ordered as usize;
        for (sa, sb) in ta.snapshots.iter().zip(&tb.snapshots) {
            let d = l1_distance(&sa.u, &sb.u, dx);
            worst_margin = worst_margin.min(d0 - d);
            if ordered {
                let v = sa.u.iter().zip(&sb.u).map(|(x, y)| x - y).fold(0.0, f64::max);
                worst_order = worst_order.max(v);
            }
            table.push(vec![k as f64, sa.t, d, d0]);
        }
    }
    let mut r = Report::new("contraction");
    r.input("flux", flux.preset().name())
        .input("path_kind", path.kind().as_str())
        .input("path_seed", path.seed().map_or("none".to_string(), |s| s.to_string()))
        .input("cells", grid.n_cells())
        .input("pairs", pairs.len())
        .input("ordered_pairs", ordered_pairs)
        .input("cfl", config.cfl);
    r.check("worst_margin", worst_margin, Relation::Ge, -1e-10);
    r.check("order_violation", worst_order, Relation::Le, 1e-12);
    r.tables.push(table);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::StateBox;
    use crate::solver::Boundary;

    #[test]
    fn functional_examples() {
        let xi = XiGrid::covering(2.0, 0.1, 0.01).unwrap();
        let u = vec![0.3, -0.7, 1.1];
        let same = contraction_functional(&u, &u, 0.1, xi).unwrap();
        assert_eq!(same.kinetic, 0.0);
        let f = contraction_functional(&[2.0; 10], &[1.0; 10], 0.1, xi).unwrap();
        assert!((f.kinetic - 1.0).abs() <= 0.01 + 1e-12);
        assert!(contraction_functional(&[1.0; 3], &[1.0; 4], 0.1, xi).is_err());
    }

    #[test]
    fn identical_pair_stays_at_distance_zero() {
        let f = FluxModel::burgers(StateBox::new((-2.0, 2.0), (-1.0, 1.0)).unwrap());
        let g = Grid1D::new(-2.0, 2.0, 64, Boundary::Periodic).unwrap();
        let p = RoughPath::sample_brownian(0.5, 33, 1).unwrap();
        let u = g.sample(|x| (2.0 * x).sin());
        let r = check_contraction(&f, &p, &[(u.clone(), u)], &g, SolverConfig::default(), &[0.25, 0.5]).unwrap();
        assert!(r.pass());
        assert!(r.table("distances").unwrap().column("distance").unwrap().iter().all(|&d| d == 0.0));
    }
}
