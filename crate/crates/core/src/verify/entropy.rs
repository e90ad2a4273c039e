use super::{Relation, Report, Table};
use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::solver::{Stencil, Trajectory};

/// Cell entropy residuals for `S(u) = |u − k|`, one row per step.
///
/// With `Q_{i+½} = F(u_i ∨ k, u_{i+1} ∨ k) − F(u_i ∧ k, u_{i+1} ∧ k)` and the
/// discrete source `D_i(k) = (F_{i+½}(k, k) − F_{i−½}(k, k))/Δx`,
///
/// ```text
/// R_i = (|u_i^{n+1} − k + Δt D_i(k)| − |u_i^n − k|)/Δt + (Q_{i+½} − Q_{i−½})/Δx,
/// ```
///
/// the discrete form of
/// `d|u − k| + ∂_x[sgn(u − k)(A(x,u) − A(x,k))] Ẇ + sgn(u − k) ∂_x A(x, k) Ẇ ≤ 0`. A monotone scheme gives `R ≤ 0` up to
/// rounding.
#[derive(Clone, Debug, PartialEq)]
pub struct KruzkovResiduals {
    pub level: f64,
    /// Start time of each step.
    pub t: Vec<f64>,
    pub dt: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

pub fn kruzkov_residuals(traj: &Trajectory, flux: &FluxModel, k: f64) -> Result<KruzkovResiduals> {
    if traj.snapshots.iter().skip(1).any(|s| s.substeps.len() != 1) {
        return Err(Error::arg("entropy residual needs a trajectory recorded at every step"));
    }
    let grid = traj.grid;
    let n = grid.n_cells();
    let dx = grid.dx();
    let stencil = Stencil::new(flux, &grid, traj.scheme);
    let mut out = KruzkovResiduals {
        level: k,
        t: Vec::new(),
        dt: Vec::new(),
        values: Vec::new(),
    };
    let mut q = vec![0.0; n + 1];
    let mut d = vec![0.0; n + 1];
    for w in traj.snapshots.windows(2) {
        let (before, after) = (&w[0].u, &w[1].u);
        let sub = w[1].substeps[0];
        let mut row = vec![0.0; n];
        if sub.sigma != 0.0 {
            for f in 0..=n {
                let ul = stencil.cell(before, f as isize - 1);
                let ur = stencil.cell(before, f as isize);
                q[f] = stencil.pair_flux(f, ul.max(k), ur.max(k), sub.sigma)
                    - stencil.pair_flux(f, ul.min(k), ur.min(k), sub.sigma);
                d[f] = stencil.pair_flux(f, k, k, sub.sigma);
            }
        }
        for i in 0..n {
            row[i] = if sub.sigma == 0.0 {
                ((after[i] - k).abs() - (before[i] - k).abs()) / sub.dt
            } else {
                let src = (d[i + 1] - d[i]) / dx;
                ((after[i] - k + sub.dt * src).abs() - (before[i] - k).abs()) / sub.dt + (q[i + 1] - q[i]) / dx
            };
        }
        out.t.push(w[0].t);
        out.dt.push(sub.dt);
        out.values.push(row);
    }
    Ok(out)
}

/// Kruzkov entropy check for level `k`: the largest cell residual and the
/// largest weak residual `Σ Δt Δx φ R` over the test functions `φ ≡ 1` and
/// bumps of width `|domain|/4` centred on a uniform set of points must not
/// exceed `tol`.
pub fn entropy_residual(traj: &Trajectory, flux: &FluxModel, k: f64, tol: f64) -> Result<Report> {
    let res = kruzkov_residuals(traj, flux, k)?;
    let grid = traj.grid;
    let xs = grid.centers();
    let dx = grid.dx();
    let width = grid.length() / 4.0;
    let mut tests: Vec<Vec<f64>> = vec![vec![1.0; xs.len()]];
    for c in 0..=8 {
        let centre = grid.x_lo() + grid.length() * c as f64 / 8.0;
        tests.push(
            xs.iter()
                .map(|x| {
                    let r = 2.0 * (x - centre) / width;
                    if r.abs() < 1.0 {
                        (1.0 - r * r).powi(3)
                    } else {
                        0.0
                    }
                })
                .collect(),
        );
    }
    let mut pointwise_max = f64::NEG_INFINITY;
    let mut pointwise_min = f64::INFINITY;
    // time-integrated residual per cell
    let mut integrated = vec![0.0; xs.len()];
    for (row, dt) in res.values.iter().zip(&res.dt) {
        for (i, r) in row.iter().enumerate() {
            pointwise_max = pointwise_max.max(*r);
            pointwise_min = pointwise_min.min(*r);
            integrated[i] += dt * r;
        }
    }
    let weak: Vec<f64> = tests
        .iter()
        .map(|phi| dx * phi.iter().zip(&integrated).map(|(p, r)| p * r).sum::<f64>())
        .collect();
    let weak_max = weak.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (argmin, _) = integrated
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap_or((0, &0.0));

    let mut r = Report::new("entropy");
    r.input("flux", flux.preset().name())
        .input("level", k)
        .input("cells", grid.n_cells())
        .input("steps", res.dt.len())
        .input("most_dissipative_x", xs.get(argmin).copied().unwrap_or(f64::NAN))
        .input("pointwise_min", pointwise_min);
    r.check("pointwise_max", pointwise_max, Relation::Le, tol);
    r.check("weak_max", weak_max, Relation::Le, tol);
    let mut cells = Table::new("integrated", &["x", "residual"]);
    for (x, v) in xs.iter().zip(&integrated) {
        cells.push(vec![*x, *v]);
    }
    let mut weak_t = Table::new("weak", &["test_function", "residual"]);
    for (j, v) in weak.iter().enumerate() {
        weak_t.push(vec![j as f64, *v]);
    }
    r.tables.push(cells);
    r.tables.push(weak_t);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::StateBox;
    use crate::path::RoughPath;
    use crate::solver::{solve, Boundary, Grid1D, Snapshots, SolverConfig};

    fn shock() -> (FluxModel, Trajectory) {
        let f = FluxModel::burgers(StateBox::new((-1.0, 1.0), (-2.0, 2.0)).unwrap());
        let g = Grid1D::new(-1.0, 1.0, 80, Boundary::Outflow).unwrap();
        let u0 = g.sample(|x| if x < 0.0 { 1.0 } else { -1.0 });
        let p = RoughPath::linear(1.0, 0.5).unwrap();
        let t = solve(&f, &p, &u0, &g, SolverConfig::default(), &Snapshots::EveryStep { horizon: 0.5 }).unwrap();
        (f, t)
    }

    #[test]
    fn level_outside_range_is_conservation() {
        let (f, t) = shock();
        let res = kruzkov_residuals(&t, &f, 3.0).unwrap();
        let worst = res.values.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn shock_dissipates_for_interior_level() {
        let (f, t) = shock();
        let r = entropy_residual(&t, &f, 0.2, 1e-10).unwrap();
        assert!(r.pass());
        let pmin: f64 = r.inputs.iter().find(|(k, _)| k == "pointwise_min").unwrap().1.parse().unwrap();
        assert!(pmin < -0.1);
        let x: f64 = r.inputs.iter().find(|(k, _)| k == "most_dissipative_x").unwrap().1.parse().unwrap();
        assert!(x.abs() < 0.05);
    }

    #[test]
    fn constant_state_at_level_has_zero_residual() {
        let f = FluxModel::burgers(StateBox::new((-1.0, 1.0), (-2.0, 2.0)).unwrap());
        let g = Grid1D::new(-1.0, 1.0, 20, Boundary::Periodic).unwrap();
        let p = RoughPath::linear(-1.0, 0.2).unwrap();
        let t = solve(&f, &p, &[0.4; 20], &g, SolverConfig::default(), &Snapshots::EveryStep { horizon: 0.2 })
            .unwrap();
        let res = kruzkov_residuals(&t, &f, 0.4).unwrap();
        assert!(res.values.iter().flatten().all(|v| v.abs() < 1e-14));
    }
}
