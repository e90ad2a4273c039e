use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Relation, Report, Table};
use crate::characteristics::{cancellation_gap, flow_forward, jacobian_det};
use crate::error::{Error, Result};
use crate::flux::{Flux, FluxModel};
use crate::kinetic::q_bar;
use crate::path::{PathKind, RoughPath};
use crate::solver::{exact_riemann_burgers, l1_distance, solve, Grid1D, Snapshots, SolverConfig};

/// Differences below this are treated as exact agreement in the ladder.
const LADDER_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityOptions {
    /// Coarsest mesh `h₀`; level `k` uses `h₀ / 2^k`.
    pub h0: f64,
    pub levels: usize,
    /// Allowed spread `max_k (d_k/ω(h_k)) / min_k (d_k/ω(h_k))`.
    pub ratio_spread: f64,
    /// Halve `Δx` with `h`, so the scheme's accumulated viscosity
    /// `Δx · TV(W_h)` shrinks along the ladder instead of growing. Level
    /// `k + 1` is averaged onto the grid of level `k` before comparing.
    pub refine_grid: bool,
}

/// Solutions at the horizon for dyadic piecewise-linear approximations of
/// one path: `d_k = ‖u_{h_k} − u_{h_{k+1}}‖₁` must decrease strictly and
/// `d_k / ω(h_k)` stay within a bounded spread. `u0` is averaged onto each
/// level's grid.
pub fn stability_cauchy(
    flux: &FluxModel,
    path: &RoughPath,
    opts: StabilityOptions,
    u0: &(dyn Fn(f64) -> f64 + Sync),
    grid: &Grid1D,
    config: SolverConfig,
) -> Result<Report> {
    if opts.levels < 3 {
        return Err(Error::arg(format!("stability ladder needs at least 3 levels, got {}", opts.levels)));
    }
    let hs: Vec<f64> = (0..opts.levels).map(|k| opts.h0 / 2f64.powi(k as i32)).collect();
    let grids: Vec<Grid1D> = (0..opts.levels)
        .map(|k| {
            let n = if opts.refine_grid { grid.n_cells() << k } else { grid.n_cells() };
            Grid1D::new(grid.x_lo(), grid.x_hi(), n, grid.boundary())
        })
        .collect::<Result<_>>()?;
    let finals: Vec<Vec<f64>> = hs
        .par_iter()
        .zip(&grids)
        .map(|(&h, g)| -> Result<Vec<f64>> {
            let p = path.coarsen(h)?;
            let traj = solve(flux, &p, &g.project(u0), g, config, &Snapshots::Times(vec![p.horizon()]))?;
            Ok(traj.last().u.clone())
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new("ladder", &["h", "cells", "d", "omega", "ratio"]);
    let mut ds = Vec::new();
    let mut ratios = Vec::new();
    for k in 0..opts.levels - 1 {
        let next: Vec<f64> = if opts.refine_grid {
            finals[k + 1].chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect()
        } else {
            finals[k + 1].clone()
        };
        let d = l1_distance(&finals[k], &next, grids[k].dx());
        let omega = path.oscillation(hs[k])?;
        let ratio = if omega > 0.0 { d / omega } else { 0.0 };
        table.push(vec![hs[k], grids[k].n_cells() as f64, d, omega, ratio]);
        ds.push(d);
        if d > LADDER_FLOOR {
            ratios.push(ratio);
        }
    }
    let increases = ds.windows(2).filter(|w| w[0] > LADDER_FLOOR && w[1] >= w[0]).count();
    let spread = match (
        ratios.iter().cloned().reduce(f64::max),
        ratios.iter().cloned().reduce(f64::min),
    ) {
        (Some(hi), Some(lo)) if lo > 0.0 => hi / lo,
        _ => 1.0,
    };
    let mut r = Report::new("stability");
    r.input("flux", flux.preset().name())
        .input("path_kind", path.kind().as_str())
        .input("path_seed", path.seed().map_or("none".to_string(), |s| s.to_string()))
        .input("cells", grid.n_cells())
        .input("refine_grid", opts.refine_grid)
        .input("h0", opts.h0)
        .input("levels", opts.levels);
    r.check("non_decreasing_steps", increases as f64, Relation::Le, 0.0);
    r.check("ratio_spread", spread, Relation::Le, opts.ratio_spread);
    r.tables.push(table);
    Ok(r)
}

/// L¹ error at `t` of the Burgers Riemann problem on `grid` against the
/// exact solution, driven by `W(t) = t`.
pub fn riemann_error(u_left: f64, u_right: f64, grid: &Grid1D, t: f64, config: SolverConfig) -> Result<f64> {
    let bound = u_left.abs().max(u_right.abs()).max(1.0);
    let flux = FluxModel::burgers(crate::flux::StateBox::new((grid.x_lo(), grid.x_hi()), (-bound, bound))?);
    let u0 = grid.project(|x| if x < 0.0 { u_left } else { u_right });
    let path = RoughPath::linear(1.0, t)?;
    let traj = solve(&flux, &path, &u0, grid, config, &Snapshots::Times(vec![t]))?;
    let exact = grid.project(|x| exact_riemann_burgers(u_left, u_right, x, t).unwrap());
    Ok(l1_distance(&traj.last().u, &exact, grid.dx()))
}

/// Expected outcome of a there-and-back excursion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regime {
    /// A shock forms on the way out: `‖u(T) − u⁰‖₁ > min_distance`.
    Shock { min_distance: f64 },
    /// No shock: `‖u(T) − u⁰‖₁ ≤ c Δx`.
    Smooth { c: f64 },
}

/// Drives `u0` along `W: 0 → excursion → 0` (unit slopes) and measures
/// `‖u(T) − u⁰‖₁`.
pub fn irreversibility(
    flux: &FluxModel,
    u0: &[f64],
    grid: &Grid1D,
    excursion: f64,
    regime: Regime,
    config: SolverConfig,
) -> Result<Report> {
    if !(excursion > 0.0) {
        return Err(Error::arg("excursion must be positive"));
    }
    let e = excursion.abs();
    let path = RoughPath::new(vec![0.0, e, 2.0 * e], vec![0.0, excursion, 0.0], PathKind::User)?;
    let traj = solve(flux, &path, u0, grid, config, &Snapshots::Times(vec![e, 2.0 * e]))?;
    let dist = l1_distance(&traj.last().u, u0, grid.dx());
    let mut r = Report::new("irreversibility");
    r.input("flux", flux.preset().name())
        .input("cells", grid.n_cells())
        .input("excursion", excursion)
        .input("distance_at_turn", l1_distance(&traj.snapshots[1].u, u0, grid.dx()));
    match regime {
        Regime::Shock { min_distance } => r.check("return_distance", dist, Relation::Gt, min_distance),
        Regime::Smooth { c } => r.check("return_distance", dist, Relation::Le, c * grid.dx()),
    };
    let mut table = Table::new("states", &["x", "u0", "u_turn", "u_final"]);
    for (i, x) in grid.centers().into_iter().enumerate() {
        table.push(vec![x, u0[i], traj.snapshots[1].u[i], traj.last().u[i]]);
    }
    r.tables.push(table);
    Ok(r)
}

/// `|q̄_ε − ½ sgn Ξ(0)|` over a decreasing list of widths must decrease
/// strictly; the symmetric value `q̄_ε(ξ = 0, t = t₀)` must vanish and
/// `∂_ξ q̄_ε` must be non-negative.
#[allow(clippy::too_many_arguments)]
pub fn q_lemma(
    flux: &FluxModel,
    path: &RoughPath,
    x: f64,
    xi: f64,
    t: f64,
    t0: f64,
    eps: &[f64],
    tol: f64,
) -> Result<Report> {
    if eps.len() < 2 || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::arg("widths must be strictly decreasing, at least two"));
    }
    let mut table = Table::new("widths", &["eps", "q_bar", "dq_dxi", "xi0", "gap", "q_bar_symmetric"]);
    let mut gaps = Vec::new();
    let mut sym_worst = 0.0f64;
    let mut min_slope = f64::INFINITY;
    for &e in eps {
        let q = q_bar(flux, path, e, x, xi, t, t0, tol)?;
        let target = 0.5 * if q.xi0 > 0.0 { 1.0 } else if q.xi0 < 0.0 { -1.0 } else { 0.0 };
        let gap = (q.value - target).abs();
        let sym = q_bar(flux, path, e, x, 0.0, t0, t0, tol)?.value;
        sym_worst = sym_worst.max(sym.abs());
        min_slope = min_slope.min(q.dxi);
        gaps.push(gap);
        table.push(vec![e, q.value, q.dxi, q.xi0, gap, sym]);
    }
    let worst_step = gaps.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let mut r = Report::new("qlemma");
    r.input("flux", flux.preset().name())
        .input("x", x)
        .input("xi", xi)
        .input("t", t)
        .input("t0", t0);
    r.check("largest_gap_step", worst_step, Relation::Lt, 0.0);
    r.check("symmetric_value", sym_worst, Relation::Le, 1e-10);
    r.check("min_dq_dxi", min_slope, Relation::Ge, 0.0);
    r.tables.push(table);
    Ok(r)
}

/// Random characteristic flows: `sgn ζ` never changes and `det J` stays
/// within `det_tol` of one along every accepted step.
#[allow(clippy::too_many_arguments)]
pub fn characteristic_invariants(
    flux: &FluxModel,
    n_flows: usize,
    seed: u64,
    x_range: (f64, f64),
    eta_range: (f64, f64),
    s_max: f64,
    tol: f64,
    det_tol: f64,
) -> Result<Report> {
    if flux.dim() != 1 {
        return Err(Error::arg("characteristic invariants are sampled in one dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<(f64, f64, f64)> = (0..n_flows)
        .map(|_| {
            (
                rng.random_range(x_range.0..=x_range.1),
                rng.random_range(eta_range.0..=eta_range.1),
                rng.random_range(-s_max..=s_max),
            )
        })
        .collect();
    let results: Vec<(usize, f64)> = starts
        .par_iter()
        .map(|&(y, eta, s)| -> Result<(usize, f64)> {
            let p = flow_forward(flux, &[y], eta, s, tol)?;
            let det = p.states.iter().map(|st| (jacobian_det(st) - 1.0).abs()).fold(0.0, f64::max);
            Ok((p.sign_changes, det))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new("flows", &["y", "eta", "s", "sign_changes", "det_error"]);
    for ((y, eta, s), (c, d)) in starts.iter().zip(&results) {
        table.push(vec![*y, *eta, *s, *c as f64, *d]);
    }
    let changes: usize = results.iter().map(|r| r.0).sum();
    let det = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut r = Report::new("characteristics");
    r.input("flux", flux.preset().name())
        .input("flows", n_flows)
        .input("seed", seed)
        .input("tol", tol);
    r.check("sign_changes", changes as f64, Relation::Le, 0.0);
    r.check("max_det_error", det, Relation::Le, det_tol);
    r.tables.push(table);
    Ok(r)
}

/// `sup_s gap(s)/(s ε)` for each width; the spread across widths must stay
/// below `max_spread`.
#[allow(clippy::too_many_arguments)]
pub fn cancellation_scaling(
    flux: &FluxModel,
    x: f64,
    xi: f64,
    eps: &[f64],
    s_max: f64,
    n_pairs: usize,
    tol: f64,
    max_spread: f64,
) -> Result<Report> {
    let gaps: Vec<_> = eps
        .par_iter()
        .map(|&e| cancellation_gap(flux, &[x], xi, e, s_max, n_pairs, tol))
        .collect::<Result<_>>()?;
    let mut table = Table::new("scaling", &["eps", "sup_ratio"]);
    for g in &gaps {
        table.push(vec![g.eps, g.sup_ratio]);
    }
    let hi = gaps.iter().map(|g| g.sup_ratio).fold(f64::NEG_INFINITY, f64::max);
    let lo = gaps.iter().map(|g| g.sup_ratio).fold(f64::INFINITY, f64::min);
    let mut r = Report::new("cancellation");
    r.input("flux", flux.preset().name())
        .input("x", x)
        .input("xi", xi)
        .input("s_max", s_max)
        .input("pairs", n_pairs);
    r.check("ratio_spread", if lo > 0.0 { hi / lo } else { f64::INFINITY }, Relation::Lt, max_spread);
    r.tables.push(table);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::StateBox;
    use crate::solver::Boundary;

    fn burgers() -> FluxModel {
        FluxModel::burgers(StateBox::new((-2.0, 2.0), (-1.0, 1.0)).unwrap())
    }

    #[test]
    fn linear_path_ladder_is_exact() {
        let g = Grid1D::new(-2.0, 2.0, 40, Boundary::Periodic).unwrap();
        let u0 = |x: f64| 0.5 * (std::f64::consts::PI * x / 2.0).sin();
        let p = RoughPath::linear(1.0, 0.5).unwrap();
        let r = stability_cauchy(
            &burgers(),
            &p,
            StabilityOptions { h0: 0.125, levels: 3, ratio_spread: 2.0, refine_grid: false },
            &u0,
            &g,
            SolverConfig::default(),
        )
        .unwrap();
        assert!(r.pass());
        assert!(r.table("ladder").unwrap().column("d").unwrap().iter().all(|&d| d < 1e-13));
    }

    #[test]
    fn ladder_needs_three_levels() {
        let g = Grid1D::new(-2.0, 2.0, 8, Boundary::Periodic).unwrap();
        let p = RoughPath::linear(1.0, 0.5).unwrap();
        let opts = StabilityOptions { h0: 0.125, levels: 2, ratio_spread: 2.0, refine_grid: true };
        assert!(stability_cauchy(&burgers(), &p, opts, &|_| 0.0, &g, SolverConfig::default()).is_err());
    }

    #[test]
    fn riemann_error_is_small() {
        let g = Grid1D::new(-2.0, 2.0, 200, Boundary::Outflow).unwrap();
        assert!(riemann_error(1.0, 0.0, &g, 1.0, SolverConfig::default()).unwrap() < 0.05);
    }

    #[test]
    fn q_lemma_rejects_unordered_widths() {
        let p = RoughPath::linear(1.0, 1.0).unwrap();
        assert!(q_lemma(&burgers(), &p, 0.0, 0.03, 0.5, 0.0, &[0.1, 0.2], 1e-9).is_err());
    }
}
