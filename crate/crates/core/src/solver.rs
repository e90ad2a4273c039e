//! Monotone finite-volume solver for `∂_t u + Ẇ ∂_x A(x, u) = 0` in one
//! space dimension, advancing one linear path segment at a time with the
//! effective flux `G(x, u) = σ A(x, u)`.
//!
//! Interface fluxes are Engquist–Osher. Two placements of the spatial
//! coefficient are available:
//!
//! * [`NumericalFlux::SplitEngquistOsher`] (default): the rising part of `G`
//!   is taken from the left cell centre and the falling part from the right
//!   cell centre, `F = G⁺(x_i; u_i) + G⁻(x_{i+1}; u_{i+1})`. Cell-sampled
//!   steady states of `∂_x A(x, k(x)) = 0` with `a` of one sign are exact
//!   fixed points.
//! * [`NumericalFlux::InterfaceEngquistOsher`]: both parts frozen at
//!   `x_{i+½}`. Steady states drift by `O(Δx)` per unit time.
//!
//! Both are conservative and monotone under `|σ| max|a| Δt ≤ cfl Δx` with
//! `cfl ≤ 1/2`, hence L¹-contractive and order preserving.

use std::io::Write;

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::path::{RoughPath, Segment};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    /// Zero-order extrapolation. The solution must not reach the boundary:
    /// boundary cells changing by more than [`BOUNDARY_TOLERANCE`] is an
    /// error.
    Outflow,
}

pub const BOUNDARY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    x_lo: f64,
    x_hi: f64,
    n_cells: usize,
    boundary: Boundary,
}

impl Grid1D {
    pub fn new(x_lo: f64, x_hi: f64, n_cells: usize, boundary: Boundary) -> Result<Self> {
        if !(x_lo.is_finite() && x_hi.is_finite() && x_hi > x_lo) || n_cells == 0 {
            return Err(Error::arg(format!(
                "grid needs x_lo < x_hi and at least one cell (got [{x_lo}, {x_hi}], {n_cells})"
            )));
        }
        Ok(Self {
            x_lo,
            x_hi,
            n_cells,
            boundary,
        })
    }

    pub fn x_lo(&self) -> f64 {
        self.x_lo
    }

    pub fn x_hi(&self) -> f64 {
        self.x_hi
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.n_cells as f64
    }

    pub fn length(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_lo + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// Position of interface `i` (between cells `i − 1` and `i`).
    pub fn interface(&self, i: usize) -> f64 {
        self.x_lo + i as f64 * self.dx()
    }

    /// Cell averages of `f`, approximated by a 4-point Gauss rule per cell.
    pub fn project(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let gl = crate::quadrature::GaussLegendre::new(4);
        let dx = self.dx();
        (0..self.n_cells)
            .map(|i| {
                let a = self.interface(i);
                gl.integrate(a, a + dx, &f) / dx
            })
            .collect()
    }

    /// Point values of `f` at the cell centres.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.centers().into_iter().map(f).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NumericalFlux {
    #[default]
    SplitEngquistOsher,
    InterfaceEngquistOsher,
}

impl NumericalFlux {
    pub fn as_str(self) -> &'static str {
        match self {
            NumericalFlux::SplitEngquistOsher => "split_eo",
            NumericalFlux::InterfaceEngquistOsher => "interface_eo",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub cfl: f64,
    pub scheme: NumericalFlux,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: 0.45,
            scheme: NumericalFlux::default(),
        }
    }
}

/// Which states a run keeps.
#[derive(Clone, Debug, PartialEq)]
pub enum Snapshots {
    /// Requested times in `[0, horizon]`; `t = 0` is always stored.
    Times(Vec<f64>),
    /// Every substep up to `horizon`; needed for defect measures and
    /// entropy residuals.
    EveryStep { horizon: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Substep {
    pub sigma: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    /// Substeps taken since the previous snapshot.
    pub substeps: Vec<Substep>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub grid: Grid1D,
    pub snapshots: Vec<Snapshot>,
    pub cfl: f64,
    pub scheme: NumericalFlux,
}

impl Trajectory {
    pub fn initial(&self) -> &Snapshot {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().unwrap()
    }

    pub fn total_substeps(&self) -> usize {
        self.snapshots.iter().map(|s| s.substeps.len()).sum()
    }

    /// Snapshot whose time is closest to `t`.
    pub fn nearest(&self, t: f64) -> &Snapshot {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .unwrap()
    }

    /// CSV rows `t,x,u` for every snapshot and cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["t", "x", "u"])?;
        let xs = self.grid.centers();
        for snap in &self.snapshots {
            for (x, u) in xs.iter().zip(&snap.u) {
                wtr.write_record([snap.t.to_string(), x.to_string(), u.to_string()])?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

pub fn l1_norm(u: &[f64], dx: f64) -> f64 {
    dx * u.iter().map(|v| v.abs()).sum::<f64>()
}

pub fn l1_distance(u: &[f64], v: &[f64], dx: f64) -> f64 {
    dx * u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn l2_norm_sq(u: &[f64], dx: f64) -> f64 {
    dx * u.iter().map(|v| v * v).sum::<f64>()
}

/// `∫_lo^hi max(α + β s, 0) ds` for `lo ≤ hi`.
#[inline]
pub(crate) fn positive_part_integral(alpha: f64, beta: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let (l, h) = if beta == 0.0 {
        if alpha > 0.0 {
            (lo, hi)
        } else {
            return 0.0;
        }
    } else {
        let root = -alpha / beta;
        if beta > 0.0 {
            (lo.max(root), hi)
        } else {
            (lo, hi.min(root))
        }
    };
    if h <= l {
        return 0.0;
    }
    (alpha * (h - l) + 0.5 * beta * (h * h - l * l)).max(0.0)
}

/// Rising part `G⁺(u) = ∫_0^u max(g, 0)` of `G(u) = σ(p1 u + p2 u²)`, where
/// `g = G'`; the falling part is `G − G⁺`.
#[inline]
pub(crate) fn eo_rising(sigma: f64, (p1, p2): (f64, f64), u: f64) -> f64 {
    let (alpha, beta) = (sigma * p1, 2.0 * sigma * p2);
    if u >= 0.0 {
        positive_part_integral(alpha, beta, 0.0, u)
    } else {
        -positive_part_integral(alpha, beta, u, 0.0)
    }
}

#[inline]
pub(crate) fn eo_falling(sigma: f64, (p1, p2): (f64, f64), u: f64) -> f64 {
    sigma * u * (p1 + p2 * u) - eo_rising(sigma, (p1, p2), u)
}

/// Flux coefficients at each interface, for the cell on either side.
#[derive(Clone, Debug)]
pub(crate) struct Stencil {
    /// `(p1, p2)` used for `G⁺` at interface `i` (`i = 0..=n`).
    pub left: Vec<(f64, f64)>,
    /// `(p1, p2)` used for `G⁻` at interface `i`.
    pub right: Vec<(f64, f64)>,
    /// Every coefficient pair the update touches, for the CFL bound.
    all: Vec<(f64, f64)>,
    periodic: bool,
}

impl Stencil {
    pub fn new(flux: &FluxModel, grid: &Grid1D, scheme: NumericalFlux) -> Self {
        let n = grid.n_cells();
        let periodic = grid.boundary() == Boundary::Periodic;
        // Cell position of ghost/real index j in -1..=n.
        let cell_x = |j: isize| -> f64 {
            if periodic {
                grid.center(j.rem_euclid(n as isize) as usize)
            } else {
                // ghost cells copy the boundary cell, coefficient included
                grid.center(j.clamp(0, n as isize - 1) as usize)
            }
        };
        let mut left = Vec::with_capacity(n + 1);
        let mut right = Vec::with_capacity(n + 1);
        for i in 0..=n {
            match scheme {
                NumericalFlux::SplitEngquistOsher => {
                    left.push(flux.quadratic_coeffs(cell_x(i as isize - 1)));
                    right.push(flux.quadratic_coeffs(cell_x(i as isize)));
                }
                NumericalFlux::InterfaceEngquistOsher => {
                    let c = flux.quadratic_coeffs(grid.interface(i));
                    left.push(c);
                    right.push(c);
                }
            }
        }
        let all = left.iter().chain(&right).copied().collect();
        Self {
            left,
            right,
            all,
            periodic,
        }
    }

    /// `max |a(x, u)|` over every stencil position and `u ∈ [lo, hi]`.
    pub fn max_speed(&self, lo: f64, hi: f64) -> f64 {
        self.all
            .iter()
            .map(|&(p1, p2)| (p1 + 2.0 * p2 * lo).abs().max((p1 + 2.0 * p2 * hi).abs()))
            .fold(0.0, f64::max)
    }

    /// Value seen across interface `i` on the left (`j = i − 1`) or right.
    #[inline]
    pub fn cell(&self, u: &[f64], j: isize) -> f64 {
        let n = u.len() as isize;
        if j < 0 {
            if self.periodic {
                u[(n - 1) as usize]
            } else {
                u[0]
            }
        } else if j >= n {
            if self.periodic {
                u[0]
            } else {
                u[(n - 1) as usize]
            }
        } else {
            u[j as usize]
        }
    }

    /// Interface flux at `i` for arbitrary left and right states.
    #[inline]
    pub fn pair_flux(&self, i: usize, ul: f64, ur: f64, sigma: f64) -> f64 {
        eo_rising(sigma, self.left[i], ul) + eo_falling(sigma, self.right[i], ur)
    }

    #[inline]
    pub fn interface_flux(&self, u: &[f64], i: usize, sigma: f64) -> f64 {
        self.pair_flux(i, self.cell(u, i as isize - 1), self.cell(u, i as isize), sigma)
    }

    pub fn advance(&self, u: &[f64], sigma: f64, dt: f64, dx: f64, out: &mut Vec<f64>) {
        let n = u.len();
        let lambda = dt / dx;
        let fluxes: Vec<f64> = (0..=n).map(|i| self.interface_flux(u, i, sigma)).collect();
        out.clear();
        out.extend((0..n).map(|i| u[i] - lambda * (fluxes[i + 1] - fluxes[i])));
    }
}

/// Inflated state range used in the CFL bound: the current range widened by
/// 10% of its largest magnitude on each side.
fn speed_range(u: &[f64]) -> (f64, f64) {
    let lo = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.1 * lo.abs().max(hi.abs());
    (lo - pad, hi + pad)
}

/// One conservative Engquist–Osher substep with slope `σ`. The caller is
/// responsible for `|σ| max|a| Δt ≤ cfl Δx`.
pub fn step(
    u: &[f64],
    flux: &FluxModel,
    sigma: f64,
    dt: f64,
    grid: &Grid1D,
    scheme: NumericalFlux,
) -> Result<Vec<f64>> {
    if u.len() != grid.n_cells() {
        return Err(Error::arg(format!(
            "{} values for a grid of {} cells",
            u.len(),
            grid.n_cells()
        )));
    }
    if sigma == 0.0 {
        return Ok(u.to_vec());
    }
    let stencil = Stencil::new(flux, grid, scheme);
    let mut out = Vec::with_capacity(u.len());
    stencil.advance(u, sigma, dt, grid.dx(), &mut out);
    Ok(out)
}

/// Integrates along every linear segment of `path`, storing the requested
/// snapshots.
pub fn solve(
    flux: &FluxModel,
    path: &RoughPath,
    u0: &[f64],
    grid: &Grid1D,
    config: SolverConfig,
    snapshots: &Snapshots,
) -> Result<Trajectory> {
    if !(config.cfl > 0.0 && config.cfl <= 0.5) {
        return Err(Error::arg(format!("cfl must lie in (0, 0.5], got {}", config.cfl)));
    }
    if u0.len() != grid.n_cells() {
        return Err(Error::arg(format!(
            "{} initial values for a grid of {} cells",
            u0.len(),
            grid.n_cells()
        )));
    }
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("initial data must be finite"));
    }
    let (mut times, every_step, horizon) = match snapshots {
        Snapshots::Times(ts) => {
            let mut ts = ts.clone();
            ts.sort_by(f64::total_cmp);
            ts.dedup();
            let horizon = ts.last().copied().unwrap_or(0.0);
            (ts, false, horizon)
        }
        Snapshots::EveryStep { horizon } => (vec![*horizon], true, *horizon),
    };
    if times.iter().any(|&t| !(t >= 0.0) || t > path.horizon() * (1.0 + 1e-12)) {
        return Err(Error::arg(format!(
            "snapshot times must lie in [0, {}]",
            path.horizon()
        )));
    }
    times.retain(|&t| t > 0.0);

    let stencil = Stencil::new(flux, grid, config.scheme);
    let dx = grid.dx();
    let snap_tol = 1e-12 * horizon.max(1.0);
    let outflow = grid.boundary() == Boundary::Outflow;
    let n = grid.n_cells();
    let (b_left, b_right) = (u0[0], u0[n - 1]);

    let mut traj = Trajectory {
        grid: *grid,
        snapshots: vec![Snapshot {
            t: 0.0,
            u: u0.to_vec(),
            substeps: Vec::new(),
        }],
        cfl: config.cfl,
        scheme: config.scheme,
    };
    let mut u = u0.to_vec();
    let mut next = Vec::with_capacity(n);
    let mut pending: Vec<Substep> = Vec::new();
    let mut t = 0.0;
    let mut next_snap = 0usize;
    let mut step_count = 0usize;

    for seg in merged_segments(path) {
        if next_snap >= times.len() {
            break;
        }
        let seg_end = seg.t1.min(horizon);
        while seg_end - t > snap_tol && next_snap < times.len() {
            let target = times[next_snap].min(seg_end);
            let room = target - t;
            let dt = if seg.slope == 0.0 {
                room
            } else {
                let (lo, hi) = speed_range(&u);
                let amax = stencil.max_speed(lo, hi) * seg.slope.abs();
                if amax > 0.0 {
                    (config.cfl * dx / amax).min(room)
                } else {
                    room
                }
            };
            let reached = room - dt <= snap_tol;
            if seg.slope != 0.0 {
                stencil.advance(&u, seg.slope, dt, dx, &mut next);
                std::mem::swap(&mut u, &mut next);
                step_count += 1;
                if let Some(i) = u.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Numerical {
                        t: t + dt,
                        step: step_count,
                        reason: format!("non-finite value in cell {i}"),
                    });
                }
                if outflow
                    && ((u[0] - b_left).abs() > BOUNDARY_TOLERANCE
                        || (u[n - 1] - b_right).abs() > BOUNDARY_TOLERANCE)
                {
                    return Err(Error::Numerical {
                        t: t + dt,
                        step: step_count,
                        reason: "solution reached an outflow boundary; widen the domain".into(),
                    });
                }
            }
            pending.push(Substep {
                sigma: seg.slope,
                dt,
            });
            t = if reached { target } else { t + dt };
            let at_snapshot = reached && target == times[next_snap];
            if every_step || at_snapshot {
                traj.snapshots.push(Snapshot {
                    t,
                    u: u.clone(),
                    substeps: std::mem::take(&mut pending),
                });
            }
            if at_snapshot {
                next_snap += 1;
            }
        }
    }
    if next_snap < times.len() {
        return Err(Error::arg(format!(
            "path ends at {} before snapshot time {}",
            path.horizon(),
            times[next_snap]
        )));
    }
    Ok(traj)
}

/// Path segments with consecutive equal slopes (to relative `1e-12`) joined,
/// so redundant knots do not change the time stepping.
fn merged_segments(path: &RoughPath) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    let (times, values) = (path.times(), path.values());
    let mut start = 0;
    for seg in path.segments() {
        if let Some(last) = out.last_mut() {
            let scale = last.slope.abs().max(seg.slope.abs());
            if (last.slope - seg.slope).abs() <= 1e-12 * scale {
                let k = times.partition_point(|&t| t < seg.t1);
                last.t1 = seg.t1;
                last.slope = (values[k] - values[start]) / (times[k] - times[start]);
                continue;
            }
        }
        start = times.partition_point(|&t| t < seg.t0);
        out.push(seg);
    }
    out
}

/// Entropy solution of the Burgers Riemann problem (`A = u²/2`).
pub fn exact_riemann_burgers(u_left: f64, u_right: f64, x: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::arg(format!("Riemann solution needs t > 0, got {t}")));
    }
    if u_left > u_right {
        let speed = 0.5 * (u_left + u_right);
        Ok(if x < speed * t { u_left } else { u_right })
    } else {
        Ok((x / t).clamp(u_left, u_right))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{Coefficient, Preset, StateBox};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn burgers() -> FluxModel {
        FluxModel::burgers(StateBox::new((-4.0, 4.0), (-2.0, 2.0)).unwrap())
    }

    fn inhom() -> FluxModel {
        FluxModel::new(
            Preset::InhomBurgers(Coefficient::HALF_SINE),
            StateBox::new((-8.0, 8.0), (-2.0, 2.0)).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn riemann_examples() {
        assert_eq!(exact_riemann_burgers(1.0, 0.0, 0.4, 1.0).unwrap(), 1.0);
        assert_eq!(exact_riemann_burgers(1.0, 0.0, 0.6, 1.0).unwrap(), 0.0);
        assert_eq!(exact_riemann_burgers(0.0, 1.0, 0.5, 1.0).unwrap(), 0.5);
        assert_eq!(exact_riemann_burgers(0.0, 1.0, -0.5, 1.0).unwrap(), 0.0);
        for x in [-3.0, 0.0, 2.0] {
            assert_eq!(exact_riemann_burgers(1.0, 1.0, x, 0.3).unwrap(), 1.0);
        }
        assert!(exact_riemann_burgers(1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn positive_part_integral_matches_quadrature() {
        let gl = crate::quadrature::GaussLegendre::new(20);
        for (a, b, lo, hi) in [(1.0, -2.0, -1.0, 2.0), (-0.5, 3.0, -2.0, 0.7), (0.3, 0.0, 0.0, 1.0)] {
            let got = positive_part_integral(a, b, lo, hi);
            let root = if b != 0.0 { (-a / b).clamp(lo, hi) } else { lo };
            let f = |s: f64| (a + b * s).max(0.0);
            let want = gl.integrate(lo, root, f) + gl.integrate(root, hi, f);
            assert!((got - want).abs() < 1e-13, "{got} vs {want}");
        }
    }

    #[test]
    fn eo_halves_sum_to_flux() {
        for (p, u) in [((0.0, 0.5), -1.3), ((1.0, -1.0), 0.3), ((0.7, 0.0), 2.0)] {
            for sigma in [-2.0, 0.5] {
                let g = sigma * u * (p.0 + p.1 * u);
                assert!((eo_rising(sigma, p, u) + eo_falling(sigma, p, u) - g).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_slope_step_is_identity() {
        let g = Grid1D::new(-1.0, 1.0, 10, Boundary::Outflow).unwrap();
        let u: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let v = step(&u, &burgers(), 0.0, 0.1, &g, NumericalFlux::default()).unwrap();
        assert_eq!(u, v);
    }

    #[test]
    fn constant_state_unchanged_for_homogeneous_flux() {
        let g = Grid1D::new(-1.0, 1.0, 16, Boundary::Periodic).unwrap();
        for scheme in [NumericalFlux::SplitEngquistOsher, NumericalFlux::InterfaceEngquistOsher] {
            let v = step(&[0.7; 16], &burgers(), 1.3, 0.01, &g, scheme).unwrap();
            assert!(v.iter().all(|&x| x == 0.7));
        }
    }

    #[test]
    fn single_step_is_l1_contractive() {
        let g = Grid1D::new(-2.0, 2.0, 64, Boundary::Periodic).unwrap();
        let f = inhom();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let u: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sigma: f64 = rng.random_range(-3.0..3.0);
            let stencil = Stencil::new(&f, &g, NumericalFlux::default());
            let amax = stencil.max_speed(-1.1, 1.1) * sigma.abs();
            let dt = 0.5 * g.dx() / amax;
            let su = step(&u, &f, sigma, dt, &g, NumericalFlux::default()).unwrap();
            let sv = step(&v, &f, sigma, dt, &g, NumericalFlux::default()).unwrap();
            let before = l1_distance(&u, &v, g.dx());
            let after = l1_distance(&su, &sv, g.dx());
            assert!(after <= before + 1e-12, "{after} > {before}");
        }
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let g = Grid1D::new(-3.0, 3.0, 50, Boundary::Outflow).unwrap();
        let path = RoughPath::sample_brownian(1.0, 65, 4).unwrap();
        let traj = solve(
            &inhom(),
            &path,
            &[0.0; 50],
            &g,
            SolverConfig::default(),
            &Snapshots::Times(vec![0.5, 1.0]),
        )
        .unwrap();
        assert_eq!(traj.snapshots.len(), 3);
        assert!(traj.snapshots.iter().all(|s| s.u.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn snapshots_align_with_requested_times_and_segments() {
        let g = Grid1D::new(-2.0, 2.0, 40, Boundary::Periodic).unwrap();
        let path = RoughPath::new(
            vec![0.0, 0.3, 0.6, 1.0],
            vec![0.0, 0.3, 0.3, -0.1],
            crate::path::PathKind::User,
        )
        .unwrap();
        let u0 = g.sample(|x| 0.5 * (-x * x).exp());
        let traj = solve(
            &burgers(),
            &path,
            &u0,
            &g,
            SolverConfig::default(),
            &Snapshots::Times(vec![0.25, 0.45, 1.0]),
        )
        .unwrap();
        let ts: Vec<f64> = traj.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(ts, vec![0.0, 0.25, 0.45, 1.0]);
        // the flat segment [0.3, 0.6] is a single σ = 0 substep
        assert!(traj.snapshots.iter().flat_map(|s| &s.substeps).any(|s| s.sigma == 0.0));
        let total: f64 = traj.snapshots.iter().flat_map(|s| &s.substeps).map(|s| s.dt).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let m0: f64 = u0.iter().sum();
        let m1: f64 = traj.last().u.iter().sum();
        assert!((m0 - m1).abs() * g.dx() < 1e-12);
    }

    #[test]
    fn solve_rejects_bad_input() {
        let g = Grid1D::new(-2.0, 2.0, 8, Boundary::Periodic).unwrap();
        let p = RoughPath::linear(1.0, 1.0).unwrap();
        let f = burgers();
        let snaps = Snapshots::Times(vec![1.0]);
        let cfg = |cfl| SolverConfig {
            cfl,
            scheme: NumericalFlux::default(),
        };
        assert!(solve(&f, &p, &[0.0; 8], &g, cfg(0.6), &snaps).is_err());
        assert!(solve(&f, &p, &[0.0; 7], &g, cfg(0.4), &snaps).is_err());
        assert!(solve(&f, &p, &[0.0; 8], &g, cfg(0.4), &Snapshots::Times(vec![2.0])).is_err());
        let mut u = [0.0; 8];
        u[3] = f64::NAN;
        assert!(solve(&f, &p, &u, &g, cfg(0.4), &snaps).is_err());
    }

    #[test]
    fn outflow_boundary_contact_is_an_error() {
        let g = Grid1D::new(-1.0, 1.0, 40, Boundary::Outflow).unwrap();
        let p = RoughPath::linear(1.0, 2.0).unwrap();
        let u0 = g.sample(|x| if x.abs() < 0.3 { 1.0 } else { 0.0 });
        let err = solve(
            &burgers(),
            &p,
            &u0,
            &g,
            SolverConfig::default(),
            &Snapshots::Times(vec![2.0]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }));
    }

    #[test]
    fn split_flux_keeps_steady_states_fixed() {
        let g = Grid1D::new(-3.0, 3.0, 60, Boundary::Outflow).unwrap();
        let f = inhom();
        let k = g.sample(|x| f.steady_states(x, 0.9).unwrap().1);
        let v = step(&k, &f, 1.0, 0.01, &g, NumericalFlux::SplitEngquistOsher).unwrap();
        for (a, b) in k.iter().zip(&v) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }
}
