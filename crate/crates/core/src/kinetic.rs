//! Kinetic function `χ`, mollifiers, convolution along characteristics,
//! the `q̄_ε` family and the defect measure of discrete solutions.

use std::io::Write;

use rayon::prelude::*;

use crate::characteristics::{flow_backward, flow_to};
use crate::error::{Error, Result};
use crate::flux::{Flux, FluxModel};
use crate::path::RoughPath;
use crate::quadrature::GaussLegendre;
use crate::solver::{positive_part_integral, Stencil, Trajectory};

/// `+1` for `0 ≤ ξ ≤ u`, `−1` for `u ≤ ξ ≤ 0`, `0` otherwise (and at `u = 0`).
pub fn chi(u: f64, xi: f64) -> i8 {
    if u > 0.0 && 0.0 <= xi && xi <= u {
        1
    } else if u < 0.0 && u <= xi && xi <= 0.0 {
        -1
    } else {
        0
    }
}

/// Grid-node version of `χ` with half-open intervals, so that
/// `Δξ Σ_j χ(u, jΔξ)` is within `Δξ` of `u`.
#[inline]
fn chi_node(u: f64, xi: f64) -> i8 {
    if 0.0 < xi && xi <= u {
        1
    } else if u <= xi && xi < 0.0 {
        -1
    } else {
        0
    }
}

/// Velocity nodes `ξ_j = j Δξ` for `j_min ≤ j ≤ j_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XiGrid {
    dxi: f64,
    j_min: i64,
    j_max: i64,
}

impl XiGrid {
    pub fn new(dxi: f64, j_min: i64, j_max: i64) -> Result<Self> {
        if !(dxi > 0.0 && dxi.is_finite()) || j_max < j_min {
            return Err(Error::arg(format!(
                "velocity grid needs dxi > 0 and j_min <= j_max (got {dxi}, {j_min}, {j_max})"
            )));
        }
        Ok(Self { dxi, j_min, j_max })
    }

    /// Symmetric grid reaching at least `bound + margin` on both sides.
    pub fn covering(bound: f64, margin: f64, dxi: f64) -> Result<Self> {
        if !(bound >= 0.0 && margin >= 0.0) {
            return Err(Error::arg("velocity bound and margin must be non-negative"));
        }
        if !(dxi > 0.0) {
            return Err(Error::arg(format!("dxi must be positive, got {dxi}")));
        }
        let j = ((bound + margin) / dxi * (1.0 - 1e-12)).ceil() as i64;
        Self::new(dxi, -j, j)
    }

    pub fn dxi(&self) -> f64 {
        self.dxi
    }

    pub fn len(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, k: usize) -> f64 {
        (self.j_min + k as i64) as f64 * self.dxi
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }

    pub fn min(&self) -> f64 {
        self.j_min as f64 * self.dxi
    }

    pub fn max(&self) -> f64 {
        self.j_max as f64 * self.dxi
    }

    /// Index range of nodes inside `[lo, hi]`, clipped to the grid.
    fn span(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = ((lo / self.dxi).ceil() as i64).max(self.j_min);
        let b = ((hi / self.dxi).floor() as i64).min(self.j_max);
        if b < a {
            0..0
        } else {
            (a - self.j_min) as usize..(b - self.j_min + 1) as usize
        }
    }
}

/// `χ(u(x_i), ξ_j)` on the product of cell centres and velocity nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct KineticField {
    pub xs: Vec<f64>,
    pub dx: f64,
    pub xi: XiGrid,
    /// Column-major by cell: entry `i * xi.len() + j`.
    pub values: Vec<i8>,
}

impl KineticField {
    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.values[i * self.xi.len() + j]
    }

    /// `Δξ Σ_j χ(x_i, ξ_j)` per cell.
    pub fn recover(&self) -> Vec<f64> {
        let m = self.xi.len();
        self.values
            .chunks(m)
            .map(|col| self.xi.dxi() * col.iter().map(|&v| v as f64).sum::<f64>())
            .collect()
    }
}

/// Builds `χ` for cell values `u`; the velocity grid must reach `‖u‖∞`.
pub fn chi_field(u: &[f64], xs: &[f64], dx: f64, xi: XiGrid) -> Result<KineticField> {
    if u.len() != xs.len() {
        return Err(Error::arg(format!(
            "{} values for {} cell centres",
            u.len(),
            xs.len()
        )));
    }
    let lo = u.iter().cloned().fold(0.0, f64::min);
    let hi = u.iter().cloned().fold(0.0, f64::max);
    if lo < xi.min() {
        return Err(Error::OutOfRange {
            value: lo,
            lo: xi.min(),
            hi: xi.max(),
        });
    }
    if hi > xi.max() {
        return Err(Error::OutOfRange {
            value: hi,
            lo: xi.min(),
            hi: xi.max(),
        });
    }
    let nodes = xi.nodes();
    let mut values = Vec::with_capacity(u.len() * nodes.len());
    for &ui in u {
        values.extend(nodes.iter().map(|&x| chi_node(ui, x)));
    }
    Ok(KineticField {
        xs: xs.to_vec(),
        dx,
        xi,
        values,
    })
}

/// `(1 − 4r²)³` on `r < 1/2`: even, C², support of diameter one.
#[inline]
fn bump(r2: f64) -> f64 {
    let q = 1.0 - 4.0 * r2;
    if q > 0.0 {
        q * q * q
    } else {
        0.0
    }
}

/// Antiderivative of the 1D bump from 0, for `|y| ≤ 1/2`.
#[inline]
fn bump_antiderivative(y: f64) -> f64 {
    let y2 = y * y;
    y * (1.0 - y2 * (4.0 - y2 * (48.0 / 5.0 - y2 * 64.0 / 7.0)))
}

/// Surface area of the unit sphere in `R^n`.
fn sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI * sphere_area(n - 2) / (n - 2) as f64,
    }
}

/// Product kernel `ρ_ε^s(x) ρ_ε^v(ξ)` built from the bump, each factor
/// scaled to unit mass.
#[derive(Clone, Debug, PartialEq)]
pub struct Mollifier {
    eps: f64,
    dim: usize,
    /// Normalising constants of the unscaled spatial and velocity kernels.
    spatial_norm: f64,
    velocity_norm: f64,
}

impl Mollifier {
    pub fn new(eps: f64, dim: usize) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::arg(format!("mollifier width must be positive, got {eps}")));
        }
        if dim == 0 {
            return Err(Error::arg("mollifier dimension must be at least 1"));
        }
        let gl = GaussLegendre::new(16);
        let radial = gl.integrate(0.0, 0.5, |r| r.powi(dim as i32 - 1) * bump(r * r));
        let spatial_norm = 1.0 / (sphere_area(dim) * radial);
        let velocity_norm = 1.0 / gl.integrate(-0.5, 0.5, |x| bump(x * x));
        Ok(Self {
            eps,
            dim,
            spatial_norm,
            velocity_norm,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Peak of the unscaled unit-mass velocity kernel.
    pub fn base_peak(&self) -> f64 {
        self.velocity_norm
    }

    pub fn spatial(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum::<f64>() / (self.eps * self.eps);
        self.spatial_norm * bump(r2) / self.eps.powi(self.dim as i32)
    }

    pub fn velocity(&self, xi: f64) -> f64 {
        let y = xi / self.eps;
        self.velocity_norm * bump(y * y) / self.eps
    }

    /// `∫_{−∞}^ξ ρ_ε^v`.
    pub fn velocity_cdf(&self, xi: f64) -> f64 {
        let y = (xi / self.eps).clamp(-0.5, 0.5);
        0.5 + self.velocity_norm * bump_antiderivative(y)
    }

    pub fn kernel(&self, x: &[f64], xi: f64) -> f64 {
        self.spatial(x) * self.velocity(xi)
    }

    /// Density of the sum of two independent velocity-kernel variables.
    pub fn velocity_self_convolution(&self, z: f64) -> f64 {
        self.pair_integral(z, |w| self.velocity(w))
    }

    /// `∫ ρ_ε^v(η) ρ_ε^v(z + η) dη` style integrals `∫ ρ_ε^v(η) g(z + η) dη`,
    /// split at the kinks of the integrand so Gauss–Legendre is exact for
    /// the piecewise polynomial pieces.
    fn pair_integral(&self, z: f64, g: impl Fn(f64) -> f64) -> f64 {
        let h = 0.5 * self.eps;
        let mut cuts = vec![-h, h, -h - z, h - z];
        cuts.retain(|c| *c >= -h && *c <= h);
        cuts.sort_by(f64::total_cmp);
        let gl = GaussLegendre::new(12);
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| gl.integrate(w[0], w[1], |eta| self.velocity(eta) * g(z + eta)))
            .sum()
    }

    /// `P(S ≤ z)` for `S` the sum of two independent velocity-kernel
    /// variables.
    pub fn velocity_pair_cdf(&self, z: f64) -> f64 {
        if z <= -self.eps {
            0.0
        } else if z >= self.eps {
            1.0
        } else {
            self.pair_integral(z, |w| self.velocity_cdf(w))
        }
    }
}

/// Unit-width mollifier in one space dimension.
pub fn make_mollifier(eps: f64) -> Result<Mollifier> {
    Mollifier::new(eps, 1)
}

/// Samples per side of the kernel support when bounding its image.
const SUPPORT_SAMPLES: usize = 16;

/// `ρ⋆χ` at `(y, η)`: midpoint quadrature over the field's grid of
/// `ρ_ε(X(0) − y, Ξ(0) − η) χ(x, ξ)`, where `(X(0), Ξ(0))` is the backward
/// characteristic from `(x, ξ)` over `s = W(t) − W(t₀)`.
#[allow(clippy::too_many_arguments)]
pub fn convolve_along_char<F: Flux + ?Sized>(
    flux: &F,
    path: &RoughPath,
    moll: &Mollifier,
    field: &KineticField,
    y: f64,
    eta: f64,
    t: f64,
    t0: f64,
    tol: f64,
) -> Result<f64> {
    if flux.dim() != 1 || moll.dim() != 1 {
        return Err(Error::arg("convolution along characteristics is one-dimensional"));
    }
    let s = path.eval(t)? - path.eval(t0)?;
    let h = 0.5 * moll.eps();

    // Bounding box of the forward image of the kernel support.
    let (mut x_lo, mut x_hi, mut v_lo, mut v_hi) = (y - h, y + h, eta - h, eta + h);
    if s != 0.0 {
        (x_lo, x_hi, v_lo, v_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        let n = SUPPORT_SAMPLES;
        for k in 0..4 * n {
            let u = (k % n) as f64 / n as f64;
            let (py, pe) = match k / n {
                0 => (y - h + 2.0 * h * u, eta - h),
                1 => (y + h, eta - h + 2.0 * h * u),
                2 => (y + h - 2.0 * h * u, eta + h),
                _ => (y - h, eta + h - 2.0 * h * u),
            };
            let st = flow_to(flux, &[py], pe, &[s], tol)?.pop().unwrap();
            x_lo = x_lo.min(st.pos[0]);
            x_hi = x_hi.max(st.pos[0]);
            v_lo = v_lo.min(st.vel);
            v_hi = v_hi.max(st.vel);
        }
    }
    let (gx_lo, gx_hi) = match (field.xs.first(), field.xs.last()) {
        (Some(a), Some(b)) => (a - 0.5 * field.dx, b + 0.5 * field.dx),
        _ => return Err(Error::arg("empty kinetic field")),
    };
    if x_lo < gx_lo || x_hi > gx_hi || v_lo < field.xi.min() || v_hi > field.xi.max() {
        return Err(Error::Coverage(format!(
            "transported support [{x_lo}, {x_hi}] x [{v_lo}, {v_hi}] leaves grid [{gx_lo}, {gx_hi}] x [{}, {}]",
            field.xi.min(),
            field.xi.max()
        )));
    }
    let pad_x = 0.25 * (x_hi - x_lo) + 2.0 * field.dx;
    let pad_v = 0.25 * (v_hi - v_lo) + 2.0 * field.xi.dxi();
    let js = field.xi.span(v_lo - pad_v, v_hi + pad_v);
    let mut total = 0.0;
    for (i, &x) in field.xs.iter().enumerate() {
        if x < x_lo - pad_x || x > x_hi + pad_x {
            continue;
        }
        for j in js.clone() {
            let c = field.get(i, j);
            if c == 0 {
                continue;
            }
            let xi = field.xi.node(j);
            let (fx, fv) = if s == 0.0 {
                (x, xi)
            } else {
                let foot = flow_backward(flux, s, &[x], xi, tol)?;
                (foot.pos[0], foot.vel)
            };
            total += c as f64 * moll.kernel(&[fx - y], fv - eta);
        }
    }
    Ok(total * field.dx * field.xi.dxi())
}

/// `q̄_ε` and `∂_ξ q̄_ε` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QBar {
    pub value: f64,
    pub dxi: f64,
    /// Foot `Ξ(0)` of the backward characteristic.
    pub xi0: f64,
    /// `∂_ξ Ξ(0)`.
    pub dxi0_dxi: f64,
}

/// `q̄_ε(x, ξ, t; t₀) = −½ + P(S < Ξ(0))` with `S` the sum of two
/// velocity-kernel variables, and `∂_ξ q̄_ε = f_S(Ξ(0)) ∂_ξ Ξ(0)`.
#[allow(clippy::too_many_arguments)]
pub fn q_bar<F: Flux + ?Sized>(
    flux: &F,
    path: &RoughPath,
    eps: f64,
    x: f64,
    xi: f64,
    t: f64,
    t0: f64,
    tol: f64,
) -> Result<QBar> {
    let moll = make_mollifier(eps)?;
    let s = path.eval(t)? - path.eval(t0)?;
    let foot = flow_backward(flux, s, &[x], xi, tol)?;
    let (xi0, dxi0) = (foot.vel, foot.dvel_dvel());
    Ok(QBar {
        value: -0.5 + moll.velocity_pair_cdf(xi0),
        dxi: moll.velocity_self_convolution(xi0) * dxi0,
        xi0,
        dxi0_dxi: dxi0,
    })
}

/// Defect measure of a trajectory, aggregated over time slabs.
#[derive(Clone, Debug, PartialEq)]
pub struct DefectMeasure {
    pub xs: Vec<f64>,
    pub dx: f64,
    pub xi: XiGrid,
    pub slabs: Vec<DefectSlab>,
    /// `max |m(x, ξ_max)|` over slabs and cells; zero up to rounding when
    /// the scheme conserves mass.
    pub leakage: f64,
}

/// Time-averaged density `m(x_i, ξ_j)` over `[t0, t1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DefectSlab {
    pub t0: f64,
    pub t1: f64,
    /// Entry `i * xi.len() + j`.
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DefectOptions {
    pub dxi: f64,
    /// Velocity nodes reach `‖u‖∞ + margin`.
    pub margin: f64,
    pub steps_per_slab: usize,
}

impl Default for DefectOptions {
    fn default() -> Self {
        Self {
            dxi: 0.01,
            margin: 0.1,
            steps_per_slab: 1,
        }
    }
}

impl DefectMeasure {
    /// `∫∫∫ m dx dξ dt`.
    pub fn total_mass(&self) -> f64 {
        let cell = self.dx * self.xi.dxi();
        self.slabs
            .iter()
            .map(|s| (s.t1 - s.t0) * cell * s.values.iter().sum::<f64>())
            .sum()
    }

    /// Mass of the negative part, `Σ (t1 − t0) Δx Δξ max(−m, 0)`.
    pub fn negative_mass(&self) -> f64 {
        let cell = self.dx * self.xi.dxi();
        self.slabs
            .iter()
            .map(|s| (s.t1 - s.t0) * cell * s.values.iter().map(|v| (-v).max(0.0)).sum::<f64>())
            .sum()
    }

    pub fn min_value(&self) -> f64 {
        self.slabs
            .iter()
            .flat_map(|s| s.values.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `|ξ_j|` carrying a value above `tol`.
    pub fn support_bound(&self, tol: f64) -> f64 {
        let m = self.xi.len();
        let mut bound: f64 = 0.0;
        for slab in &self.slabs {
            for (k, v) in slab.values.iter().enumerate() {
                if *v > tol {
                    bound = bound.max(self.xi.node(k % m).abs());
                }
            }
        }
        bound
    }

    /// `∫ m dx` per velocity node for one slab.
    pub fn xi_profile(&self, slab: usize) -> Vec<f64> {
        let m = self.xi.len();
        let mut out = vec![0.0; m];
        for col in self.slabs[slab].values.chunks(m) {
            for (o, v) in out.iter_mut().zip(col) {
                *o += self.dx * v;
            }
        }
        out
    }

    /// Time average of [`Self::xi_profile`] over all slabs.
    pub fn mean_xi_profile(&self) -> Vec<f64> {
        let m = self.xi.len();
        let mut out = vec![0.0; m];
        let mut span = 0.0;
        for (k, slab) in self.slabs.iter().enumerate() {
            let w = slab.t1 - slab.t0;
            span += w;
            for (o, v) in out.iter_mut().zip(self.xi_profile(k)) {
                *o += w * v;
            }
        }
        if span > 0.0 {
            out.iter_mut().for_each(|o| *o /= span);
        }
        out
    }

    /// CSV rows `t_slab,x,xi,m` with `t_slab` the slab start.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["t_slab", "x", "xi", "m"])?;
        let nodes = self.xi.nodes();
        for slab in &self.slabs {
            for (i, x) in self.xs.iter().enumerate() {
                for (j, xi) in nodes.iter().enumerate() {
                    let v = slab.values[i * nodes.len() + j];
                    wtr.write_record([
                        slab.t0.to_string(),
                        x.to_string(),
                        xi.to_string(),
                        v.to_string(),
                    ])?;
                }
            }
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Interval carrying `χ(u, ·)` below `ξ`, with its sign: `∫_{−∞}^ξ f χ(u, ·)
/// = sign ∫_lo^hi f`.
#[inline]
fn chi_span(u: f64, xi: f64) -> Option<(f64, f64, f64)> {
    if u >= 0.0 {
        (xi > 0.0 && u > 0.0).then(|| (0.0, xi.min(u), 1.0))
    } else {
        (xi > u).then(|| (u, xi.min(0.0), -1.0))
    }
}

/// `∫_{−∞}^ξ χ(u, ·)`.
#[inline]
fn chi_primitive(u: f64, xi: f64) -> f64 {
    chi_span(u, xi).map_or(0.0, |(lo, hi, sg)| sg * (hi - lo))
}

/// `∫_{−∞}^ξ g^± χ(u, ·)` for `g(s) = σ(p1 + 2 p2 s)`; `rising` selects the
/// positive part.
#[inline]
fn kinetic_flux(sigma: f64, (p1, p2): (f64, f64), u: f64, xi: f64, rising: bool) -> f64 {
    let Some((lo, hi, sg)) = chi_span(u, xi) else {
        return 0.0;
    };
    let (alpha, beta) = (sigma * p1, 2.0 * sigma * p2);
    let pos = positive_part_integral(alpha, beta, lo, hi);
    if rising {
        sg * pos
    } else {
        let full = sigma * (p1 * (hi - lo) + p2 * (hi * hi - lo * lo));
        sg * (full - pos)
    }
}

/// `χ(u(s), ξ)` averaged over `u(s)` moving linearly from `u0` to `u1`.
#[inline]
fn chi_between(u0: f64, u1: f64, xi: f64) -> f64 {
    if u0 == u1 || xi == 0.0 {
        return chi_node(u0, xi) as f64;
    }
    // fraction of the segment on the far side of ξ from zero
    let beyond = |a: f64, b: f64| -> f64 {
        let (a, b) = if xi > 0.0 { (a - xi, b - xi) } else { (xi - a, xi - b) };
        match (a >= 0.0, b >= 0.0) {
            (true, true) => 1.0,
            (false, false) => 0.0,
            (true, false) => a / (a - b),
            (false, true) => b / (b - a),
        }
    };
    xi.signum() * beyond(u0, u1)
}

/// Upper limit on stored slab values (about 1.6 GB).
const MAX_DEFECT_ENTRIES: f64 = 2e8;

/// Dissipation of the scheme resolved in `ξ`: for each step the
/// `ξ`-antiderivative of the discrete kinetic equation,
///
/// ```text
/// m_i(ξ) = ΔH_i(ξ)/Δt + (Φ_{i+½}(ξ) − Φ_{i−½}(ξ))/Δx − D_i(ξ) χ̄_i(ξ),
/// ```
///
/// with `H = ∫_{−∞}^ξ χ` and the kinetic interface fluxes `Φ` integrated
/// exactly in `ξ`. The velocity source `σ b χ` is taken in the form the
/// scheme sees it, `D_i(ξ) = (F_{i+½}(ξ, ξ) − F_{i−½}(ξ, ξ))/Δx`, weighted by
/// `χ̄`, the average of `χ` while the cell value moves from `uⁿ` to
/// `uⁿ⁺¹`. For fluxes without `x`-dependence `D ≡ 0` and `m ≥ 0` holds
/// exactly (the Engquist–Osher flux is the kinetic upwind flux). The
/// trajectory must store every step.
pub fn defect_measure(
    traj: &Trajectory,
    flux: &FluxModel,
    opts: DefectOptions,
) -> Result<DefectMeasure> {
    if opts.steps_per_slab == 0 {
        return Err(Error::arg("steps_per_slab must be at least 1"));
    }
    if traj.snapshots.iter().skip(1).any(|s| s.substeps.len() != 1) {
        return Err(Error::arg(
            "defect measure needs a trajectory recorded at every step",
        ));
    }
    let n = traj.grid.n_cells();
    if traj.snapshots.iter().any(|s| s.u.len() != n) {
        return Err(Error::arg("snapshot length does not match the grid"));
    }
    let bound = traj
        .snapshots
        .iter()
        .flat_map(|s| s.u.iter())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let xi = XiGrid::covering(bound, opts.margin, opts.dxi)?;
    let nodes = xi.nodes();
    let m = nodes.len();
    let n_slabs = (traj.snapshots.len() - 1).div_ceil(opts.steps_per_slab);
    if (n_slabs as f64) * (n as f64) * (m as f64) > MAX_DEFECT_ENTRIES {
        return Err(Error::arg(format!(
            "defect measure would hold {n_slabs} slabs of {n} x {m} values; raise steps_per_slab or dxi"
        )));
    }
    let xs = traj.grid.centers();
    let dx = traj.grid.dx();
    let stencil = Stencil::new(flux, &traj.grid, traj.scheme);

    let steps: Vec<usize> = (1..traj.snapshots.len()).collect();
    let slabs: Vec<DefectSlab> = steps
        .par_chunks(opts.steps_per_slab)
        .map(|chunk| {
            let mut acc = vec![0.0; n * m];
            let mut span = 0.0;
            let mut phi = vec![0.0; (n + 1) * m];
            for &k in chunk {
                let (before, after) = (&traj.snapshots[k - 1].u, &traj.snapshots[k].u);
                let sub = traj.snapshots[k].substeps[0];
                span += sub.dt;
                if sub.sigma != 0.0 {
                    for f in 0..=n {
                        let ul = stencil.cell(before, f as isize - 1);
                        let ur = stencil.cell(before, f as isize);
                        for (j, &v) in nodes.iter().enumerate() {
                            phi[f * m + j] = kinetic_flux(sub.sigma, stencil.left[f], ul, v, true)
                                + kinetic_flux(sub.sigma, stencil.right[f], ur, v, false);
                        }
                    }
                }
                for i in 0..n {
                    let (u0, u1) = (before[i], after[i]);
                    for (j, &v) in nodes.iter().enumerate() {
                        let mut r = chi_primitive(u1, v) - chi_primitive(u0, v);
                        if sub.sigma != 0.0 {
                            let div = phi[(i + 1) * m + j] - phi[i * m + j];
                            let src = (stencil.pair_flux(i + 1, v, v, sub.sigma) - stencil.pair_flux(i, v, v, sub.sigma))
                                * chi_between(u0, u1, v);
                            r += sub.dt * (div - src) / dx;
                        }
                        acc[i * m + j] += r;
                    }
                }
            }
            let t0 = traj.snapshots[chunk[0] - 1].t;
            let t1 = traj.snapshots[*chunk.last().unwrap()].t;
            if span > 0.0 {
                acc.iter_mut().for_each(|a| *a /= span);
            }
            DefectSlab { t0, t1, values: acc }
        })
        .collect();
    let leakage = slabs
        .iter()
        .flat_map(|s| s.values.chunks(m).map(|c| c[m - 1].abs()))
        .fold(0.0, f64::max);
    Ok(DefectMeasure {
        xs,
        dx,
        xi,
        slabs,
        leakage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::DEFAULT_TOL;
    use crate::flux::StateBox;
    use crate::solver::{solve, Boundary, Grid1D, Snapshots, SolverConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chi_examples() {
        assert_eq!(chi(2.0, 1.0), 1);
        assert_eq!(chi(-1.0, -0.5), -1);
        assert_eq!(chi(0.5, 0.9), 0);
        assert_eq!(chi(0.5, -0.1), 0);
        assert_eq!(chi(0.0, 0.0), 0);
    }

    #[test]
    fn chi_field_examples() {
        let xs = [0.0, 1.0, 2.0];
        let g = XiGrid::covering(1.0, 0.5, 0.1).unwrap();
        let f = chi_field(&[1.0; 3], &xs, 1.0, g).unwrap();
        for i in 0..3 {
            let ones = (0..g.len()).filter(|&j| f.get(i, j) == 1).count();
            assert_eq!(ones, 10);
        }
        assert!(f.recover().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let z = chi_field(&[0.0; 3], &xs, 1.0, g).unwrap();
        assert!(z.values.iter().all(|&v| v == 0));
        assert!(chi_field(&[2.0, 0.0, 0.0], &xs, 1.0, g).is_err());
    }

    #[test]
    fn chi_field_recovers_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u: Vec<f64> = (0..200).map(|_| rng.random_range(-1.5..1.5)).collect();
        let xs: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let g = XiGrid::covering(1.5, 0.0, 0.013).unwrap();
        let f = chi_field(&u, &xs, 1.0, g).unwrap();
        for (a, b) in f.recover().iter().zip(&u) {
            assert!((a - b).abs() <= 0.013 + 1e-12);
        }
    }

    #[test]
    fn kernel_mass_and_support() {
        for eps in [1.0, 0.1, 0.01] {
            let m = make_mollifier(eps).unwrap();
            let gl = GaussLegendre::new(16);
            let mass = gl.integrate(-eps / 2.0, eps / 2.0, |x| m.velocity(x));
            assert!((mass - 1.0).abs() < 1e-10);
            assert_eq!(m.spatial(&[0.51 * eps]), 0.0);
            assert_eq!(m.velocity(-0.51 * eps), 0.0);
            assert!((m.velocity_cdf(eps) - 1.0).abs() < 1e-14);
            assert!((m.velocity_cdf(0.0) - 0.5).abs() < 1e-14);
        }
        // closed form: ∫(1 − 4x²)³ over |x| < 1/2 is 16/35
        let m = make_mollifier(1.0).unwrap();
        assert!((m.base_peak() - 35.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn spatial_kernel_has_unit_mass_in_two_dimensions() {
        let m = Mollifier::new(0.3, 2).unwrap();
        let gl = GaussLegendre::new(24);
        let mass = gl.integrate(-0.15, 0.15, |x| gl.integrate(-0.15, 0.15, |y| m.spatial(&[x, y])));
        // the kernel is only C² across the circle, so tensor quadrature is approximate
        assert!((mass - 1.0).abs() < 1e-3, "{mass}");
        let radial = 2.0 * std::f64::consts::PI * gl.integrate(0.0, 0.15, |r| r * m.spatial(&[r, 0.0]));
        assert!((radial - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mollification_error_is_second_order() {
        let f = |x: f64| x.cos() + x * x * x;
        let gl = GaussLegendre::new(16);
        let err = |eps: f64| {
            let m = make_mollifier(eps).unwrap();
            (gl.integrate(-eps / 2.0, eps / 2.0, |x| f(x) * m.velocity(x)) - f(0.0)).abs()
        };
        let ratio = err(0.2) / err(0.1);
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn pair_distribution_is_symmetric_with_unit_mass() {
        let m = make_mollifier(0.2).unwrap();
        assert!((m.velocity_pair_cdf(0.0) - 0.5).abs() < 1e-14);
        for z in [0.03, 0.11, 0.19] {
            assert!((m.velocity_pair_cdf(z) + m.velocity_pair_cdf(-z) - 1.0).abs() < 1e-13);
        }
        let gl = GaussLegendre::new(16);
        let mass = gl.integrate_composite(-0.2, 0.2, 8, |z| m.velocity_self_convolution(z));
        assert!((mass - 1.0).abs() < 1e-10);
        // derivative of the CDF is the density
        let (z, h) = (0.07, 1e-5);
        let fd = (m.velocity_pair_cdf(z + h) - m.velocity_pair_cdf(z - h)) / (2.0 * h);
        assert!((fd - m.velocity_self_convolution(z)).abs() < 1e-6);
    }

    fn burgers() -> FluxModel {
        FluxModel::burgers(StateBox::new((-4.0, 4.0), (-2.0, 2.0)).unwrap())
    }

    #[test]
    fn q_bar_at_the_initial_time() {
        let p = RoughPath::linear(1.0, 1.0).unwrap();
        let f = burgers();
        let q = q_bar(&f, &p, 0.1, 0.3, 0.0, 0.5, 0.5, DEFAULT_TOL).unwrap();
        assert!(q.value.abs() < 1e-12);
        assert_eq!(q_bar(&f, &p, 0.1, 0.3, 0.1, 0.5, 0.5, DEFAULT_TOL).unwrap().value, 0.5);
        assert_eq!(q_bar(&f, &p, 0.1, 0.3, -0.2, 0.5, 0.5, DEFAULT_TOL).unwrap().value, -0.5);
    }

    #[test]
    fn q_bar_derivative_matches_finite_difference() {
        let p = RoughPath::linear(1.0, 1.0).unwrap();
        let f = burgers();
        let q = |xi: f64| q_bar(&f, &p, 0.2, 0.1, xi, 0.6, 0.1, 1e-11).unwrap();
        let h = 1e-5;
        let fd = (q(0.05 + h).value - q(0.05 - h).value) / (2.0 * h);
        assert!((fd - q(0.05).dxi).abs() < 1e-6);
        assert!(q(0.05).dxi >= 0.0);
    }

    #[test]
    fn convolution_examples() {
        let p = RoughPath::linear(1.0, 1.0).unwrap();
        let f = burgers();
        let g = Grid1D::new(-1.0, 1.0, 200, Boundary::Periodic).unwrap();
        let xi = XiGrid::covering(1.0, 0.5, 0.01).unwrap();
        let ones = chi_field(&[1.0; 200], &g.centers(), g.dx(), xi).unwrap();
        let m = make_mollifier(0.2).unwrap();
        let v = convolve_along_char(&f, &p, &m, &ones, 0.0, 0.5, 0.3, 0.3, DEFAULT_TOL).unwrap();
        assert!((v - 1.0).abs() < 1e-3, "{v}");
        let zeros = chi_field(&[0.0; 200], &g.centers(), g.dx(), xi).unwrap();
        let z = convolve_along_char(&f, &p, &m, &zeros, 0.1, 0.2, 0.8, 0.1, DEFAULT_TOL).unwrap();
        assert_eq!(z, 0.0);
        let far = convolve_along_char(&f, &p, &m, &ones, 0.95, 0.5, 0.3, 0.3, DEFAULT_TOL);
        assert!(matches!(far, Err(Error::Coverage(_))));
    }

    #[test]
    fn defect_measure_vanishes_for_zero_state() {
        let g = Grid1D::new(-1.0, 1.0, 20, Boundary::Outflow).unwrap();
        let p = RoughPath::sample_brownian(0.5, 17, 2).unwrap();
        let f = burgers();
        let traj = solve(&f, &p, &[0.0; 20], &g, SolverConfig::default(), &Snapshots::EveryStep { horizon: 0.5 })
            .unwrap();
        let d = defect_measure(&traj, &f, DefectOptions::default()).unwrap();
        assert!(d.slabs.iter().all(|s| s.values.iter().all(|&v| v == 0.0)));
        assert_eq!(d.total_mass(), 0.0);
    }

    #[test]
    fn defect_measure_needs_every_step() {
        let g = Grid1D::new(-2.0, 2.0, 40, Boundary::Periodic).unwrap();
        let p = RoughPath::linear(1.0, 1.0).unwrap();
        let f = burgers();
        let u0 = g.sample(|x| 0.5 * (-4.0 * x * x).exp());
        let traj = solve(&f, &p, &u0, &g, SolverConfig::default(), &Snapshots::Times(vec![1.0])).unwrap();
        assert!(defect_measure(&traj, &f, DefectOptions::default()).is_err());
    }

    #[test]
    fn steady_state_of_inhomogeneous_flux_has_no_negative_defect() {
        use crate::flux::{Coefficient, Preset};
        let f = FluxModel::new(
            Preset::InhomBurgers(Coefficient::HALF_SINE),
            StateBox::new((0.0, 7.0), (-2.0, 2.0)).unwrap(),
        )
        .unwrap();
        let g = Grid1D::new(0.0, 2.0 * std::f64::consts::PI, 64, Boundary::Periodic).unwrap();
        let u0: Vec<f64> = g.centers().iter().map(|x| 0.7 / (1.0 + 0.5 * x.sin()).sqrt()).collect();
        let p = RoughPath::sample_brownian(0.2, 65, 4).unwrap();
        let traj = solve(&f, &p, &u0, &g, SolverConfig::default(), &Snapshots::EveryStep { horizon: 0.2 }).unwrap();
        let m = defect_measure(&traj, &f, DefectOptions::default()).unwrap();
        assert!(m.min_value() > -1e-10, "{}", m.min_value());
        assert!(m.negative_mass() < 1e-12);
    }

    #[test]
    fn kinetic_flux_limits_recover_engquist_osher_halves() {
        use crate::solver::{eo_falling, eo_rising};
        for (u, p, sigma) in [(0.7, (0.0, 0.5), 1.0), (-0.6, (1.0, -1.0), -2.0), (1.2, (0.3, 0.2), 0.5)] {
            let big = 10.0;
            assert!((kinetic_flux(sigma, p, u, big, true) - eo_rising(sigma, p, u)).abs() < 1e-14);
            assert!((kinetic_flux(sigma, p, u, big, false) - eo_falling(sigma, p, u)).abs() < 1e-14);
            assert_eq!(kinetic_flux(sigma, p, u, -big, true), 0.0);
            assert!((chi_primitive(u, big) - u).abs() < 1e-15);
        }
    }
}
