//! Flux functions `A(x, u)` with their derived fields `a = A_u` and
//! `b = div_x A`.
//!
//! Characteristics only need the [`Flux`] trait and work in any spatial
//! dimension. The finite-volume solver works with the one-dimensional
//! [`FluxModel`] presets, all of which are quadratic in `u`:
//! `A(x, u) = p1(x) u + p2(x) u²`, so `a` is affine in `u`.

use crate::error::{Error, Result};

/// A flux in `N` space dimensions, with the derivatives the characteristic
/// flow and its variational equations need.
pub trait Flux: Send + Sync {
    fn dim(&self) -> usize;

    /// `A(x, u)` written into `out` (length `N`).
    fn flux(&self, x: &[f64], u: f64, out: &mut [f64]);

    /// `a(x, ξ) = A_u(x, ξ)` written into `out` (length `N`).
    fn speed(&self, x: &[f64], xi: f64, out: &mut [f64]);

    /// `b(x, ξ) = div_x A(x, ξ)`.
    fn source(&self, x: &[f64], xi: f64) -> f64;

    /// `∂_j a_i` into `da_dx` (row-major `N × N`) and `∂_u a_i` into `da_du`.
    fn speed_derivatives(&self, x: &[f64], xi: f64, da_dx: &mut [f64], da_du: &mut [f64]);

    /// `∂_j b` into `db_dx`; returns `∂_u b`.
    fn source_derivatives(&self, x: &[f64], xi: f64, db_dx: &mut [f64]) -> f64;

    /// Divergence of the phase-space field `(a, −b)`:
    /// `Σ ∂_i a_i − ∂_ξ b`. It vanishes identically because both terms equal
    /// `Σ ∂_i ∂_u A_i`; characteristics rely on it for volume preservation.
    fn phase_divergence(&self, x: &[f64], xi: f64) -> f64 {
        let n = self.dim();
        let mut da_dx = vec![0.0; n * n];
        let mut da_du = vec![0.0; n];
        let mut db_dx = vec![0.0; n];
        self.speed_derivatives(x, xi, &mut da_dx, &mut da_du);
        let db_du = self.source_derivatives(x, xi, &mut db_dx);
        (0..n).map(|i| da_dx[i * n + i]).sum::<f64>() - db_du
    }
}

/// Smooth, bounded coefficient function of one variable with its first two
/// derivatives in closed form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    /// `mean + amp * sin(freq * x)`
    Sine { mean: f64, amp: f64, freq: f64 },
    /// `slope * x + intercept`; unbounded, so only meaningful on a box.
    Affine { slope: f64, intercept: f64 },
}

impl Coefficient {
    /// `1 + ½ sin x`, the workhorse inhomogeneity.
    pub const HALF_SINE: Coefficient = Coefficient::Sine {
        mean: 1.0,
        amp: 0.5,
        freq: 1.0,
    };

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Coefficient::Constant(c) => c,
            Coefficient::Sine { mean, amp, freq } => mean + amp * (freq * x).sin(),
            Coefficient::Affine { slope, intercept } => slope * x + intercept,
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match *self {
            Coefficient::Constant(_) => 0.0,
            Coefficient::Sine { amp, freq, .. } => amp * freq * (freq * x).cos(),
            Coefficient::Affine { slope, .. } => slope,
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match *self {
            Coefficient::Constant(_) | Coefficient::Affine { .. } => 0.0,
            Coefficient::Sine { amp, freq, .. } => -amp * freq * freq * (freq * x).sin(),
        }
    }

    /// Lower bound of the coefficient on `[lo, hi]`.
    pub fn min_on(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            Coefficient::Constant(c) => c,
            Coefficient::Sine { mean, amp, freq } => {
                if freq == 0.0 || (hi - lo) * freq.abs() >= 2.0 * std::f64::consts::PI {
                    return mean - amp.abs();
                }
                // Sample densely; sin has a closed-form minimum but the
                // window bookkeeping is not worth it here.
                let n = 2048;
                (0..=n)
                    .map(|k| self.value(lo + (hi - lo) * k as f64 / n as f64))
                    .fold(f64::INFINITY, f64::min)
            }
            Coefficient::Affine { .. } => self.value(lo).min(self.value(hi)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Preset {
    /// `A = u²/2`
    Burgers,
    /// `A = c(x) u²`, requires `c ≥ c_m > 0`
    InhomBurgers(Coefficient),
    /// `A = V(x) u (1 − u)`
    TwoPhase(Coefficient),
    /// `A = v(x) u`
    LinearAdvection(Coefficient),
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Burgers => "burgers",
            Preset::InhomBurgers(_) => "inhom_burgers",
            Preset::TwoPhase(_) => "two_phase",
            Preset::LinearAdvection(_) => "linear_advection",
        }
    }
}

/// Axis-aligned `(x, u)` box on which a model's assumptions are checked.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateBox {
    pub x: (f64, f64),
    pub u: (f64, f64),
}

impl StateBox {
    pub fn new(x: (f64, f64), u: (f64, f64)) -> Result<Self> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo < hi;
        if !ok(x) || !ok(u) {
            return Err(Error::arg(format!("degenerate or infinite box x={x:?} u={u:?}")));
        }
        Ok(Self { x, u })
    }
}

/// `A(x, u)` together with `a` and `b` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxTriple {
    pub flux: f64,
    pub speed: f64,
    pub source: f64,
}

/// One-dimensional flux preset on a stated box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxModel {
    preset: Preset,
    domain: StateBox,
}

impl FluxModel {
    pub fn new(preset: Preset, domain: StateBox) -> Result<Self> {
        if let Preset::InhomBurgers(c) = preset {
            let c_min = c.min_on(domain.x.0, domain.x.1);
            if !(c_min > 0.0) {
                return Err(Error::Validation(format!(
                    "inhom_burgers coefficient must be positive on [{}, {}], min is {c_min}",
                    domain.x.0, domain.x.1
                )));
            }
        }
        Ok(Self { preset, domain })
    }

    pub fn burgers(domain: StateBox) -> Self {
        Self {
            preset: Preset::Burgers,
            domain,
        }
    }

    pub fn preset(&self) -> Preset {
        self.preset
    }

    pub fn domain(&self) -> StateBox {
        self.domain
    }

    /// Coefficients `(p1, p2)` with `A(x, u) = p1 u + p2 u²`.
    #[inline]
    pub fn quadratic_coeffs(&self, x: f64) -> (f64, f64) {
        match self.preset {
            Preset::Burgers => (0.0, 0.5),
            Preset::InhomBurgers(c) => (0.0, c.value(x)),
            Preset::TwoPhase(v) => {
                let vx = v.value(x);
                (vx, -vx)
            }
            Preset::LinearAdvection(v) => (v.value(x), 0.0),
        }
    }

    /// x-derivatives of [`quadratic_coeffs`](Self::quadratic_coeffs).
    fn quadratic_coeffs_dx(&self, x: f64) -> (f64, f64) {
        match self.preset {
            Preset::Burgers => (0.0, 0.0),
            Preset::InhomBurgers(c) => (0.0, c.d1(x)),
            Preset::TwoPhase(v) => (v.d1(x), -v.d1(x)),
            Preset::LinearAdvection(v) => (v.d1(x), 0.0),
        }
    }

    fn quadratic_coeffs_dxx(&self, x: f64) -> (f64, f64) {
        match self.preset {
            Preset::Burgers => (0.0, 0.0),
            Preset::InhomBurgers(c) => (0.0, c.d2(x)),
            Preset::TwoPhase(v) => (v.d2(x), -v.d2(x)),
            Preset::LinearAdvection(v) => (v.d2(x), 0.0),
        }
    }

    #[inline]
    pub fn flux_at(&self, x: f64, u: f64) -> f64 {
        let (p1, p2) = self.quadratic_coeffs(x);
        u * (p1 + p2 * u)
    }

    #[inline]
    pub fn speed_at(&self, x: f64, u: f64) -> f64 {
        let (p1, p2) = self.quadratic_coeffs(x);
        p1 + 2.0 * p2 * u
    }

    #[inline]
    pub fn source_at(&self, x: f64, u: f64) -> f64 {
        let (q1, q2) = self.quadratic_coeffs_dx(x);
        u * (q1 + q2 * u)
    }

    pub fn eval(&self, x: f64, u: f64) -> FluxTriple {
        FluxTriple {
            flux: self.flux_at(x, u),
            speed: self.speed_at(x, u),
            source: self.source_at(x, u),
        }
    }

    /// Ordered steady states `k_±(x) = ±λ c(x)^{-1/2}` of `A = c(x) u²`
    /// (`∂_x(c k²) = 0`), or the constants `0` and `1` for the two-phase flux.
    /// `None` for presets without a shipped pair.
    pub fn steady_states(&self, x: f64, lambda: f64) -> Option<(f64, f64)> {
        match self.preset {
            Preset::InhomBurgers(c) => {
                let k = lambda / c.value(x).sqrt();
                Some((-k, k))
            }
            Preset::TwoPhase(_) => Some((0.0, 1.0)),
            Preset::Burgers => Some((-lambda, lambda)),
            Preset::LinearAdvection(_) => None,
        }
    }

    /// Sup of `|a|` over `x ∈ [x_lo, x_hi]` (sampled at `xs`) and
    /// `u ∈ [u_lo, u_hi]`; exact in `u` because `a` is affine there.
    pub fn max_speed(&self, xs: &[f64], u_lo: f64, u_hi: f64) -> f64 {
        xs.iter()
            .map(|&x| self.speed_at(x, u_lo).abs().max(self.speed_at(x, u_hi).abs()))
            .fold(0.0, f64::max)
    }

    /// Samples `(6)` and finite-difference estimates of the four derivative
    /// families of `(7)` on a uniform `n_samples × n_samples` lattice of the
    /// model's box.
    pub fn validate_assumptions(&self, n_samples: usize) -> AssumptionReport {
        validate_with(
            self.domain,
            n_samples,
            |x, u| self.flux_at(x, u),
            |x, u| self.speed_at(x, u),
            |x, u| self.source_at(x, u),
        )
    }
}

impl Flux for FluxModel {
    fn dim(&self) -> usize {
        1
    }

    fn flux(&self, x: &[f64], u: f64, out: &mut [f64]) {
        out[0] = self.flux_at(x[0], u);
    }

    fn speed(&self, x: &[f64], xi: f64, out: &mut [f64]) {
        out[0] = self.speed_at(x[0], xi);
    }

    fn source(&self, x: &[f64], xi: f64) -> f64 {
        self.source_at(x[0], xi)
    }

    fn speed_derivatives(&self, x: &[f64], xi: f64, da_dx: &mut [f64], da_du: &mut [f64]) {
        let (q1, q2) = self.quadratic_coeffs_dx(x[0]);
        let (_, p2) = self.quadratic_coeffs(x[0]);
        da_dx[0] = q1 + 2.0 * q2 * xi;
        da_du[0] = 2.0 * p2;
    }

    fn source_derivatives(&self, x: &[f64], xi: f64, db_dx: &mut [f64]) -> f64 {
        let (r1, r2) = self.quadratic_coeffs_dxx(x[0]);
        let (q1, q2) = self.quadratic_coeffs_dx(x[0]);
        db_dx[0] = xi * (r1 + r2 * xi);
        q1 + 2.0 * q2 * xi
    }
}

/// Outcome of [`FluxModel::validate_assumptions`].
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    /// `max |b(x, 0)|` over sampled `x`.
    pub max_source_at_zero: f64,
    /// `x` at which `max_source_at_zero` is attained.
    pub witness_x: f64,
    pub sup_da_dx: f64,
    pub sup_da_du: f64,
    pub sup_db_dx: f64,
    pub sup_db_du: f64,
    /// Largest mismatch between `a` and the central difference `∂A/∂u`.
    pub speed_consistency: f64,
    /// Largest mismatch between `b` and the central difference `∂A/∂x`.
    pub source_consistency: f64,
    /// `max_source_at_zero ≤ 1e-8`
    pub source_vanishes: bool,
    pub derivatives_bounded: bool,
}

impl AssumptionReport {
    pub const SOURCE_TOLERANCE: f64 = 1e-8;

    pub fn pass(&self) -> bool {
        self.source_vanishes && self.derivatives_bounded
    }
}

/// Box-relative assumption check for arbitrary closures; the presets go
/// through [`FluxModel::validate_assumptions`], tests use it with
/// deliberately broken fluxes.
pub fn validate_with(
    domain: StateBox,
    n_samples: usize,
    flux: impl Fn(f64, f64) -> f64,
    speed: impl Fn(f64, f64) -> f64,
    source: impl Fn(f64, f64) -> f64,
) -> AssumptionReport {
    let n = n_samples.max(2);
    let (x_lo, x_hi) = domain.x;
    let (u_lo, u_hi) = domain.u;
    let hx = 1e-4 * (x_hi - x_lo).max(1.0);
    let hu = 1e-4 * (u_hi - u_lo).max(1.0);
    let lattice = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / (n - 1) as f64;

    let mut report = AssumptionReport {
        max_source_at_zero: 0.0,
        witness_x: x_lo,
        sup_da_dx: 0.0,
        sup_da_du: 0.0,
        sup_db_dx: 0.0,
        sup_db_du: 0.0,
        speed_consistency: 0.0,
        source_consistency: 0.0,
        source_vanishes: true,
        derivatives_bounded: true,
    };
    for i in 0..n {
        let x = lattice(x_lo, x_hi, i);
        let b0 = source(x, 0.0).abs();
        if b0 > report.max_source_at_zero {
            report.max_source_at_zero = b0;
            report.witness_x = x;
        }
        for j in 0..n {
            let u = lattice(u_lo, u_hi, j);
            let dx = |f: &dyn Fn(f64, f64) -> f64| (f(x + hx, u) - f(x - hx, u)) / (2.0 * hx);
            let du = |f: &dyn Fn(f64, f64) -> f64| (f(x, u + hu) - f(x, u - hu)) / (2.0 * hu);
            let vals = [dx(&speed), du(&speed), dx(&source), du(&source)];
            report.sup_da_dx = report.sup_da_dx.max(vals[0].abs());
            report.sup_da_du = report.sup_da_du.max(vals[1].abs());
            report.sup_db_dx = report.sup_db_dx.max(vals[2].abs());
            report.sup_db_du = report.sup_db_du.max(vals[3].abs());
            if vals.iter().any(|v| !v.is_finite()) {
                report.derivatives_bounded = false;
            }
            report.speed_consistency = report.speed_consistency.max((du(&flux) - speed(x, u)).abs());
            report.source_consistency =
                report.source_consistency.max((dx(&flux) - source(x, u)).abs());
        }
    }
    report.source_vanishes = report.max_source_at_zero <= AssumptionReport::SOURCE_TOLERANCE;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn inhom() -> FluxModel {
        let b = StateBox::new((-PI, PI), (-2.0, 2.0)).unwrap();
        FluxModel::new(Preset::InhomBurgers(Coefficient::HALF_SINE), b).unwrap()
    }

    fn unit_box() -> StateBox {
        StateBox::new((-4.0, 4.0), (-2.0, 2.0)).unwrap()
    }

    #[test]
    fn inhom_burgers_closed_form() {
        let t = inhom().eval(0.0, 1.0);
        assert_eq!(t.flux, 1.0);
        assert_eq!(t.speed, 2.0);
        assert_eq!(t.source, 0.5);
        let t = inhom().eval(FRAC_PI_2, 1.0);
        assert_eq!(t.flux, 1.5);
        assert_eq!(t.speed, 3.0);
        assert!(t.source.abs() < 1e-16);
    }

    #[test]
    fn burgers_eval() {
        let f = FluxModel::burgers(unit_box());
        let t = f.eval(0.3, 3.0);
        assert_eq!((t.flux, t.speed, t.source), (4.5, 3.0, 0.0));
        for x in [-3.0, 0.0, 2.5] {
            assert_eq!(f.source_at(x, 1.7), 0.0);
        }
    }

    #[test]
    fn linear_advection_eval() {
        let f = FluxModel::new(
            Preset::LinearAdvection(Coefficient::Affine {
                slope: 1.0,
                intercept: 0.0,
            }),
            unit_box(),
        )
        .unwrap();
        let t = f.eval(1.0, 2.0);
        assert_eq!((t.flux, t.speed, t.source), (2.0, 1.0, 2.0));
    }

    #[test]
    fn two_phase_vanishes_at_pure_phases() {
        let f = FluxModel::new(Preset::TwoPhase(Coefficient::HALF_SINE), unit_box()).unwrap();
        for x in [-2.0, -0.3, 0.0, 1.1, 3.3] {
            for u in [0.0, 1.0] {
                let t = f.eval(x, u);
                assert_eq!(t.flux, 0.0);
                assert_eq!(t.source, 0.0);
            }
        }
    }

    #[test]
    fn inhom_burgers_rejects_nonpositive_coefficient() {
        let c = Coefficient::Sine {
            mean: 0.2,
            amp: 0.5,
            freq: 1.0,
        };
        let err = FluxModel::new(Preset::InhomBurgers(c), unit_box()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn burgers_assumptions() {
        let r = FluxModel::burgers(unit_box()).validate_assumptions(21);
        assert_eq!(r.max_source_at_zero, 0.0);
        assert!((r.sup_da_du - 1.0).abs() < 1e-9);
        assert!(r.pass());
    }

    #[test]
    fn inhom_burgers_source_derivative_bound() {
        // sup |∂_x b| = sup |c''| u² = 1/2 · 4 on [-π, π] × [-2, 2]
        let r = inhom().validate_assumptions(201);
        assert!(r.pass());
        assert!((r.sup_db_dx - 2.0).abs() <= 0.02, "{}", r.sup_db_dx);
        assert!(r.speed_consistency < 1e-6);
        assert!(r.source_consistency < 1e-6);
    }

    #[test]
    fn broken_flux_is_flagged_with_witness() {
        let domain = StateBox::new((-1.0, 2.0), (-1.0, 1.0)).unwrap();
        let r = validate_with(domain, 31, |x, u| x * u, |x, _| x, |x, _| x);
        assert!(!r.source_vanishes);
        assert!(!r.pass());
        assert_eq!(r.witness_x, 2.0);
        assert_eq!(r.max_source_at_zero, 2.0);
    }

    #[test]
    fn shipped_presets_have_zero_source_at_zero() {
        let presets = [
            Preset::Burgers,
            Preset::InhomBurgers(Coefficient::HALF_SINE),
            Preset::TwoPhase(Coefficient::HALF_SINE),
            Preset::LinearAdvection(Coefficient::HALF_SINE),
        ];
        for p in presets {
            let f = FluxModel::new(p, unit_box()).unwrap();
            let r = f.validate_assumptions(41);
            assert!(r.max_source_at_zero <= 1e-12, "{}", p.name());
        }
    }

    #[test]
    fn steady_states_are_exact() {
        let f = inhom();
        let (_, kp) = f.steady_states(FRAC_PI_2, 1.0).unwrap();
        assert!((kp - 1.5f64.powf(-0.5)).abs() < 1e-15);
        assert!((kp - 0.8165).abs() < 1e-4);
        // c(x) k(x)² is constant, so its x-derivative vanishes.
        for x in [-2.0, -0.5, 0.3, 1.7] {
            let (km, kp) = f.steady_states(x, 0.8).unwrap();
            assert!((f.flux_at(x, kp) - 0.64).abs() < 1e-14);
            assert!((f.flux_at(x, km) - 0.64).abs() < 1e-14);
        }
    }

    #[test]
    fn analytic_derivatives_match_trait_and_divergence_vanishes() {
        let f = inhom();
        let (x, xi) = (0.4, -1.3);
        let mut da_dx = [0.0];
        let mut da_du = [0.0];
        let mut db_dx = [0.0];
        f.speed_derivatives(&[x], xi, &mut da_dx, &mut da_du);
        let db_du = f.source_derivatives(&[x], xi, &mut db_dx);
        let h = 1e-6;
        assert!((da_dx[0] - (f.speed_at(x + h, xi) - f.speed_at(x - h, xi)) / (2.0 * h)).abs() < 1e-8);
        assert!((da_du[0] - (f.speed_at(x, xi + h) - f.speed_at(x, xi - h)) / (2.0 * h)).abs() < 1e-8);
        assert!((db_dx[0] - (f.source_at(x + h, xi) - f.source_at(x - h, xi)) / (2.0 * h)).abs() < 1e-8);
        assert!((db_du - (f.source_at(x, xi + h) - f.source_at(x, xi - h)) / (2.0 * h)).abs() < 1e-8);
        assert!(f.phase_divergence(&[x], xi).abs() < 1e-14);
    }
}
