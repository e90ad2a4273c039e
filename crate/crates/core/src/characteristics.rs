//! Characteristic flow of the kinetic transport operator
//!
//! ```text
//! Ẏ = a(Y, ζ),   ζ̇ = −b(Y, ζ)
//! ```
//!
//! integrated together with its variational matrix
//! `J = ∂(Y, ζ)/∂(y, η)`, which obeys `J̇ = Df(Y, ζ) J`.
//!
//! The flow variable `s` is always the rescaled time. Callers driven by a
//! path pass `s = W(t) − W(t₀)`; nothing in this module knows about paths.
//! Backward characteristics are the same flow run for `−s`, so
//! [`flow_backward`] returns `(X(0), Ξ(0))` and `∂(X(0), Ξ(0))/∂(x, ξ)`.
//!
//! Integration uses the Dormand–Prince 5(4) pair with mixed
//! absolute/relative error control on the full extended state.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::flux::Flux;

pub const DEFAULT_TOL: f64 = 1e-9;

const MAX_STEPS: usize = 1_000_000;

/// Position/velocity pair with its variational matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CharState {
    /// Position `Y` (or `X`), length `N`.
    pub pos: Vec<f64>,
    /// Velocity variable `ζ` (or `Ξ`).
    pub vel: f64,
    /// Row-major `(N+1) × (N+1)` matrix `∂(pos, vel)/∂(initial pos, initial vel)`.
    pub jac: Vec<f64>,
    /// Signed flow time reached from the initial data.
    pub s: f64,
}

impl CharState {
    pub fn initial(pos: &[f64], vel: f64) -> Self {
        let m = pos.len() + 1;
        let mut jac = vec![0.0; m * m];
        for i in 0..m {
            jac[i * m + i] = 1.0;
        }
        Self {
            pos: pos.to_vec(),
            vel,
            jac,
            s: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.pos.len()
    }

    /// Entry `∂ z_row / ∂ z0_col` of the variational matrix, with the
    /// velocity variable as index `N`.
    pub fn jac_entry(&self, row: usize, col: usize) -> f64 {
        self.jac[row * (self.dim() + 1) + col]
    }

    /// `∂_ξ X`, the sensitivity of the first position coordinate to the
    /// initial velocity.
    pub fn dpos_dvel(&self) -> f64 {
        self.jac_entry(0, self.dim())
    }

    /// `∂_ξ Ξ`
    pub fn dvel_dvel(&self) -> f64 {
        let n = self.dim();
        self.jac_entry(n, n)
    }

    /// `∂_x Y` for `N = 1`; the leading block entry otherwise.
    pub fn dpos_dpos(&self) -> f64 {
        self.jac_entry(0, 0)
    }

    fn pack(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.pos.len() + 1 + self.jac.len());
        z.extend_from_slice(&self.pos);
        z.push(self.vel);
        z.extend_from_slice(&self.jac);
        z
    }

    fn unpack(z: &[f64], n: usize, s: f64) -> Self {
        Self {
            pos: z[..n].to_vec(),
            vel: z[n],
            jac: z[n + 1..].to_vec(),
            s,
        }
    }
}

/// Accepted steps of a forward flow.
#[derive(Clone, Debug)]
pub struct CharPath {
    pub states: Vec<CharState>,
    /// Accepted steps at which `sgn ζ` differed from `sgn η`.
    pub sign_changes: usize,
}

impl CharPath {
    pub fn last(&self) -> &CharState {
        self.states.last().unwrap()
    }
}

/// `det J`; exactly 1 at `s = 0`, and 1 up to integration error along any
/// trajectory because the phase-space field is divergence free.
pub fn jacobian_det(state: &CharState) -> f64 {
    let m = state.dim() + 1;
    if m == 2 {
        let j = &state.jac;
        return j[0] * j[3] - j[1] * j[2];
    }
    DMatrix::from_row_slice(m, m, &state.jac).determinant()
}

struct Rhs<'a, F: Flux + ?Sized> {
    flux: &'a F,
    n: usize,
    da_dx: Vec<f64>,
    da_du: Vec<f64>,
    db_dx: Vec<f64>,
    df: Vec<f64>,
}

impl<'a, F: Flux + ?Sized> Rhs<'a, F> {
    fn new(flux: &'a F) -> Self {
        let n = flux.dim();
        Self {
            flux,
            n,
            da_dx: vec![0.0; n * n],
            da_du: vec![0.0; n],
            db_dx: vec![0.0; n],
            df: vec![0.0; (n + 1) * (n + 1)],
        }
    }

    fn eval(&mut self, z: &[f64], dz: &mut [f64]) {
        let n = self.n;
        let m = n + 1;
        let (pos, rest) = z.split_at(n);
        let vel = rest[0];
        let jac = &rest[1..];
        self.flux.speed(pos, vel, &mut dz[..n]);
        dz[n] = -self.flux.source(pos, vel);

        self.flux
            .speed_derivatives(pos, vel, &mut self.da_dx, &mut self.da_du);
        let db_du = self.flux.source_derivatives(pos, vel, &mut self.db_dx);
        for i in 0..n {
            for j in 0..n {
                self.df[i * m + j] = self.da_dx[i * n + j];
            }
            self.df[i * m + n] = self.da_du[i];
        }
        for j in 0..n {
            self.df[n * m + j] = -self.db_dx[j];
        }
        self.df[n * m + n] = -db_du;

        let djac = &mut dz[m..];
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += self.df[i * m + k] * jac[k * m + j];
                }
                djac[i * m + j] = acc;
            }
        }
    }
}

// Dormand–Prince 5(4) tableau; the field is autonomous so the nodes are
// not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive integration from `start` through the increasing (or decreasing)
/// sequence of `targets`; `on_accept` sees every accepted state and the
/// states at the targets are returned.
fn integrate<F: Flux + ?Sized>(
    flux: &F,
    start: &CharState,
    targets: &[f64],
    tol: f64,
    mut on_accept: impl FnMut(&CharState),
) -> Result<Vec<CharState>> {
    if !(tol > 0.0) {
        return Err(Error::arg(format!("tolerance must be positive, got {tol}")));
    }
    let n = start.dim();
    if n != flux.dim() {
        return Err(Error::arg(format!(
            "state has dimension {n}, flux has {}",
            flux.dim()
        )));
    }
    let mut rhs = Rhs::new(flux);
    let len = n + 1 + (n + 1) * (n + 1);
    let mut z = start.pack();
    let mut s = start.s;
    let mut k = vec![vec![0.0; len]; 7];
    let mut tmp = vec![0.0; len];
    let mut z_new = vec![0.0; len];
    let mut out = Vec::with_capacity(targets.len());

    rhs.eval(&z, &mut k[0]);
    let mut h_abs = targets
        .iter()
        .map(|t| (t - s).abs())
        .fold(0.0, f64::max)
        .max(1e-3)
        * 0.01;
    let mut steps = 0usize;

    for &target in targets {
        let dir = if target >= s { 1.0 } else { -1.0 };
        while (target - s).abs() > 1e-14 * target.abs().max(1.0) {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::Integration {
                    s,
                    reason: "step budget exhausted".into(),
                    last: Box::new(CharState::unpack(&z, n, s)),
                });
            }
            let remaining = (target - s).abs();
            let final_step = h_abs >= remaining;
            let h = dir * if final_step { remaining } else { h_abs };

            for stage in 1..7 {
                for i in 0..len {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(stage) {
                        acc += A[stage][j] * kj[i];
                    }
                    tmp[i] = z[i] + h * acc;
                }
                rhs.eval(&tmp, &mut k[stage]);
            }
            // Stage 7 was evaluated at the 5th-order solution (FSAL).
            z_new.copy_from_slice(&tmp);
            let mut err: f64 = 0.0;
            for i in 0..len {
                let mut e = 0.0;
                for j in 0..7 {
                    e += E[j] * k[j][i];
                }
                let scale = tol + tol * z[i].abs().max(z_new[i].abs());
                err = err.max((h * e).abs() / scale);
            }
            if !err.is_finite() {
                err = f64::INFINITY;
            }

            if err <= 1.0 {
                s = if final_step { target } else { s + h };
                std::mem::swap(&mut z, &mut z_new);
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Integration {
                        s,
                        reason: "non-finite state".into(),
                        last: Box::new(CharState::unpack(&z, n, s)),
                    });
                }
                on_accept(&CharState::unpack(&z, n, s));
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 && final_step {
                // Keep the step length the controller wanted, not the clipped one.
                h_abs = (h_abs * factor).max(h.abs());
            } else {
                h_abs = h.abs() * factor;
            }
            if h_abs < 1e-14 * s.abs().max(1.0) {
                return Err(Error::Integration {
                    s,
                    reason: format!("step size underflow (h = {h_abs:e})"),
                    last: Box::new(CharState::unpack(&z, n, s)),
                });
            }
        }
        out.push(CharState::unpack(&z, n, target));
    }
    Ok(out)
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Forward characteristics from `(y, η)` over `s ∈ [0, s_span]` (`s_span`
/// may be negative). Every accepted step is recorded.
pub fn flow_forward<F: Flux + ?Sized>(
    flux: &F,
    y: &[f64],
    eta: f64,
    s_span: f64,
    tol: f64,
) -> Result<CharPath> {
    if !s_span.is_finite() {
        return Err(Error::arg("flow span must be finite"));
    }
    let start = CharState::initial(y, eta);
    let mut states = vec![start.clone()];
    let mut sign_changes = 0;
    let sgn0 = sign(eta);
    integrate(flux, &start, &[s_span], tol, |st| {
        if sign(st.vel) != sgn0 {
            sign_changes += 1;
        }
        states.push(st.clone());
    })?;
    Ok(CharPath {
        states,
        sign_changes,
    })
}

/// States of the forward flow from `(y, η)` at each of `targets`, which must
/// be monotone and start on the same side of 0.
pub fn flow_to<F: Flux + ?Sized>(
    flux: &F,
    y: &[f64],
    eta: f64,
    targets: &[f64],
    tol: f64,
) -> Result<Vec<CharState>> {
    let increasing = targets.windows(2).all(|w| w[1] >= w[0]);
    let decreasing = targets.windows(2).all(|w| w[1] <= w[0]);
    if !(increasing || decreasing) || targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::arg("flow targets must be finite and monotone"));
    }
    if let (Some(&first), Some(&last)) = (targets.first(), targets.last()) {
        if first * last < 0.0 {
            return Err(Error::arg("flow targets must not straddle s = 0"));
        }
    }
    integrate(flux, &CharState::initial(y, eta), targets, tol, |_| {})
}

/// Backward characteristics: starting from `(x, ξ)` at flow time `s_end`,
/// returns `(X(0), Ξ(0))` with `J = ∂(X(0), Ξ(0))/∂(x, ξ)`. The returned
/// state carries `s = −s_end`, the signed time it was flowed.
pub fn flow_backward<F: Flux + ?Sized>(
    flux: &F,
    s_end: f64,
    x: &[f64],
    xi: f64,
    tol: f64,
) -> Result<CharState> {
    if !s_end.is_finite() {
        return Err(Error::arg("flow span must be finite"));
    }
    let mut v = integrate(flux, &CharState::initial(x, xi), &[-s_end], tol, |_| {})?;
    Ok(v.pop().unwrap())
}

/// Solution of `ρ̂_s + a·D_x ρ̂ − b D_ξ ρ̂ = 0`, `ρ̂(·, ·, 0) = ρ0`, at
/// `(x, ξ, s)`: the initial function read off at the foot of the backward
/// characteristic.
pub fn transport_solve<F: Flux + ?Sized>(
    flux: &F,
    rho0: impl Fn(&[f64], f64) -> f64,
    x: &[f64],
    xi: f64,
    s: f64,
    tol: f64,
) -> Result<f64> {
    if s == 0.0 {
        return Ok(rho0(x, xi));
    }
    let foot = flow_backward(flux, s, x, xi, tol)?;
    Ok(rho0(&foot.pos, foot.vel))
}

/// Measured cancellation of velocity sensitivities between ε-close starts.
#[derive(Clone, Debug)]
pub struct CancellationGap {
    pub eps: f64,
    /// Flow times sampled in `(0, s_max]`.
    pub s: Vec<f64>,
    /// `max over pairs |∂_ξX(s) − ∂_ξX'(s)|` per sampled `s`.
    pub gap: Vec<f64>,
    /// `sup_s gap(s) / (s ε)`.
    pub sup_ratio: f64,
}

pub const CANCELLATION_SAMPLES: usize = 16;

/// Compares `∂_ξX` along the flow from `(x, ξ)` with the flows from
/// `n_pairs` starts placed on the circle of radius `ε` around it (offsets in
/// the first position coordinate and the velocity, so each coordinate
/// differs by at most `ε`).
pub fn cancellation_gap<F: Flux + ?Sized>(
    flux: &F,
    x: &[f64],
    xi: f64,
    eps: f64,
    s_max: f64,
    n_pairs: usize,
    tol: f64,
) -> Result<CancellationGap> {
    if !(eps > 0.0) || !(s_max > 0.0) || n_pairs == 0 {
        return Err(Error::arg(
            "cancellation gap needs eps > 0, s_max > 0 and at least one pair",
        ));
    }
    let s: Vec<f64> = (1..=CANCELLATION_SAMPLES)
        .map(|k| s_max * k as f64 / CANCELLATION_SAMPLES as f64)
        .collect();
    let base = flow_to(flux, x, xi, &s, tol)?;
    let mut gap = vec![0.0f64; s.len()];
    for p in 0..n_pairs {
        let theta = 2.0 * std::f64::consts::PI * p as f64 / n_pairs as f64;
        let mut y = x.to_vec();
        y[0] += eps * theta.cos();
        let eta = xi + eps * theta.sin();
        let other = flow_to(flux, &y, eta, &s, tol)?;
        for (g, (a, b)) in gap.iter_mut().zip(base.iter().zip(&other)) {
            *g = g.max((a.dpos_dvel() - b.dpos_dvel()).abs());
        }
    }
    let sup_ratio = gap
        .iter()
        .zip(&s)
        .map(|(g, si)| g / (si * eps))
        .fold(0.0, f64::max);
    Ok(CancellationGap {
        eps,
        s,
        gap,
        sup_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{Coefficient, FluxModel, Preset, StateBox};

    fn burgers() -> FluxModel {
        FluxModel::burgers(StateBox::new((-10.0, 10.0), (-3.0, 3.0)).unwrap())
    }

    fn inhom() -> FluxModel {
        FluxModel::new(
            Preset::InhomBurgers(Coefficient::HALF_SINE),
            StateBox::new((-10.0, 10.0), (-3.0, 3.0)).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn burgers_forward_is_free_streaming() {
        let p = flow_forward(&burgers(), &[0.0], 1.0, 2.0, 1e-10).unwrap();
        let st = p.last();
        assert!((st.pos[0] - 2.0).abs() < 1e-12);
        assert_eq!(st.vel, 1.0);
        let want = [1.0, 2.0, 0.0, 1.0];
        for (a, b) in st.jac.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(st.s, 2.0);
        assert!((jacobian_det(st) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_velocity_stays_zero() {
        for y in [-2.0, 0.0, 0.7, 3.0] {
            let p = flow_forward(&inhom(), &[y], 0.0, 1.5, 1e-9).unwrap();
            assert!(p.states.iter().all(|st| st.vel == 0.0));
            assert_eq!(p.sign_changes, 0);
        }
    }

    #[test]
    fn backward_inverts_burgers_example() {
        let st = flow_backward(&burgers(), 2.0, &[2.0], 1.0, 1e-10).unwrap();
        assert!(st.pos[0].abs() < 1e-12);
        assert!((st.vel - 1.0).abs() < 1e-14);
    }

    #[test]
    fn initial_state_has_unit_determinant() {
        let st = CharState::initial(&[0.3], -0.2);
        assert_eq!(jacobian_det(&st), 1.0);
        let st3 = CharState::initial(&[0.3, 1.0, 2.0], -0.2);
        assert!((jacobian_det(&st3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inhom_determinant_close_to_one() {
        let p = flow_forward(&inhom(), &[0.2], 0.9, 1.0, 1e-10).unwrap();
        for st in &p.states {
            assert!((jacobian_det(st) - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn self_convergence_against_tight_reference() {
        let reference = flow_forward(&inhom(), &[0.0], 1.0, 0.5, 1e-12).unwrap();
        let coarse = flow_forward(&inhom(), &[0.0], 1.0, 0.5, 1e-9).unwrap();
        let (r, c) = (reference.last(), coarse.last());
        assert!((r.pos[0] - c.pos[0]).abs() < 1e-8);
        assert!((r.vel - c.vel).abs() < 1e-8);
    }

    #[test]
    fn variational_matrix_matches_finite_differences() {
        let f = inhom();
        let tol = 1e-12;
        let base = flow_backward(&f, 0.7, &[0.4], 0.8, tol).unwrap();
        let h = 1e-5;
        let px = flow_backward(&f, 0.7, &[0.4 + h], 0.8, tol).unwrap();
        let mx = flow_backward(&f, 0.7, &[0.4 - h], 0.8, tol).unwrap();
        let pv = flow_backward(&f, 0.7, &[0.4], 0.8 + h, tol).unwrap();
        let mv = flow_backward(&f, 0.7, &[0.4], 0.8 - h, tol).unwrap();
        let fd = [
            (px.pos[0] - mx.pos[0]) / (2.0 * h),
            (pv.pos[0] - mv.pos[0]) / (2.0 * h),
            (px.vel - mx.vel) / (2.0 * h),
            (pv.vel - mv.vel) / (2.0 * h),
        ];
        for (a, b) in base.jac.iter().zip(fd) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn round_trip_backward_then_forward() {
        let f = inhom();
        for (x, xi) in [(0.3, 1.2), (-1.0, -0.7), (2.0, 0.05)] {
            let foot = flow_backward(&f, 0.8, &[x], xi, 1e-10).unwrap();
            let back = flow_forward(&f, &foot.pos, foot.vel, 0.8, 1e-10).unwrap();
            let st = back.last();
            assert!((st.pos[0] - x).abs() < 1e-8);
            assert!((st.vel - xi).abs() < 1e-8);
        }
    }

    #[test]
    fn group_property() {
        let f = inhom();
        let tol = 1e-10;
        let one = flow_forward(&f, &[0.1], 0.6, 0.5, tol).unwrap();
        let mid = one.last();
        let two = flow_forward(&f, &mid.pos, mid.vel, 0.4, tol).unwrap();
        let full = flow_forward(&f, &[0.1], 0.6, 0.9, tol).unwrap();
        assert!((two.last().pos[0] - full.last().pos[0]).abs() < 10.0 * tol);
        assert!((two.last().vel - full.last().vel).abs() < 10.0 * tol);
    }

    #[test]
    fn transport_examples() {
        let f = burgers();
        let rho0 = |x: &[f64], xi: f64| (x[0] - 0.2).sin() + xi * xi;
        assert_eq!(transport_solve(&f, rho0, &[0.3], 0.4, 0.0, 1e-10).unwrap(), rho0(&[0.3], 0.4));
        let v = transport_solve(&f, |_, xi| xi, &[0.3], 0.4, 1.7, 1e-10).unwrap();
        assert!((v - 0.4).abs() < 1e-14);

        let g = inhom();
        let v = transport_solve(&g, |_, xi| xi, &[0.3], 0.4, 0.9, 1e-10).unwrap();
        let oracle = flow_backward(&g, 0.9, &[0.3], 0.4, 1e-12).unwrap();
        assert!((v - oracle.vel).abs() < 1e-8);
    }

    #[test]
    fn burgers_has_no_cancellation_gap() {
        let g = cancellation_gap(&burgers(), &[0.0], 0.5, 0.1, 0.5, 8, 1e-10).unwrap();
        assert!(g.sup_ratio < 1e-10, "{}", g.sup_ratio);
    }

    #[test]
    fn cancellation_gap_scales_linearly_in_eps() {
        let f = inhom();
        let a = cancellation_gap(&f, &[0.3], 0.8, 0.02, 0.5, 8, 1e-12).unwrap();
        let b = cancellation_gap(&f, &[0.3], 0.8, 0.01, 0.5, 8, 1e-12).unwrap();
        let ga = a.gap.iter().cloned().fold(0.0, f64::max);
        let gb = b.gap.iter().cloned().fold(0.0, f64::max);
        let ratio = ga / gb;
        assert!((ratio - 2.0).abs() <= 0.4, "ratio {ratio}");
        // small-s behaviour: the gap vanishes as s -> 0
        assert!(a.gap[0] < a.gap[a.gap.len() - 1]);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(flow_forward(&burgers(), &[0.0], 1.0, 1.0, 0.0).is_err());
        assert!(flow_forward(&burgers(), &[0.0, 1.0], 1.0, 1.0, 1e-9).is_err());
        assert!(flow_to(&burgers(), &[0.0], 1.0, &[0.5, 0.2, 0.7], 1e-9).is_err());
        assert!(cancellation_gap(&burgers(), &[0.0], 1.0, 0.0, 1.0, 4, 1e-9).is_err());
    }
}
