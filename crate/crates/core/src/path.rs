//! Continuous driving signals `W` sampled on a time grid.
//!
//! A [`RoughPath`] is a piecewise-linear interpolant through its knots. The
//! same type serves both as the "rough" signal (a Brownian sample on a fine
//! grid) and as its smooth approximations `W_h` obtained with
//! [`RoughPath::coarsen`]; the solver only needs one slope per linear segment.
//!
//! Gaussian increments are drawn with `rand_distr::StandardNormal` (the
//! ziggurat method) from a `ChaCha8Rng` seeded with `seed_from_u64`. Results
//! are bit-reproducible for a fixed seed within this crate; other languages
//! can reproduce the statistics, not the bits.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathKind {
    Brownian,
    User,
    DeterministicTest,
}

impl PathKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PathKind::Brownian => "brownian",
            PathKind::User => "user",
            PathKind::DeterministicTest => "deterministic-test",
        }
    }
}

/// Piecewise-linear path through `(times[k], values[k])` with `W(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoughPath {
    times: Vec<f64>,
    values: Vec<f64>,
    seed: Option<u64>,
    kind: PathKind,
}

/// One linear piece `[t0, t1]` of a path with constant slope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub slope: f64,
}

impl RoughPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>, kind: PathKind) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::arg(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::arg("a path needs at least two knots"));
        }
        if times[0] != 0.0 || values[0] != 0.0 {
            return Err(Error::arg("a path must start at (t, W) = (0, 0)"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::arg("knot times must be strictly increasing"));
        }
        if times.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::arg("knots must be finite"));
        }
        Ok(Self {
            times,
            values,
            seed: None,
            kind,
        })
    }

    /// `W(t) = slope * t` on `[0, horizon]`, a single linear segment.
    pub fn linear(slope: f64, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::arg(format!("horizon must be positive, got {horizon}")));
        }
        Self::new(
            vec![0.0, horizon],
            vec![0.0, slope * horizon],
            PathKind::DeterministicTest,
        )
    }

    /// Brownian sample with `n` uniformly spaced knots on `[0, horizon]`.
    pub fn sample_brownian(horizon: f64, n: usize, seed: u64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::arg(format!("horizon must be positive, got {horizon}")));
        }
        if n < 2 {
            return Err(Error::arg(format!("need at least 2 knots, got {n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let times = uniform_times(horizon, n - 1);
        let mut values = Vec::with_capacity(n);
        values.push(0.0);
        for k in 1..n {
            let dt = times[k] - times[k - 1];
            let z: f64 = StandardNormal.sample(&mut rng);
            values.push(values[k - 1] + dt.sqrt() * z);
        }
        Ok(Self {
            times,
            values,
            seed: Some(seed),
            kind: PathKind::Brownian,
        })
    }

    /// Dyadic Brownian-bridge refinement: every level inserts the conditional
    /// midpoint of each interval, doubling the number of segments.
    pub fn refine_bridge(&self, levels: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.refine_bridge_with(levels, &mut rng)
    }

    /// Same as [`refine_bridge`](Self::refine_bridge) but drawing from a
    /// caller-owned generator, so successive calls continue one stream.
    pub fn refine_bridge_with(&self, levels: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if self.kind != PathKind::Brownian {
            return Err(Error::UnsupportedKind {
                expected: PathKind::Brownian.as_str(),
                found: self.kind.as_str(),
            });
        }
        if levels == 0 {
            return Err(Error::arg("refinement needs at least one level"));
        }
        let mut times = self.times.clone();
        let mut values = self.values.clone();
        for _ in 0..levels {
            let mut t_new = Vec::with_capacity(2 * times.len() - 1);
            let mut w_new = Vec::with_capacity(2 * times.len() - 1);
            for k in 0..times.len() - 1 {
                let (t0, t1) = (times[k], times[k + 1]);
                let (w0, w1) = (values[k], values[k + 1]);
                let z: f64 = StandardNormal.sample(rng);
                t_new.push(t0);
                w_new.push(w0);
                t_new.push(0.5 * (t0 + t1));
                w_new.push(0.5 * (w0 + w1) + (0.25 * (t1 - t0)).sqrt() * z);
            }
            t_new.push(*times.last().unwrap());
            w_new.push(*values.last().unwrap());
            times = t_new;
            values = w_new;
        }
        Ok(Self {
            times,
            values,
            seed: self.seed,
            kind: PathKind::Brownian,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.times.windows(2).zip(self.values.windows(2)).map(|(t, w)| Segment {
            t0: t[0],
            t1: t[1],
            slope: (w[1] - w[0]) / (t[1] - t[0]),
        })
    }

    /// Index `k` of the segment `[t_k, t_{k+1}]` used for right-hand slopes,
    /// or `None` when `t` coincides with knot `k` (returned as `Err(k)`).
    fn locate(&self, t: f64) -> std::result::Result<usize, usize> {
        let snap = 1e-12 * self.horizon();
        let i = self.times.partition_point(|&tk| tk < t);
        if i < self.times.len() && (self.times[i] - t).abs() <= snap {
            return Err(i);
        }
        if i > 0 && (t - self.times[i - 1]).abs() <= snap {
            return Err(i - 1);
        }
        Ok(i - 1)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let hi = self.horizon();
        if !(0.0..=hi).contains(&t) {
            return Err(Error::OutOfRange { value: t, lo: 0.0, hi });
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(self.eval_and_slope(t)?.0)
    }

    /// `W(t)` by linear interpolation together with the right-hand slope
    /// (left-hand at the final knot). Knot values are returned exactly.
    pub fn eval_and_slope(&self, t: f64) -> Result<(f64, f64)> {
        self.check_time(t)?;
        let last = self.times.len() - 1;
        let slope_of = |k: usize| {
            (self.values[k + 1] - self.values[k]) / (self.times[k + 1] - self.times[k])
        };
        match self.locate(t) {
            Err(k) => {
                let seg = if k == last { k - 1 } else { k };
                Ok((self.values[k], slope_of(seg)))
            }
            Ok(k) => {
                let s = slope_of(k);
                Ok((self.values[k] + s * (t - self.times[k]), s))
            }
        }
    }

    /// Piecewise-linear interpolant through `W` at `0, h, 2h, …` (plus the
    /// horizon when it is not a multiple of `h`).
    pub fn coarsen(&self, h: f64) -> Result<Self> {
        let horizon = self.horizon();
        if !(h > 0.0) || h > horizon * (1.0 + 1e-12) {
            return Err(Error::arg(format!(
                "coarsening mesh must lie in (0, {horizon}], got {h}"
            )));
        }
        let ratio = horizon / h;
        let steps = ratio.round();
        let mut times: Vec<f64> = if (steps * h - horizon).abs() <= 1e-9 * horizon {
            let mut t: Vec<f64> = (0..steps as usize).map(|k| k as f64 * h).collect();
            t.push(horizon);
            t
        } else {
            let full = ratio.floor() as usize;
            let mut t: Vec<f64> = (0..=full).map(|k| k as f64 * h).collect();
            t.push(horizon);
            t
        };
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * horizon);
        let values = times
            .iter()
            .map(|&t| self.eval(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            times,
            values,
            seed: self.seed,
            kind: self.kind,
        })
    }

    /// Exact oscillation `ω(h) = sup { |W(b) − W(a)| : 0 ≤ b − a ≤ h }`.
    ///
    /// For a piecewise-linear path the supremum is attained either at a pair
    /// of knots, or with `b − a = h` and one end on a knot. Knot pairs are
    /// handled with sliding-window extrema (monotone deques), the other two
    /// families by direct evaluation.
    pub fn oscillation(&self, h: f64) -> Result<f64> {
        let horizon = self.horizon();
        if !(h > 0.0) {
            return Err(Error::arg(format!("oscillation window must be positive, got {h}")));
        }
        if h > horizon * (1.0 + 1e-12) {
            return Err(Error::arg(format!(
                "oscillation window {h} exceeds the horizon {horizon}"
            )));
        }
        let h = h.min(horizon);
        let n = self.times.len();
        let mut best = 0.0f64;

        let mut max_q: std::collections::VecDeque<usize> = Default::default();
        let mut min_q: std::collections::VecDeque<usize> = Default::default();
        for j in 0..n {
            let tj = self.times[j];
            while let Some(&i) = max_q.front() {
                if tj - self.times[i] > h {
                    max_q.pop_front();
                } else {
                    break;
                }
            }
            while let Some(&i) = min_q.front() {
                if tj - self.times[i] > h {
                    min_q.pop_front();
                } else {
                    break;
                }
            }
            while max_q.back().is_some_and(|&i| self.values[i] <= self.values[j]) {
                max_q.pop_back();
            }
            while min_q.back().is_some_and(|&i| self.values[i] >= self.values[j]) {
                min_q.pop_back();
            }
            max_q.push_back(j);
            min_q.push_back(j);
            let wj = self.values[j];
            best = best
                .max(self.values[*max_q.front().unwrap()] - wj)
                .max(wj - self.values[*min_q.front().unwrap()]);
        }

        for k in 0..n {
            let t = self.times[k];
            let w = self.values[k];
            if t + h <= horizon {
                best = best.max((self.eval(t + h)? - w).abs());
            }
            if t - h >= 0.0 {
                best = best.max((self.eval(t - h)? - w).abs());
            }
        }
        Ok(best)
    }

    /// Supremum distance between two piecewise-linear paths on the common
    /// horizon; exact, since the difference is linear between merged knots.
    pub fn sup_distance(&self, other: &RoughPath) -> Result<f64> {
        let horizon = self.horizon().min(other.horizon());
        let mut knots: Vec<f64> = self
            .times
            .iter()
            .chain(other.times.iter())
            .copied()
            .filter(|&t| t <= horizon)
            .collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let mut best = 0.0f64;
        for t in knots {
            best = best.max((self.eval(t)? - other.eval(t)?).abs());
        }
        Ok(best)
    }

    /// CSV with header `t,w`, one knot per row, shortest round-trip decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["t", "w"])?;
        for (t, w) in self.times.iter().zip(&self.values) {
            wtr.write_record([t.to_string(), w.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Reads a `t,w` CSV; the result is tagged [`PathKind::User`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "w" {
            return Err(Error::arg(format!(
                "expected header `t,w`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec[i].trim().parse::<f64>().map_err(|e| {
                    Error::arg(format!("row {}: cannot parse `{}`: {e}", row + 2, &rec[i]))
                })
            };
            times.push(parse(0)?);
            values.push(parse(1)?);
        }
        Self::new(times, values, PathKind::User)
    }
}

/// `n + 1` uniformly spaced stamps `k * (horizon / n)`, the last one pinned to
/// `horizon` exactly.
pub(crate) fn uniform_times(horizon: f64, n: usize) -> Vec<f64> {
    let dt = horizon / n as f64;
    let mut t: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    t.push(horizon);
    t
}
