//! Sobolev norms of peakon combinations from their exact Fourier coefficients.
//!
//! For `f = sum_j a_j E(x - theta_j)` the coefficients are
//! `c_n = K^{1/2} (1 + n^2)^{-1} d_n` with `d_n = sum_j a_j e^{-i n theta_j}` and
//! `K = (sinh(pi) / pi)^2`, so
//!
//! ```text
//! ||f||_{H^s}^2 = sum_n (1 + n^2)^s |c_n|^2 = K sum_n (1 + n^2)^{s-2} |d_n|^2.
//! ```
//!
//! The series is summed exactly up to `|n| <= N` and the remainder is bounded two
//! ways: uniformly through `|d_n| <= M`, and through the sharper
//! `|d_n| <= min(|sum_j a_j| + n sum_j |a_j| |theta_j - theta_0|, M)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_with_outputs, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::signed_angle;
use crate::peakon::{CollisionProfile, PeakonSum};

/// Truncation used when none is requested.
pub const DEFAULT_TRUNCATION: usize = 1024;
/// Upper limit for adaptive doubling of the truncation.
pub const MAX_TRUNCATION: usize = 1 << 21;

#[inline]
fn norm_constant() -> f64 {
    let r = PI.sinh() / PI;
    r * r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevSeries {
    pub s: f64,
    pub truncation: usize,
    /// `sum_{|n| <= N} (1 + n^2)^s |c_n|^2`.
    pub partial_sum: f64,
    /// `K M^2 sum_{|n| > N} (1 + n^2)^{s-2}`, bounded by the integral comparison.
    pub tail_bound: f64,
    /// Tail bound from the Lipschitz estimate on `d_n`; never larger than `tail_bound`.
    pub refined_tail: f64,
    pub m_bound: f64,
}

impl SobolevSeries {
    pub fn certified_lower(&self) -> f64 {
        self.partial_sum
    }

    pub fn certified_upper(&self) -> f64 {
        self.partial_sum + self.refined_tail
    }

    /// Width of the certified interval for the squared norm.
    pub fn tail_uncertainty(&self) -> f64 {
        self.refined_tail
    }

    pub fn norm_lower(&self) -> f64 {
        self.certified_lower().sqrt()
    }

    pub fn norm_upper(&self) -> f64 {
        self.certified_upper().sqrt()
    }
}

/// `int_N^inf x^{2s-4} dx`, an upper bound for `sum_{n > N} (1 + n^2)^{s-2}`.
fn power_tail(s: f64, n: f64) -> f64 {
    if s >= 1.5 {
        return f64::INFINITY;
    }
    n.powf(2.0 * s - 3.0) / (3.0 - 2.0 * s)
}

fn power_integral(gamma: f64, lo: f64, hi: f64) -> f64 {
    if (gamma + 1.0).abs() < 1e-12 {
        (hi / lo).ln()
    } else {
        (hi.powf(gamma + 1.0) - lo.powf(gamma + 1.0)) / (gamma + 1.0)
    }
}

/// Bound on `sum_{n > N} n^{2s-4} min(A + D n, M)^2`.
///
/// Uses `sum_{n > N} w(n) g(n) <= int_N^inf w(x) g(x + 1) dx` for decreasing `w`
/// and nondecreasing `g`.
fn lipschitz_tail(s: f64, n: f64, a: f64, d: f64, m: f64) -> f64 {
    let beta = 2.0 * s - 4.0;
    let a1 = a + d;
    if m <= a1 {
        return m * m * power_tail(s, n);
    }
    if d == 0.0 {
        return if a1 == 0.0 { 0.0 } else { a1 * a1 * power_tail(s, n) };
    }
    let knee = (m - a1) / d;
    let mut total = 0.0;
    if knee > n {
        total += a1 * a1 * power_integral(beta, n, knee)
            + 2.0 * a1 * d * power_integral(beta + 1.0, n, knee)
            + d * d * power_integral(beta + 2.0, n, knee);
    }
    total + m * m * power_tail(s, knee.max(n))
}

/// Truncated `H^s` norm squared of `f` with both tail bounds, `M = sum_j |a_j|`.
pub fn hs_norm_sq(f: &PeakonSum, s: f64, truncation: usize) -> Result<SobolevSeries> {
    hs_norm_sq_with_bound(f, s, truncation, f.amplitude_bound())
}

/// As [`hs_norm_sq`] with a caller-supplied uniform coefficient bound `m >= sum_j |a_j|`.
pub fn hs_norm_sq_with_bound(f: &PeakonSum, s: f64, truncation: usize, m: f64) -> Result<SobolevSeries> {
    if !s.is_finite() || s >= 2.0 {
        return Err(Error::Domain(format!("s = {s}: the coefficient tail diverges for s >= 2")));
    }
    if truncation < 1 {
        return Err(Error::InvalidParams("truncation must be at least 1".into()));
    }
    let m = m.max(f.amplitude_bound());
    let k = norm_constant();

    // offsets relative to the reference term that minimises sum |a_j| |delta_j|
    let terms = &f.terms;
    let (offsets, lip) = if terms.is_empty() {
        (Vec::new(), 0.0)
    } else {
        terms
            .iter()
            .map(|r| {
                let off: Vec<f64> = terms.iter().map(|t| signed_angle(t.q() - r.q())).collect();
                let lip: f64 = terms.iter().zip(&off).map(|(t, o)| t.p.abs() * o.abs()).sum();
                (off, lip)
            })
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("non-empty")
    };
    let total_amp: f64 = terms.iter().map(|t| t.p).sum();

    let coeff_sq = |n: usize| -> f64 {
        let nf = n as f64;
        let mut re = total_amp;
        let mut im = 0.0;
        for (t, &o) in terms.iter().zip(&offsets) {
            let (sn, _) = (0.5 * nf * o).sin_cos();
            re -= t.p * 2.0 * sn * sn;
            im -= t.p * (nf * o).sin();
        }
        re * re + im * im
    };

    let mut acc = coeff_sq(0);
    let mut pos = 0.0;
    // sum from the small terms upward to limit rounding
    for n in (1..=truncation).rev() {
        let nf = n as f64;
        pos += (1.0 + nf * nf).powf(s - 2.0) * coeff_sq(n);
    }
    acc += 2.0 * pos;
    let partial_sum = k * acc;

    let nf = truncation as f64;
    let tail_bound = 2.0 * k * m * m * power_tail(s, nf);
    let refined = 2.0 * k * lipschitz_tail(s, nf, total_amp.abs(), lip, m);
    Ok(SobolevSeries { s, truncation, partial_sum, tail_bound, refined_tail: refined.min(tail_bound), m_bound: m })
}

/// Double the truncation from [`DEFAULT_TRUNCATION`] until the tail is below 1% of
/// the partial sum, or [`MAX_TRUNCATION`] is reached.
pub fn hs_norm_sq_adaptive(f: &PeakonSum, s: f64, m: f64) -> Result<SobolevSeries> {
    let mut n = DEFAULT_TRUNCATION;
    loop {
        let series = hs_norm_sq_with_bound(f, s, n, m)?;
        if series.refined_tail <= 0.01 * series.partial_sum || n >= MAX_TRUNCATION {
            return Ok(series);
        }
        n *= 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub s: f64,
    pub t: f64,
    pub time_to_event: f64,
    pub series: SobolevSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub event_time: f64,
    pub profile: CollisionProfile,
    pub m_bound: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn rows_for(&self, s: f64) -> impl Iterator<Item = &ConvergenceRow> {
        self.rows.iter().filter(move |r| r.s == s)
    }

    /// Whether the certified upper bounds decrease strictly along the requested times.
    pub fn upper_decreasing(&self, s: f64) -> bool {
        let ups: Vec<f64> = self.rows_for(s).map(|r| r.series.certified_upper()).collect();
        ups.windows(2).all(|w| w[1] < w[0])
    }
}

/// `H^s` distances between the two-peakon state and the collision profile at `times`.
///
/// The states at `times` are recomputed from the trajectory's initial data at the
/// trajectory's tolerance so that they are exact outputs, not interpolants.
pub fn convergence_study(
    trajectory: &Trajectory,
    profile: &CollisionProfile,
    s_list: &[f64],
    times: &[f64],
) -> Result<ConvergenceTable> {
    let event_time = trajectory
        .event_time()
        .ok_or_else(|| Error::Precondition("trajectory ended without a collision or momentum event".into()))?;
    let t0 = trajectory.first().t;
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("times must be strictly increasing".into()));
    }
    if times.iter().any(|&t| t < t0 || t >= event_time) {
        return Err(Error::Precondition(format!("times must lie in [{t0}, {event_time})")));
    }
    let rerun = integrate_with_outputs(
        &trajectory.params,
        trajectory.first(),
        t0 + 2.0 * (event_time - t0),
        trajectory.accepted_tolerance,
        times,
        false,
    )?;

    let c = PeakonSum::from_profile(profile);
    let m_bound = trajectory
        .samples
        .iter()
        .chain(rerun.samples.iter())
        .map(|st| st.p1().abs() + st.p2().abs() + profile.p_star.abs())
        .fold(0.0, f64::max);

    let mut rows = Vec::new();
    for &s in s_list {
        for &t in times {
            let st = rerun
                .samples
                .iter()
                .find(|st| st.t == t)
                .ok_or_else(|| Error::Numerical(format!("no output produced at t = {t}")))?;
            let diff = PeakonSum::from_state(st).minus(&c);
            let series = hs_norm_sq_adaptive(&diff, s, m_bound)?;
            rows.push(ConvergenceRow { s, t, time_to_event: event_time - t, series });
        }
    }
    Ok(ConvergenceTable { event_time, profile: *profile, m_bound, rows })
}
