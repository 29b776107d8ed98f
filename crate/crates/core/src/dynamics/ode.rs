//! Dormand-Prince 5(4) integrator with PI step control, cubic Hermite dense
//! output and location of linear events.

use super::EventKind;

pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N];
}

impl<const N: usize, F: Fn(f64, &[f64; N]) -> [f64; N]> OdeSystem<N> for F {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        self(t, y)
    }
}

/// Terminal event `g(y) = coeffs . y - offset`, detected when `g` changes sign.
///
/// A guarded event additionally caps the step so that `g + guard_margin` is at
/// most halved per step while `g` decreases. The right-hand side is only smooth
/// while `g + guard_margin > 0`, and this keeps every stage on the smooth side.
#[derive(Debug, Clone, Copy)]
pub struct LinearEvent<const N: usize> {
    pub kind: EventKind,
    pub coeffs: [f64; N],
    pub offset: f64,
    pub guard_margin: Option<f64>,
}

impl<const N: usize> LinearEvent<N> {
    #[inline]
    fn value(&self, y: &[f64; N]) -> f64 {
        dot(&self.coeffs, y) - self.offset
    }

    #[inline]
    fn rate(&self, f: &[f64; N]) -> f64 {
        dot(&self.coeffs, f)
    }
}

#[derive(Debug, Clone)]
pub struct OdeOptions {
    /// Mixed absolute/relative local error tolerance.
    pub tol: f64,
    pub t_end: f64,
    /// Extra output times hit exactly; must be ordered along the direction of integration.
    pub output_times: Vec<f64>,
    /// Record every accepted step.
    pub record_steps: bool,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn new(tol: f64, t_end: f64) -> Self {
        Self { tol, t_end, output_times: Vec::new(), record_steps: true, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub rhs_evals: u64,
    pub accepted: u64,
    pub rejected: u64,
}

#[derive(Debug, Clone)]
pub struct OdeSolution<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    /// Terminal events, all at (numerically) the same time. `MaxTime` if none fired.
    pub events: Vec<(f64, EventKind)>,
    pub stats: OdeStats,
}

#[derive(Debug, Clone)]
pub struct OdeFailure<const N: usize> {
    pub t: f64,
    pub reason: String,
    pub partial: OdeSolution<N>,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const ALPHA: f64 = 0.17;
const BETA: f64 = 0.04;
const EVENT_TIME_TOL: f64 = 1e-12;

#[inline]
fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn combine<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

struct Step<const N: usize> {
    y: [f64; N],
    f: [f64; N],
    err: [f64; N],
}

fn dp_step<const N: usize, S: OdeSystem<N>>(sys: &S, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> Step<N> {
    let k2 = sys.rhs(t + C2 * h, &combine(y, h, &[(A21, k1)]));
    let k3 = sys.rhs(t + C3 * h, &combine(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = sys.rhs(t + C4 * h, &combine(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = sys.rhs(t + C5 * h, &combine(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = sys.rhs(t + h, &combine(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y_new = combine(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = sys.rhs(t + h, &y_new);
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Step { y: y_new, f: k7, err }
}

fn error_norm<const N: usize>(tol: f64, y0: &[f64; N], y1: &[f64; N], err: &[f64; N]) -> f64 {
    let mut m = 0.0f64;
    for i in 0..N {
        let sc = tol * (1.0 + y0[i].abs().max(y1[i].abs()));
        m = m.max(err[i].abs() / sc);
    }
    m
}

/// Cubic Hermite interpolant on `[t0, t0 + h]`.
fn hermite<const N: usize>(y0: &[f64; N], f0: &[f64; N], y1: &[f64; N], f1: &[f64; N], h: f64, theta: f64) -> [f64; N] {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
    out
}

fn initial_step<const N: usize, S: OdeSystem<N>>(sys: &S, t0: f64, y0: &[f64; N], f0: &[f64; N], tol: f64, span: f64) -> f64 {
    let sc: Vec<f64> = y0.iter().map(|v| tol * (1.0 + v.abs())).collect();
    let d0 = y0.iter().zip(&sc).map(|(v, s)| (v / s).abs()).fold(0.0, f64::max);
    let d1 = f0.iter().zip(&sc).map(|(v, s)| (v / s).abs()).fold(0.0, f64::max);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span.abs());
    let dir = span.signum();
    let y1 = combine(y0, dir * h0, &[(1.0, f0)]);
    let f1 = sys.rhs(t0 + dir * h0, &y1);
    let d2 = f1
        .iter()
        .zip(f0)
        .zip(&sc)
        .map(|((a, b), s)| ((a - b) / s).abs())
        .fold(0.0, f64::max)
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span.abs())
}

/// Integrate from `t0` to `opts.t_end` (either direction), stopping at the first event.
pub fn solve<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    opts: &OdeOptions,
    events: &[LinearEvent<N>],
) -> Result<OdeSolution<N>, OdeFailure<N>> {
    let span = opts.t_end - t0;
    let mut sol = OdeSolution { times: vec![t0], states: vec![y0], events: Vec::new(), stats: OdeStats::default() };
    if span == 0.0 {
        sol.events.push((t0, EventKind::MaxTime));
        return Ok(sol);
    }
    let dir = span.signum();
    let tol = opts.tol;

    let mut t = t0;
    let mut y = y0;
    let mut f = sys.rhs(t, &y);
    sol.stats.rhs_evals += 1;
    let mut h = initial_step(sys, t0, &y0, &f, tol, span);
    sol.stats.rhs_evals += 1;
    let mut err_prev: f64 = 1e-4;
    let mut rejected_last = false;
    let mut out_idx = 0;
    let outputs = &opts.output_times;
    while out_idx < outputs.len() && dir * (outputs[out_idx] - t0) <= 0.0 {
        out_idx += 1;
    }

    loop {
        if sol.stats.accepted as usize >= opts.max_steps {
            return Err(OdeFailure { t, reason: "maximum number of steps exceeded".into(), partial: sol });
        }
        // clip to the next stopping time
        let mut target = opts.t_end;
        if out_idx < outputs.len() && dir * (outputs[out_idx] - target) < 0.0 {
            target = outputs[out_idx];
        }
        let mut h_try = h.min((target - t).abs());
        let mut hits_target = h_try >= (target - t).abs();
        for ev in events {
            if let Some(margin) = ev.guard_margin {
                let rate = dir * ev.rate(&f);
                let dist = ev.value(&y) + margin;
                if rate < 0.0 && dist > 0.0 {
                    let cap = 0.5 * dist / (-rate);
                    if cap < h_try {
                        h_try = cap;
                        hits_target = false;
                    }
                }
            }
        }
        if h_try < 1e-15 * t.abs().max(1e-300) || !h_try.is_finite() || h_try <= f64::MIN_POSITIVE {
            return Err(OdeFailure { t, reason: format!("step size underflow (h = {h_try:e})"), partial: sol });
        }

        let hs = dir * h_try;
        let step = dp_step(sys, t, &y, &f, hs);
        sol.stats.rhs_evals += 6;
        let err = error_norm(tol, &y, &step.y, &step.err);
        if !err.is_finite() {
            sol.stats.rejected += 1;
            h = h_try * FAC_MIN;
            rejected_last = true;
            continue;
        }
        if err > 1.0 {
            sol.stats.rejected += 1;
            h = h_try * (SAFETY * err.powf(-ALPHA)).max(FAC_MIN);
            rejected_last = true;
            continue;
        }

        // accepted; look for events in (t, t + hs]
        let mut first: Option<f64> = None;
        let mut crossings: Vec<(f64, EventKind)> = Vec::new();
        for ev in events {
            let g0 = ev.value(&y);
            let g1 = ev.value(&step.y);
            if g0 == 0.0 || (g0 > 0.0) == (g1 > 0.0) && g1 != 0.0 {
                continue;
            }
            let tau = locate(|theta| ev.value(&hermite(&y, &f, &step.y, &step.f, hs, theta)), g0, h_try);
            crossings.push((tau, ev.kind));
            first = Some(first.map_or(tau, |m: f64| m.min(tau)));
        }
        if let Some(tau) = first {
            let (y_ev, n_ev) = if tau >= h_try {
                (step.y, 0)
            } else {
                (dp_step(sys, t, &y, &f, dir * tau).y, 6)
            };
            sol.stats.rhs_evals += n_ev;
            sol.stats.accepted += 1;
            let t_ev = t + dir * tau;
            sol.times.push(t_ev);
            sol.states.push(y_ev);
            for (tc, kind) in crossings {
                if tc - tau <= EVENT_TIME_TOL {
                    sol.events.push((t_ev, kind));
                }
            }
            return Ok(sol);
        }

        sol.stats.accepted += 1;
        t = if hits_target { target } else { t + hs };
        y = step.y;
        f = step.f;
        let at_output = hits_target && out_idx < outputs.len() && target == outputs[out_idx];
        if at_output {
            out_idx += 1;
        }
        if opts.record_steps || at_output || (hits_target && target == opts.t_end) {
            sol.times.push(t);
            sol.states.push(y);
        }
        if hits_target && target == opts.t_end {
            sol.events.push((t, EventKind::MaxTime));
            return Ok(sol);
        }

        let mut fac = SAFETY * err.max(1e-12).powf(-ALPHA) * err_prev.powf(BETA);
        fac = fac.clamp(FAC_MIN, FAC_MAX);
        if rejected_last {
            fac = fac.min(1.0);
        }
        err_prev = err.max(1e-4);
        rejected_last = false;
        h = h_try * fac;
    }
}

/// Bisection for the sign change of `g(theta)`, `theta in [0, 1]`, returning the
/// elapsed time `theta h`. Runs to float resolution in `theta`, which is always
/// finer than [`EVENT_TIME_TOL`] in time.
fn locate(g: impl Fn(f64) -> f64, g0: f64, h: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let pos0 = g0 > 0.0;
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid * h;
        }
        if (gm > 0.0) == pos0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi * h
}
