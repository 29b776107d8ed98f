//! Pointwise residuals of the equation along peakon-ansatz states, and the two
//! solution branches issuing from a collision profile.
//!
//! The nonlocal form is evaluated on a uniform grid. The bracketed nonlinearities
//! jump, and have kinks, wherever `u_x` jumps. At each crest `q` the jump `J` and the
//! slope jump `K` are removed with `J sigma(x - q) + K tau(x - q)`, where
//! `sigma(y) = (pi - [y]_p) / 2pi` and `tau' = sigma` are mean-zero and have
//! closed-form images under `D^{-2} d_x` and `D^{-2}`; only the `C^1` remainder
//! goes through the FFT.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::closed_form::CaseProfile;
use crate::dynamics::{integrate, integrate_with_outputs, rhs_full, EventKind, FullRhs, COLLISION_SEPARATION};
use crate::error::{Error, Result};
use crate::geometry::{circular_distance, kernel, kernel_prime, wrap_unchecked, AbParams, TWO_PI};
use crate::peakon::{peakon_speed, CollisionProfile, PeakonSum, TwoPeakonState};
use crate::sobolev::{hs_norm_sq, hs_norm_sq_adaptive, SobolevSeries, DEFAULT_TRUNCATION};

/// Sample points closer than this to a crest are excluded.
pub const PEAK_EXCLUSION: f64 = 0.1;
/// Samples sit on this coarse grid, which is a subgrid of every admissible grid.
pub const SAMPLE_GRID: usize = 256;
/// Grid sequence used for refinement checks.
pub const REFINEMENT_GRIDS: [usize; 5] = [512, 1024, 2048, 4096, 8192];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub grid_size: usize,
    pub sample_points: Vec<f64>,
    pub excluded_points: Vec<f64>,
    pub max_abs_residual: f64,
    pub per_term_magnitudes: BTreeMap<String, f64>,
}

impl ResidualReport {
    /// Largest single-term magnitude over the samples.
    pub fn scale(&self) -> f64 {
        self.per_term_magnitudes.values().copied().fold(0.0, f64::max)
    }

    pub fn relative(&self) -> f64 {
        let s = self.scale();
        if s == 0.0 {
            self.max_abs_residual
        } else {
            self.max_abs_residual / s
        }
    }
}

/// Whether the residual drops by at least `factor` at every step of `reports`.
pub fn refines_by(reports: &[ResidualReport], factor: f64) -> bool {
    reports.windows(2).all(|w| w[1].max_abs_residual * factor <= w[0].max_abs_residual)
}

#[derive(Debug, Clone, Copy)]
struct Crest {
    p: f64,
    q: f64,
    dp: f64,
    dq: f64,
}

fn crests(state: &TwoPeakonState, rhs: &FullRhs) -> Vec<Crest> {
    [
        Crest { p: state.p1(), q: state.q1(), dp: rhs.dp1, dq: rhs.dq1 },
        Crest { p: state.p2(), q: state.q2(), dp: rhs.dp2, dq: rhs.dq2 },
    ]
    .to_vec()
}

/// Crests carrying a corner of `u`.
fn corners(cs: &[Crest]) -> Result<Vec<Crest>> {
    let live: Vec<Crest> = cs.iter().copied().filter(|c| c.p != 0.0).collect();
    if live.len() == 2 && circular_distance(live[0].q, live[1].q) < COLLISION_SEPARATION {
        return Err(Error::Precondition("state is at collision".into()));
    }
    Ok(live)
}

#[derive(Debug, Clone, Copy)]
struct Jump {
    q: f64,
    flux: f64,
    source: f64,
    flux_slope: f64,
    source_slope: f64,
}

#[derive(Debug, Clone, Copy)]
struct Ansatz {
    u: f64,
    ux: f64,
    ut: f64,
}

fn ansatz(cs: &[Crest], x: f64) -> Ansatz {
    let mut f = Ansatz { u: 0.0, ux: 0.0, ut: 0.0 };
    for c in cs {
        let e = kernel(x - c.q);
        let d = kernel_prime(x - c.q);
        f.u += c.p * e;
        f.ux += c.p * d;
        f.ut += c.dp * e - c.p * c.dq * d;
    }
    f
}

fn flux(params: &AbParams, u: f64, ux: f64) -> f64 {
    let (a, b) = (params.a(), params.b());
    b / 3.0 * u * u * u + (6.0 - 6.0 * a - b) / 2.0 * u * ux * ux
}

fn source(params: &AbParams, ux: f64) -> f64 {
    let (a, b) = (params.a(), params.b());
    (2.0 * a + b - 2.0) / 2.0 * ux * ux * ux
}

fn sawtooth(y: f64) -> f64 {
    (PI - wrap_unchecked(y)) / TWO_PI
}

/// Mean-zero periodic quadratic with `tau' = sigma` off the origin.
fn parabola(y: f64) -> f64 {
    let w = wrap_unchecked(y);
    (PI * w - 0.5 * w * w) / TWO_PI - PI / 6.0
}

/// `D^{-2} d_x sigma`.
fn sawtooth_flux_image(y: f64) -> f64 {
    kernel(y) / (2.0 * PI.sinh()) - 1.0 / TWO_PI
}

/// `D^{-2} sigma`.
fn sawtooth_source_image(y: f64) -> f64 {
    sawtooth(y) + kernel_prime(y) / (2.0 * PI.sinh())
}

/// `F'` of the flux for one-sided `u_x`, with `u_xx = u`.
fn flux_slope(params: &AbParams, u: f64, ux: f64) -> f64 {
    let (a, b) = (params.a(), params.b());
    b * u * u * ux + (6.0 - 6.0 * a - b) / 2.0 * (ux * ux * ux + 2.0 * u * u * ux)
}

fn source_slope(params: &AbParams, u: f64, ux: f64) -> f64 {
    let (a, b) = (params.a(), params.b());
    3.0 * (2.0 * a + b - 2.0) / 2.0 * ux * ux * u
}

fn check_grid(m: usize) -> Result<()> {
    if m < SAMPLE_GRID || !m.is_power_of_two() {
        return Err(Error::InvalidParams(format!("grid size {m} must be a power of two >= {SAMPLE_GRID}")));
    }
    Ok(())
}

/// Applies the multiplier `symbol(n)` to a real periodic grid field.
///
/// At the Nyquist index the symbol is evaluated at `n = M/2` and only its real part
/// is kept, so real fields stay real.
fn apply_multiplier(field: &[f64], symbol: impl Fn(f64) -> Complex64) -> Vec<f64> {
    let m = field.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(m).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let n = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
        let mut sym = symbol(n);
        if k == m / 2 {
            sym = Complex64::new(sym.re, 0.0);
        }
        *c *= sym;
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    buf.iter().map(|c| c.re / m as f64).collect()
}

/// `D^{-2} d_x f` on the grid.
pub fn inverse_helmholtz_derivative(field: &[f64]) -> Result<Vec<f64>> {
    check_grid(field.len())?;
    Ok(apply_multiplier(field, |n| Complex64::new(0.0, n / (1.0 + n * n))))
}

/// `D^{-2} f` on the grid.
pub fn inverse_helmholtz(field: &[f64]) -> Result<Vec<f64>> {
    check_grid(field.len())?;
    Ok(apply_multiplier(field, |n| Complex64::new(1.0 / (1.0 + n * n), 0.0)))
}

/// `(1 - d_x^2) f` on the grid.
pub fn helmholtz(field: &[f64]) -> Result<Vec<f64>> {
    check_grid(field.len())?;
    Ok(apply_multiplier(field, |n| Complex64::new(1.0 + n * n, 0.0)))
}

/// Off-peak points of the sample grid, and the excluded ones, as `(index, x)`.
fn sample_nodes(state: &TwoPeakonState) -> (Vec<(usize, f64)>, Vec<(usize, f64)>) {
    let live: Vec<f64> = state.peakons().iter().filter(|pk| pk.p != 0.0).map(|pk| pk.q()).collect();
    (0..SAMPLE_GRID)
        .map(|k| (k, TWO_PI * k as f64 / SAMPLE_GRID as f64))
        .partition(|&(_, x)| live.iter().all(|&q| circular_distance(x, q) >= PEAK_EXCLUSION))
}

/// Off-peak points of the sample grid, and the excluded ones.
pub fn sample_points(state: &TwoPeakonState) -> (Vec<f64>, Vec<f64>) {
    let (keep, drop) = sample_nodes(state);
    (keep.into_iter().map(|(_, x)| x).collect(), drop.into_iter().map(|(_, x)| x).collect())
}

fn bump(map: &mut BTreeMap<String, f64>, key: &str, v: f64) {
    let e = map.entry(key.to_string()).or_insert(0.0);
    *e = e.max(v.abs());
}

/// Residual of the nonlocal form at the off-peak sample points, with `u_t` taken
/// from the ODE right-hand side `rhs`.
pub fn nonlocal_residual(params: &AbParams, state: &TwoPeakonState, rhs: &FullRhs, grid_size: usize) -> Result<ResidualReport> {
    check_grid(grid_size)?;
    let all = crests(state, rhs);
    let live = corners(&all)?;
    let m = grid_size;
    let h = TWO_PI / m as f64;

    // value and slope jumps of the brackets at each corner
    let sinh_pi = PI.sinh();
    let jumps: Vec<Jump> = live
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let others: Vec<Crest> = live.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, o)| *o).collect();
            let base = ansatz(&others, c.q);
            let u = base.u + c.p * PI.cosh();
            let right = base.ux - c.p * sinh_pi;
            let left = base.ux + c.p * sinh_pi;
            Jump {
                q: c.q,
                flux: flux(params, u, right) - flux(params, u, left),
                source: source(params, right) - source(params, left),
                flux_slope: flux_slope(params, u, right) - flux_slope(params, u, left),
                source_slope: source_slope(params, u, right) - source_slope(params, u, left),
            }
        })
        .collect();

    let mut f1 = Vec::with_capacity(m);
    let mut f2 = Vec::with_capacity(m);
    for j in 0..m {
        let x = j as f64 * h;
        let fld = ansatz(&all, x);
        let mut a = flux(params, fld.u, fld.ux);
        let mut b = source(params, fld.ux);
        for jp in &jumps {
            let s = sawtooth(x - jp.q);
            let t = parabola(x - jp.q);
            a -= jp.flux * s + jp.flux_slope * t;
            b -= jp.source * s + jp.source_slope * t;
        }
        f1.push(a);
        f2.push(b);
    }
    let g1 = apply_multiplier(&f1, |n| Complex64::new(0.0, n / (1.0 + n * n)));
    let g2 = apply_multiplier(&f2, |n| Complex64::new(1.0 / (1.0 + n * n), 0.0));

    let (nodes, dropped) = sample_nodes(state);
    let stride = m / SAMPLE_GRID;
    let a = params.a();
    let mut terms = BTreeMap::new();
    let mut worst: f64 = 0.0;
    for &(k, x) in &nodes {
        let j = k * stride;
        let fld = ansatz(&all, x);
        let mut nl_flux = g1[j];
        let mut nl_source = g2[j];
        for jp in &jumps {
            let y = x - jp.q;
            let (fs, ss) = (sawtooth_flux_image(y), sawtooth_source_image(y));
            // D^{-2} d_x tau = D^{-2} sigma, D^{-2} tau = tau + D^{-2} d_x sigma
            // D^{-2} d_x tau = D^{-2} sigma, D^{-2} tau = tau + D^{-2} d_x sigma
            nl_flux += jp.flux * fs + jp.flux_slope * ss;
            nl_source += jp.source * ss + jp.source_slope * (parabola(y) + fs);
        }
        let cubic = fld.u * fld.u * fld.ux;
        let slope = a * fld.ux * fld.ux * fld.ux;
        let r = fld.ut + cubic - slope + nl_flux + nl_source;
        worst = worst.max(r.abs());
        bump(&mut terms, "u_t", fld.ut);
        bump(&mut terms, "u^2 u_x", cubic);
        bump(&mut terms, "a u_x^3", slope);
        bump(&mut terms, "D^-2 d_x flux", nl_flux);
        bump(&mut terms, "D^-2 source", nl_source);
    }
    Ok(ResidualReport {
        grid_size: m,
        sample_points: nodes.into_iter().map(|(_, x)| x).collect(),
        excluded_points: dropped.into_iter().map(|(_, x)| x).collect(),
        max_abs_residual: worst,
        per_term_magnitudes: terms,
    })
}

/// Nonlocal residual on every grid of [`REFINEMENT_GRIDS`].
pub fn refinement_reports(params: &AbParams, state: &TwoPeakonState, rhs: &FullRhs) -> Result<Vec<ResidualReport>> {
    REFINEMENT_GRIDS.iter().map(|&m| nonlocal_residual(params, state, rhs, m)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalResidual {
    pub value: f64,
    /// Largest magnitude among the individual terms.
    pub scale: f64,
}

impl LocalResidual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.value.abs()
        } else {
            self.value.abs() / self.scale
        }
    }
}

/// Residual of the local third-order form at an off-peak `x`, using
/// `E'' = E` and `E''' = E'` away from the crests.
pub fn local_residual(params: &AbParams, state: &TwoPeakonState, rhs: &FullRhs, x: f64) -> Result<LocalResidual> {
    let all = crests(state, rhs);
    if all.iter().any(|c| c.p != 0.0 && circular_distance(x, c.q) < 1e-12) {
        return Err(Error::Domain(format!("x = {x} is on a crest")));
    }
    let (a, b) = (params.a(), params.b());
    let (mut u, mut ux, mut uxx, mut uxxx, mut ut, mut utxx) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for c in &all {
        let e = kernel(x - c.q);
        let d = kernel_prime(x - c.q);
        u += c.p * e;
        ux += c.p * d;
        uxx += c.p * e;
        uxxx += c.p * d;
        ut += c.dp * e - c.p * c.dq * d;
        utxx += c.dp * e - c.p * c.dq * d;
    }
    let terms = [
        ut,
        -utxx,
        (b + 1.0) * u * u * ux,
        -3.0 * a * ux * ux * ux,
        -(6.0 * a + b) * u * ux * uxx,
        6.0 * a * ux * uxx * uxx,
        -u * u * uxxx,
        3.0 * a * ux * ux * uxxx,
    ];
    Ok(LocalResidual { value: terms.iter().sum(), scale: terms.iter().map(|t| t.abs()).fold(0.0, f64::max) })
}

/// Largest relative local residual over the off-peak sample points.
pub fn max_local_residual(params: &AbParams, state: &TwoPeakonState, rhs: &FullRhs) -> Result<f64> {
    let (samples, _) = sample_points(state);
    let mut worst: f64 = 0.0;
    for x in samples {
        worst = worst.max(local_residual(params, state, rhs, x)?.relative());
    }
    Ok(worst)
}

/// The image of `state` under `x -> 2 center - x`, stamped with time `t`.
pub fn reflect(state: &TwoPeakonState, center: f64, t: f64) -> TwoPeakonState {
    TwoPeakonState::new(t, state.p1(), 2.0 * center - state.q1(), state.p2(), 2.0 * center - state.q2())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchCheck {
    pub state: TwoPeakonState,
    pub refinement: Vec<ResidualReport>,
    pub max_local_relative: f64,
}

impl BranchCheck {
    fn build(params: &AbParams, state: TwoPeakonState) -> Result<Self> {
        let rhs = rhs_full(params, &state);
        Ok(Self {
            refinement: refinement_reports(params, &state, &rhs)?,
            max_local_relative: max_local_residual(params, &state, &rhs)?,
            state,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonuniquenessReport {
    pub event_time: f64,
    pub profile: CollisionProfile,
    /// Speed of the single-peakon branch.
    pub speed: f64,
    pub t_probe: f64,
    pub s: f64,
    /// `p* = 0`: the single-peakon branch is the zero solution.
    pub degenerate: bool,
    pub initial_distance: SobolevSeries,
    pub probe_distance: SobolevSeries,
    pub single_branch: BranchCheck,
    pub reflected_branch: BranchCheck,
}

impl NonuniquenessReport {
    /// Certified separation of the branches: lower bound above `factor` times the
    /// tail uncertainty.
    pub fn separated(&self, factor: f64) -> bool {
        self.probe_distance.certified_lower() > factor * self.probe_distance.tail_uncertainty()
    }
}

/// Two solutions with the same datum `C` at `t = 0`: the single peakon of amplitude
/// `p*` travelling at its own speed, and the colliding pair run backward in time and
/// reflected through `q*`, `v(x, t) = u(2q* - x, T - t)`.
pub fn nonuniqueness_demo(params: &AbParams, case: &CaseProfile, t_probe: f64, s: f64, tol: f64) -> Result<NonuniquenessReport> {
    if !(t_probe > 0.0) {
        return Err(Error::InvalidParams(format!("t_probe = {t_probe} must be positive")));
    }
    let t0 = case.initial.t;
    let horizon = t0 + 4.0 * case.tc_bound.max(1e-6);
    let traj = integrate(params, &case.initial, horizon, tol)?;
    if !traj.has_event(EventKind::Collision) {
        return Err(Error::Precondition("case trajectory does not reach a collision".into()));
    }
    let event_time = traj.event_time().expect("collision recorded");
    let profile = traj.collision_profile().expect("collision recorded");
    let duration = event_time - t0;
    if t_probe > duration {
        return Err(Error::Precondition(format!("t_probe = {t_probe} exceeds the collision time {duration}")));
    }
    let (p_star, q_star) = (profile.p_star, profile.q_star());
    let speed = peakon_speed(params, p_star);
    let datum = PeakonSum::from_profile(&profile);

    let at_collision = reflect(traj.last(), q_star, 0.0);
    let initial_distance = hs_norm_sq(&datum.minus(&PeakonSum::from_state(&at_collision)), s, DEFAULT_TRUNCATION)?;

    let back = event_time - t_probe;
    let source_state = if back <= t0 {
        *traj.first()
    } else {
        let run = integrate_with_outputs(params, &case.initial, horizon, tol, &[back], false)?;
        *run.samples.iter().find(|st| st.t == back).ok_or_else(|| Error::Numerical(format!("no output at t = {back}")))?
    };
    let reflected = reflect(&source_state, q_star, t_probe);
    let single = TwoPeakonState::single(t_probe, p_star, q_star + speed * t_probe);
    let diff = PeakonSum::from_state(&single).minus(&PeakonSum::from_state(&reflected));
    let probe_distance = hs_norm_sq_adaptive(&diff, s, diff.amplitude_bound())?;

    Ok(NonuniquenessReport {
        event_time,
        profile,
        speed,
        t_probe,
        s,
        degenerate: p_star == 0.0,
        initial_distance,
        probe_distance,
        single_branch: BranchCheck::build(params, single)?,
        reflected_branch: BranchCheck::build(params, reflected)?,
    })
}
