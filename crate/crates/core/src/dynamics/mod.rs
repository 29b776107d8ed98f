//! Two-peakon dynamics.
//!
//! The ansatz `u = p1 E(x - q1) + p2 E(x - q2)` solves the equation on the
//! circle exactly when
//!
//! ```text
//! q1' = p1^2 [1 + (1-a) S] + 2 p1 p2 cosh(pi) E(q1-q2) + p2^2 [1 + (1-3a) E'(q1-q2)^2]
//! q2' = p2^2 [1 + (1-a) S] + 2 p1 p2 cosh(pi) E(q2-q1) + p1^2 [1 + (1-3a) E'(q2-q1)^2]
//! p1' = (2-b) p1 p2 E'(q1-q2) [p1 cosh(pi) + p2 E(q1-q2)]
//! p2' = (2-b) p1 p2 E'(q2-q1) [p2 cosh(pi) + p1 E(q2-q1)]
//! ```
//!
//! with `S = sinh^2(pi)`. In the variables `q = q2 - q1`, `h = p2 - p1`,
//! `w = p1 + p2`, `z = p1 p2` the system closes on itself, and `q`, `p = p2^2 - p1^2`
//! obey `q' = p L_a(q)`.
//!
//! Integration runs in unwrapped positions; the right-hand side is smooth as long
//! as the peakons stay apart, so collisions are approached with a guarded event
//! and the run stops at separation [`COLLISION_SEPARATION`].

pub mod ode;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{kernel, kernel_prime, l_a, sinh_pi_sq, wrap_unchecked, AbParams, TWO_PI};
use crate::peakon::{CollisionProfile, TwoPeakonState};
use ode::{LinearEvent, OdeOptions, OdeSolution};

/// Separation at which a collision is declared.
pub const COLLISION_SEPARATION: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Collision,
    MomentumZero1,
    MomentumZero2,
    MaxTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub q: f64,
    pub h: f64,
    pub w: f64,
    pub z: f64,
}

impl ReducedState {
    pub fn from_state(s: &TwoPeakonState) -> Self {
        Self { q: s.separation(), h: s.p2() - s.p1(), w: s.p1() + s.p2(), z: s.p1() * s.p2() }
    }

    /// `p = p2^2 - p1^2 = h w`.
    pub fn p(&self) -> f64 {
        self.h * self.w
    }

    pub fn p1(&self) -> f64 {
        0.5 * (self.w - self.h)
    }

    pub fn p2(&self) -> f64 {
        0.5 * (self.w + self.h)
    }

    /// Relative defect of `z = (w^2 - h^2) / 4`.
    pub fn consistency_defect(&self) -> f64 {
        let zz = 0.25 * (self.w * self.w - self.h * self.h);
        (self.z - zz).abs() / self.z.abs().max(zz.abs()).max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullRhs {
    pub dq1: f64,
    pub dq2: f64,
    pub dp1: f64,
    pub dp2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedRhs {
    pub dq: f64,
    pub dh: f64,
    pub dw: f64,
    pub dz: f64,
}

fn full_rhs_raw(params: &AbParams, q1: f64, q2: f64, p1: f64, p2: f64) -> FullRhs {
    let a = params.a();
    let b = params.b();
    let s = sinh_pi_sq();
    let cp = PI.cosh();
    let e12 = kernel(q1 - q2);
    let e21 = kernel(q2 - q1);
    let d12 = kernel_prime(q1 - q2);
    let d21 = kernel_prime(q2 - q1);
    let self_speed = 1.0 + (1.0 - a) * s;
    FullRhs {
        dq1: p1 * p1 * self_speed + 2.0 * p1 * p2 * cp * e12 + p2 * p2 * (1.0 + (1.0 - 3.0 * a) * d12 * d12),
        dq2: p2 * p2 * self_speed + 2.0 * p1 * p2 * cp * e21 + p1 * p1 * (1.0 + (1.0 - 3.0 * a) * d21 * d21),
        dp1: (2.0 - b) * p1 * p2 * d12 * (p1 * cp + p2 * e12),
        dp2: (2.0 - b) * p1 * p2 * d21 * (p2 * cp + p1 * e21),
    }
}

pub fn rhs_full(params: &AbParams, state: &TwoPeakonState) -> FullRhs {
    full_rhs_raw(params, state.q1(), state.q2(), state.p1(), state.p2())
}

pub fn rhs_reduced(params: &AbParams, st: &ReducedState) -> ReducedRhs {
    let b = params.b();
    let cp = PI.cosh();
    let e = kernel(st.q);
    let d = kernel_prime(st.q);
    ReducedRhs {
        dq: st.h * st.w * l_a(params, st.q),
        dh: (2.0 - b) * st.w * st.z * d * (cp + e),
        dw: (2.0 - b) * st.h * st.z * d * (cp - e),
        dz: -(2.0 - b) * st.h * st.w * st.z * e * d,
    }
}

/// `(q', p')` with `q = q2 - q1`, `p = p2^2 - p1^2`.
pub fn rhs_qp(params: &AbParams, state: &TwoPeakonState) -> (f64, f64) {
    let (p1, p2) = (state.p1(), state.p2());
    let q = state.q2() - state.q1();
    let dq = (p2 * p2 - p1 * p1) * l_a(params, q);
    let dp = 2.0 * (2.0 - params.b()) * p1 * p2 * kernel_prime(q) * qp_bracket(p1, p2, q);
    (dq, dp)
}

/// `(p1^2 + p2^2) cosh(pi) + 2 p1 p2 cosh([q]_p - pi)`, never negative.
pub fn qp_bracket(p1: f64, p2: f64, q: f64) -> f64 {
    (p1 * p1 + p2 * p2) * PI.cosh() + 2.0 * p1 * p2 * kernel(q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: AbParams,
    pub samples: Vec<TwoPeakonState>,
    pub events: Vec<Event>,
    pub accepted_tolerance: f64,
}

impl Trajectory {
    pub fn first(&self) -> &TwoPeakonState {
        &self.samples[0]
    }

    pub fn last(&self) -> &TwoPeakonState {
        self.samples.last().expect("trajectory has at least one sample")
    }

    /// Time of the terminal event, unless the run simply hit its end time.
    pub fn event_time(&self) -> Option<f64> {
        self.events.iter().find(|e| e.kind != EventKind::MaxTime).map(|e| e.time)
    }

    pub fn has_event(&self, kind: EventKind) -> bool {
        self.events.iter().any(|e| e.kind == kind)
    }

    /// Limit profile at the terminal event.
    ///
    /// At a collision the amplitudes merge, `p* = p1 + p2` at `q* = q1`; when one
    /// momentum vanishes the surviving peakon is the profile. `None` without an event.
    pub fn collision_profile(&self) -> Option<CollisionProfile> {
        let end = self.last();
        if self.has_event(EventKind::Collision) {
            return Some(CollisionProfile::new(end.p1() + end.p2(), end.q1()));
        }
        let z1 = self.has_event(EventKind::MomentumZero1);
        let z2 = self.has_event(EventKind::MomentumZero2);
        match (z1, z2) {
            (true, true) => Some(CollisionProfile::new(0.0, end.q1())),
            (true, false) => Some(CollisionProfile::new(end.p2(), end.q2())),
            (false, true) => Some(CollisionProfile::new(end.p1(), end.q1())),
            (false, false) => None,
        }
    }
}

/// Integrate the full system from `initial` to the absolute time `t_max`.
///
/// Runs backward when `t_max < initial.t`. Collision detection is active only when
/// both momenta are nonzero, and momentum-zero detection only for initially nonzero
/// momenta, so single-peakon data run to `t_max`.
pub fn integrate(params: &AbParams, initial: &TwoPeakonState, t_max: f64, tol: f64) -> Result<Trajectory> {
    integrate_with_outputs(params, initial, t_max, tol, &[], true)
}

/// As [`integrate`], optionally restricting samples to `outputs` (plus the endpoints).
pub fn integrate_with_outputs(
    params: &AbParams,
    initial: &TwoPeakonState,
    t_max: f64,
    tol: f64,
    outputs: &[f64],
    record_steps: bool,
) -> Result<Trajectory> {
    if !(tol > 0.0) || !t_max.is_finite() || !initial.t.is_finite() {
        return Err(Error::InvalidParams(format!("bad integration request: tol = {tol}, t_max = {t_max}")));
    }
    let p = *params;
    let sys = move |_t: f64, y: &[f64; 4]| {
        let r = full_rhs_raw(&p, y[0], y[1], y[2], y[3]);
        [r.dq1, r.dq2, r.dp1, r.dp2]
    };
    let (q1, q2) = (initial.q1(), initial.q2());
    // unwrapped q2 with q2 - q1 in (0, 2pi)
    let sep = wrap_unchecked(q2 - q1);
    let y0 = [q1, q1 + sep, initial.p1(), initial.p2()];

    let mut events = Vec::new();
    if initial.p1() != 0.0 && initial.p2() != 0.0 {
        events.extend(separation_events([-1.0, 1.0, 0.0, 0.0], sep));
    }
    if initial.p1() != 0.0 {
        events.push(LinearEvent { kind: EventKind::MomentumZero1, coeffs: [0.0, 0.0, 1.0, 0.0], offset: 0.0, guard_margin: None });
    }
    if initial.p2() != 0.0 {
        events.push(LinearEvent { kind: EventKind::MomentumZero2, coeffs: [0.0, 0.0, 0.0, 1.0], offset: 0.0, guard_margin: None });
    }

    let mut opts = OdeOptions::new(tol, t_max);
    opts.output_times = outputs.to_vec();
    opts.record_steps = record_steps;
    let to_traj = |sol: &OdeSolution<4>| Trajectory {
        params: *params,
        samples: sol
            .times
            .iter()
            .zip(&sol.states)
            .map(|(&t, y)| TwoPeakonState::new(t, y[2], y[0], y[3], y[1]))
            .collect(),
        events: sol.events.iter().map(|&(time, kind)| Event { time, kind }).collect(),
        accepted_tolerance: tol,
    };
    match ode::solve(&sys, initial.t, y0, &opts, &events) {
        Ok(sol) => Ok(to_traj(&sol)),
        Err(fail) => Err(Error::Integration { t: fail.t, reason: fail.reason, partial: Box::new(to_traj(&fail.partial)) }),
    }
}

/// The two guarded events bounding `coeffs . y` inside `(2pi k, 2pi (k+1))`.
fn separation_events<const N: usize>(coeffs: [f64; N], start: f64) -> [LinearEvent<N>; 2] {
    let k = (start / TWO_PI).floor();
    let lower = 2.0 * PI * k;
    let neg: [f64; N] = std::array::from_fn(|i| -coeffs[i]);
    [
        LinearEvent { kind: EventKind::Collision, coeffs, offset: lower + COLLISION_SEPARATION, guard_margin: Some(COLLISION_SEPARATION) },
        LinearEvent {
            kind: EventKind::Collision,
            coeffs: neg,
            offset: -(lower + TWO_PI) + COLLISION_SEPARATION,
            guard_margin: Some(COLLISION_SEPARATION),
        },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ReducedState>,
    pub events: Vec<Event>,
}

/// Integrate the reduced `(q, h, w, z)` system with the same event set.
pub fn integrate_reduced(
    params: &AbParams,
    t0: f64,
    initial: &ReducedState,
    t_max: f64,
    tol: f64,
    outputs: &[f64],
) -> Result<ReducedTrajectory> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParams(format!("tol = {tol} must be positive")));
    }
    let p = *params;
    let sys = move |_t: f64, y: &[f64; 4]| {
        let r = rhs_reduced(&p, &ReducedState { q: y[0], h: y[1], w: y[2], z: y[3] });
        [r.dq, r.dh, r.dw, r.dz]
    };
    let y0 = [initial.q, initial.h, initial.w, initial.z];
    let mut events: Vec<LinearEvent<4>> = separation_events([1.0, 0.0, 0.0, 0.0], initial.q).to_vec();
    if initial.p1() != 0.0 {
        events.push(LinearEvent { kind: EventKind::MomentumZero1, coeffs: [0.0, -0.5, 0.5, 0.0], offset: 0.0, guard_margin: None });
    }
    if initial.p2() != 0.0 {
        events.push(LinearEvent { kind: EventKind::MomentumZero2, coeffs: [0.0, 0.5, 0.5, 0.0], offset: 0.0, guard_margin: None });
    }
    let mut opts = OdeOptions::new(tol, t_max);
    opts.output_times = outputs.to_vec();
    opts.record_steps = outputs.is_empty();
    let sol = ode::solve(&sys, t0, y0, &opts, &events).map_err(|f| {
        let partial = Trajectory { params: *params, samples: Vec::new(), events: Vec::new(), accepted_tolerance: tol };
        Error::Integration { t: f.t, reason: f.reason, partial: Box::new(partial) }
    })?;
    Ok(ReducedTrajectory {
        times: sol.times.clone(),
        states: sol.states.iter().map(|y| ReducedState { q: y[0], h: y[1], w: y[2], z: y[3] }).collect(),
        events: sol.events.iter().map(|&(time, kind)| Event { time, kind }).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::circular_distance;
    use crate::peakon::peakon_speed;
    use proptest::prelude::*;

    fn params(a: f64, b: f64) -> AbParams {
        AbParams::new(a, b).unwrap()
    }

    #[test]
    fn single_peakon_rhs() {
        let p = params(0.7, 3.0);
        let st = TwoPeakonState::new(0.0, 1.3, 0.4, 0.0, 2.0);
        let r = rhs_full(&p, &st);
        assert!((r.dq1 - peakon_speed(&p, 1.3)).abs() < 1e-12 * r.dq1);
        assert_eq!(r.dp1, 0.0);
        assert_eq!(r.dp2, 0.0);
    }

    #[test]
    fn index_exchange_symmetry() {
        let p = params(-0.4, 1.2);
        let st = TwoPeakonState::new(0.0, 1.1, 0.3, -0.7, 1.9);
        let sw = TwoPeakonState::new(0.0, -0.7, 1.9, 1.1, 0.3);
        let r = rhs_full(&p, &st);
        let s = rhs_full(&p, &sw);
        assert_eq!((r.dq1, r.dq2, r.dp1, r.dp2), (s.dq2, s.dq1, s.dp2, s.dp1));
    }

    #[test]
    fn b_equal_two_freezes_momenta() {
        let r = rhs_full(&params(0.9, 2.0), &TwoPeakonState::new(0.0, 1.0, 0.0, -2.0, 1.0));
        assert_eq!(r.dp1, 0.0);
        assert_eq!(r.dp2, 0.0);
    }

    #[test]
    fn reduced_vanishing_factors() {
        let p = params(1.0, 3.0);
        let r = rhs_reduced(&p, &ReducedState { q: 0.5, h: 0.0, w: 1.0, z: 0.25 });
        assert_eq!((r.dq, r.dw, r.dz), (0.0, 0.0, 0.0));
        assert!(r.dh != 0.0);
        let r = rhs_reduced(&p, &ReducedState { q: PI, h: 0.3, w: 1.0, z: 0.2 });
        assert_eq!((r.dh, r.dw, r.dz), (0.0, 0.0, 0.0));
    }

    #[test]
    fn qp_examples() {
        let p = params(0.5, 1.0);
        let (dq, _) = rhs_qp(&p, &TwoPeakonState::new(0.0, 0.8, 0.1, 0.8, 0.5));
        assert_eq!(dq, 0.0);
        let (dq, _) = rhs_qp(&p, &TwoPeakonState::new(0.0, 0.8, 0.1, -0.8, 0.5));
        assert_eq!(dq, 0.0);
        let (_, dp) = rhs_qp(&p, &TwoPeakonState::new(0.0, 0.8, 0.1, -0.3, 0.1 + PI));
        assert!(dp.abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn reduced_matches_full(a in -2.0f64..2.0, b in -1.0f64..5.0, p1 in -2.0f64..2.0, p2 in -2.0f64..2.0,
                                q1 in 0.0f64..std::f64::consts::TAU, q2 in 0.0f64..std::f64::consts::TAU) {
            prop_assume!(a.abs() > 1e-3 && circular_distance(q1, q2) > 1e-6);
            let prm = params(a, b);
            let st = TwoPeakonState::new(0.0, p1, q1, p2, q2);
            let f = rhs_full(&prm, &st);
            let r = rhs_reduced(&prm, &ReducedState::from_state(&st));
            let scale_q = f.dq1.abs().max(f.dq2.abs()).max(1.0);
            let scale_p = f.dp1.abs().max(f.dp2.abs()).max(1.0);
            prop_assert!((r.dq - (f.dq2 - f.dq1)).abs() <= 1e-12 * scale_q);
            prop_assert!((r.dh - (f.dp2 - f.dp1)).abs() <= 1e-12 * scale_p);
            prop_assert!((r.dw - (f.dp1 + f.dp2)).abs() <= 1e-12 * scale_p);
            let prod = f.dp1 * p2 + p1 * f.dp2;
            prop_assert!((r.dz - prod).abs() <= 1e-12 * scale_p * (p1.abs() + p2.abs()).max(1.0));
            let (dq, dp) = rhs_qp(&prm, &st);
            prop_assert!((dq - (f.dq2 - f.dq1)).abs() <= 1e-12 * scale_q);
            prop_assert!((dp - (2.0 * p2 * f.dp2 - 2.0 * p1 * f.dp1)).abs() <= 1e-12 * scale_p * (p1.abs() + p2.abs()).max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn bracket_positive(p1 in -5.0f64..5.0, p2 in -5.0f64..5.0, q in -10.0f64..10.0) {
            let br = qp_bracket(p1, p2, q);
            let lower = (p1 + p2).powi(2) * kernel(q);
            prop_assert!(br >= lower - 1e-12 * br.abs().max(1.0));
            prop_assert!(lower >= 0.0);
        }
    }

    #[test]
    fn reduced_state_consistency() {
        let st = TwoPeakonState::new(0.0, 1.5, 0.0, -1.0, 0.2);
        let r = ReducedState::from_state(&st);
        assert!(r.consistency_defect() < 1e-14);
        assert!((r.p() - (1.0 - 2.25)).abs() < 1e-15);
    }

    #[test]
    fn single_peakon_travels_at_speed() {
        let p = params(0.6, 1.0);
        let tol = 1e-10;
        let c = peakon_speed(&p, 1.2);
        let traj = integrate(&p, &TwoPeakonState::single(0.0, 1.2, 0.3), 1.0, tol).unwrap();
        let end = traj.last();
        assert_eq!(end.t, 1.0);
        assert_eq!(traj.events, vec![Event { time: 1.0, kind: EventKind::MaxTime }]);
        assert!(circular_distance(end.q1(), 0.3 + c) < 10.0 * tol * (1.0 + c));
        assert_eq!(end.p1(), 1.2);
    }

    #[test]
    fn time_reversal() {
        let p = params(1.0, 1.0);
        let tol = 1e-11;
        let init = TwoPeakonState::new(0.0, 1.5, 0.0, 1.0, 0.5);
        let fwd = integrate(&p, &init, 2e-4, tol).unwrap();
        assert_eq!(fwd.event_time(), None);
        let back = integrate(&p, fwd.last(), 0.0, tol).unwrap();
        let b = back.last();
        assert_eq!(b.t, 0.0);
        assert!((b.p1() - 1.5).abs() < 100.0 * tol);
        assert!((b.p2() - 1.0).abs() < 100.0 * tol);
        assert!(circular_distance(b.q1(), 0.0) < 100.0 * tol);
        assert!(circular_distance(b.q2(), 0.5) < 100.0 * tol);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let p = params(1.0, 1.0);
        assert!(integrate(&p, &TwoPeakonState::single(0.0, 1.0, 0.0), 1.0, 0.0).is_err());
    }
}
