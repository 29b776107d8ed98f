//! Closed-form integrals of the reduced system and the colliding case profiles.
//!
//! Along a trajectory with `q` starting at `mu`:
//!
//! ```text
//! z(q)   = z0 (L_a(q) / L_a(mu))^{(2-b) / (2(1-3a))}
//! g(q)   = z(q) (2-b) E'(q) / L_a(q)
//! h^2    = h0^2 + 2 G1(q),   G1(q) = int_mu^q (cosh(pi) + E(s)) g(s) ds
//! w^2    = w0^2 + 2 G2(q),   G2(q) = int_mu^q (cosh(pi) - E(s)) g(s) ds
//! ```
//!
//! At `a = 1/3`, `L_a` is constant and the power law degenerates to
//! `z = z0 exp(-(2-b)(E(q)^2 - E(mu)^2) / (2 L))`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{kernel, kernel_prime, l_a, min_abs_l, select_mu, AbParams};
use crate::peakon::TwoPeakonState;
use crate::quadrature;

/// Absolute tolerance for the `G1`, `G2` quadratures.
pub const G_QUAD_TOL: f64 = 1e-12;

fn is_one_third(a: f64) -> bool {
    (3.0 * a - 1.0) == 0.0
}

pub fn z_of_q(params: &AbParams, z0: f64, mu: f64, q: f64) -> Result<f64> {
    let a = params.a();
    let b = params.b();
    if b == 2.0 {
        return Ok(z0);
    }
    if is_one_third(a) {
        let l = l_a(params, q);
        let (eq, em) = (kernel(q), kernel(mu));
        return Ok(z0 * (-(2.0 - b) * (eq * eq - em * em) / (2.0 * l)).exp());
    }
    let lq = l_a(params, q);
    let lm = l_a(params, mu);
    if lq == 0.0 || lm == 0.0 || (lq > 0.0) != (lm > 0.0) {
        return Err(Error::Domain(format!("L_a changes sign between q = {q} and mu = {mu}")));
    }
    let expo = (2.0 - b) / (2.0 * (1.0 - 3.0 * a));
    Ok(z0 * (lq / lm).powf(expo))
}

pub fn g_of_q(params: &AbParams, z0: f64, mu: f64, q: f64) -> Result<f64> {
    let z = z_of_q(params, z0, mu, q)?;
    Ok(z * (2.0 - params.b()) * kernel_prime(q) / l_a(params, q))
}

fn g_integral(params: &AbParams, z0: f64, mu: f64, q: f64, sign: f64) -> Result<f64> {
    if q == mu || params.b() == 2.0 {
        return Ok(0.0);
    }
    // validate the interval once so the integrand cannot fail
    z_of_q(params, z0, mu, q)?;
    let lo = mu.min(q);
    let hi = mu.max(q);
    for i in 0..=16 {
        let s = lo + (hi - lo) * i as f64 / 16.0;
        z_of_q(params, z0, mu, s)?;
    }
    let cp = PI.cosh();
    let integrand = |s: f64| {
        let g = g_of_q(params, z0, mu, s).unwrap_or(f64::NAN);
        (cp + sign * kernel(s)) * g
    };
    Ok(quadrature::integrate(integrand, mu, q, G_QUAD_TOL)?.value)
}

/// `G1(q) = int_mu^q (cosh(pi) + E(s)) g(s) ds`.
pub fn g1(params: &AbParams, z0: f64, mu: f64, q: f64) -> Result<f64> {
    g_integral(params, z0, mu, q, 1.0)
}

/// `G2(q) = int_mu^q (cosh(pi) - E(s)) g(s) ds`.
pub fn g2(params: &AbParams, z0: f64, mu: f64, q: f64) -> Result<f64> {
    g_integral(params, z0, mu, q, -1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseId {
    /// `a > 0, b > 2`: peakon-antipeakon, `p1 = alpha + delta`, `p2 = -alpha`.
    Case1,
    /// `a > 0, b < 2`: `p1 = alpha + delta`, `p2 = alpha`.
    Case2,
    /// `a < 0, b > 2`: `p1 = alpha`, `p2 = alpha + delta`.
    Case3,
    /// `a < 0, b < 2`: peakon-antipeakon, `p1 = -alpha`, `p2 = alpha + delta`.
    Case4,
}

impl CaseId {
    pub fn classify(params: &AbParams) -> Result<Self> {
        let (a, b) = (params.a(), params.b());
        if b == 2.0 {
            return Err(Error::UnsupportedCase("b = 2 freezes the momenta; no colliding profile is constructed".into()));
        }
        Ok(match (a > 0.0, b > 2.0) {
            (true, true) => CaseId::Case1,
            (true, false) => CaseId::Case2,
            (false, true) => CaseId::Case3,
            (false, false) => CaseId::Case4,
        })
    }

    /// Sign of `dp/dt` along the case trajectory.
    pub fn dp_sign(self) -> f64 {
        match self {
            CaseId::Case1 | CaseId::Case2 => -1.0,
            CaseId::Case3 | CaseId::Case4 => 1.0,
        }
    }

    /// `(p1(0), p2(0))`.
    pub fn momenta(self, alpha: f64, delta: f64) -> (f64, f64) {
        match self {
            CaseId::Case1 => (alpha + delta, -alpha),
            CaseId::Case2 => (alpha + delta, alpha),
            CaseId::Case3 => (alpha, alpha + delta),
            CaseId::Case4 => (-alpha, alpha + delta),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CaseId::Case1 => "case1",
            CaseId::Case2 => "case2",
            CaseId::Case3 => "case3",
            CaseId::Case4 => "case4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseProfile {
    pub case_id: CaseId,
    pub alpha: f64,
    pub delta: f64,
    pub c: f64,
    pub mu: f64,
    pub initial: TwoPeakonState,
    pub epsilon: f64,
    pub tc_bound: f64,
    /// The literal envelope value: `a (2 alpha delta + delta^2)` for `a > 0`,
    /// `c |a| (2 alpha delta + delta^2)` for `a < 0`. Reported, not used.
    pub envelope_epsilon: f64,
}

pub fn make_epsilon(params: &AbParams, alpha: f64, delta: f64, mu: f64) -> Result<f64> {
    if !(alpha > 0.0 && delta > 0.0) {
        return Err(Error::InvalidParams(format!("alpha = {alpha} and delta = {delta} must be positive")));
    }
    Ok(min_abs_l(params, mu)? * (2.0 * alpha * delta + delta * delta))
}

pub fn make_profile(params: &AbParams, alpha: f64, delta: f64, c: f64) -> Result<CaseProfile> {
    let case_id = CaseId::classify(params)?;
    let mu = select_mu(params, c)?;
    let epsilon = make_epsilon(params, alpha, delta, mu)?;
    let (p1, p2) = case_id.momenta(alpha, delta);
    let gap = 2.0 * alpha * delta + delta * delta;
    let envelope_epsilon = if params.a() > 0.0 { params.a() * gap } else { c * params.a().abs() * gap };
    Ok(CaseProfile {
        case_id,
        alpha,
        delta,
        c,
        mu,
        initial: TwoPeakonState::new(0.0, p1, 0.0, p2, mu),
        epsilon,
        tc_bound: mu / epsilon,
        envelope_epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, ReducedState};
    use crate::geometry::sinh_pi_sq;
    use approx::assert_relative_eq;

    fn params(a: f64, b: f64) -> AbParams {
        AbParams::new(a, b).unwrap()
    }

    #[test]
    fn z_examples() {
        let p = params(1.0, 3.0);
        assert_eq!(z_of_q(&p, -1.5, 0.3, 0.3).unwrap(), -1.5);
        let p2 = params(0.7, 2.0);
        assert_eq!(z_of_q(&p2, 0.8, 0.3, 0.01).unwrap(), 0.8);
        assert!(z_of_q(&params(2.0, 1.0), 1.0, 0.1, 3.0).is_err());
    }

    #[test]
    fn g_examples() {
        let p = params(0.8, 1.0);
        assert!(g_of_q(&p, 1.0, 1.0, PI).unwrap().abs() < 1e-15);
        assert_eq!(g_of_q(&params(0.8, 2.0), 1.0, 1.0, 0.4).unwrap(), 0.0);
        assert_eq!(g1(&p, 1.0, 0.5, 0.5).unwrap(), 0.0);
        assert_eq!(g2(&params(0.8, 2.0), 1.0, 0.5, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn g_bounded_on_interval() {
        for &(a, b) in &[(1.0, 3.0), (0.5, 1.0), (-1.0, 3.0), (-0.5, 0.0), (0.2, -1.0)] {
            let p = params(a, b);
            let mu = select_mu(&p, 1.5).unwrap();
            let minl = min_abs_l(&p, mu).unwrap();
            let expo = (2.0 - b) / (2.0 * (1.0 - 3.0 * a));
            let lm = l_a(&p, mu).abs();
            let ratio_max = [minl / lm, l_a(&p, 0.0).abs() / lm, 1.0]
                .iter()
                .map(|r| r.powf(expo))
                .fold(0.0, f64::max);
            let bound = (2.0 - b).abs() * PI.sinh() * ratio_max / minl;
            for i in 0..=2000 {
                let q = mu * i as f64 / 2000.0;
                let g = g_of_q(&p, 1.0, mu, q).unwrap();
                assert!(g.is_finite() && g.abs() <= bound * (1.0 + 1e-12), "a={a} b={b} q={q}");
            }
        }
    }

    #[test]
    fn one_third_limit_continuous() {
        let mu = 0.1;
        for b in [0.0, 1.0, 3.0] {
            for q in [0.0, 0.03, 0.07] {
                let exact = z_of_q(&params(1.0 / 3.0, b), 1.0, mu, q).unwrap();
                for da in [1e-6, -1e-6] {
                    let near = z_of_q(&params(1.0 / 3.0 + da, b), 1.0, mu, q).unwrap();
                    assert_relative_eq!(near, exact, max_relative = 1e-4);
                }
            }
        }
    }

    #[test]
    fn profiles_match_case_table() {
        let (al, de) = (1.0, 0.5);
        let c1 = make_profile(&params(1.0, 3.0), al, de, 1.5).unwrap();
        assert_eq!(c1.case_id, CaseId::Case1);
        assert_eq!((c1.initial.p1(), c1.initial.q1(), c1.initial.p2()), (1.5, 0.0, -1.0));
        assert_eq!(c1.initial.q2(), c1.mu);
        let c2 = make_profile(&params(1.0, 1.0), al, de, 1.5).unwrap();
        assert_eq!(c2.case_id, CaseId::Case2);
        assert_eq!((c2.initial.p1(), c2.initial.p2()), (1.5, 1.0));
        assert_eq!(ReducedState::from_state(&c2.initial).p(), -(2.0 * al * de + de * de));
        let c3 = make_profile(&params(-1.0, 3.0), al, de, 1.5).unwrap();
        assert_eq!((c3.case_id, c3.initial.p1(), c3.initial.p2()), (CaseId::Case3, 1.0, 1.5));
        let c4 = make_profile(&params(-1.0, 1.0), al, de, 1.5).unwrap();
        assert_eq!((c4.case_id, c4.initial.p1(), c4.initial.p2()), (CaseId::Case4, -1.0, 1.5));
        assert_eq!(ReducedState::from_state(&c4.initial).p(), 2.0 * al * de + de * de);
        for c in [c1, c2, c3, c4] {
            assert!(c.epsilon > 0.0);
            assert_eq!(c.tc_bound, c.mu / c.epsilon);
        }
        assert!(matches!(make_profile(&params(1.0, 2.0), al, de, 1.5), Err(Error::UnsupportedCase(_))));
    }

    #[test]
    fn epsilon_examples() {
        let gap = 2.0 * 0.5 + 0.25;
        let e = make_epsilon(&params(1.0 / 3.0, 1.0), 1.0, 0.5, 0.1).unwrap();
        assert_relative_eq!(e, 2.0 / 3.0 * sinh_pi_sq() * gap, max_relative = 1e-14);
        let p = params(1.0, 3.0);
        let mu = select_mu(&p, 1.5).unwrap();
        let e = make_epsilon(&p, 1.0, 0.5, mu).unwrap();
        let endpoint = l_a(&p, 0.0).abs().min(l_a(&p, mu).abs());
        assert_relative_eq!(e, endpoint * 1.25, max_relative = 1e-14);
        assert_relative_eq!(e, 1.5 * sinh_pi_sq() * 1.25, max_relative = 1e-10);
        let e_a = make_epsilon(&p, 1.2, 0.5, mu).unwrap();
        let e_d = make_epsilon(&p, 1.0, 0.6, mu).unwrap();
        assert!(e_a > e && e_d > e);
        assert!(make_epsilon(&p, 0.0, 0.5, mu).is_err());
    }

    #[test]
    fn z_matches_integrated_trajectory() {
        let p = params(1.0, 3.0);
        let prof = make_profile(&p, 1.0, 0.5, 1.5).unwrap();
        let z0 = prof.initial.p1() * prof.initial.p2();
        let traj = integrate(&p, &prof.initial, 1.0, 1e-11).unwrap();
        for s in &traj.samples {
            let z = s.p1() * s.p2();
            let zq = z_of_q(&p, z0, prof.mu, s.separation()).unwrap();
            assert!((z - zq).abs() <= 1e-8 * z0.abs(), "t={} z={z} z(q)={zq}", s.t);
        }
    }

    #[test]
    fn b_two_degenerate_constants() {
        // b = 2 with p(0) != 0: h, w, z constant and q still closes
        let p = params(1.0, 2.0);
        let mu = select_mu(&p, 1.5).unwrap();
        let init = TwoPeakonState::new(0.0, 1.5, 0.0, 1.0, mu);
        let traj = integrate(&p, &init, 1.0, 1e-10).unwrap();
        assert!(traj.has_event(crate::dynamics::EventKind::Collision));
        let r0 = ReducedState::from_state(&init);
        for s in &traj.samples {
            let r = ReducedState::from_state(s);
            assert_eq!((r.h, r.w, r.z), (r0.h, r0.w, r0.z));
        }
    }
}
