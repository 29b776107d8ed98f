//! The peakon ansatz on the circle.
//!
//! A two-peakon field is `u(x) = p1 E(x - q1) + p2 E(x - q2)` with the kernel
//! `E` from [`crate::geometry`]. Fourier coefficients use the convention
//! `u(x) = sum_n c_n e^{inx}`, `c_n = (1/2pi) int_0^{2pi} u(x) e^{-inx} dx`, which
//! for a single unit peakon at the origin gives `c_n = sinh(pi) / (pi (1 + n^2))`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{circular_distance, kernel, kernel_prime, sinh_pi_sq, wrap_unchecked, AbParams};

/// A single peakon: amplitude `p` and crest position `q` (stored wrapped).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peakon {
    pub p: f64,
    q: f64,
}

impl Peakon {
    pub fn new(p: f64, q: f64) -> Self {
        Self { p, q: wrap_unchecked(q) }
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPeakonState {
    pub t: f64,
    pub peakon1: Peakon,
    pub peakon2: Peakon,
}

impl TwoPeakonState {
    pub fn new(t: f64, p1: f64, q1: f64, p2: f64, q2: f64) -> Self {
        Self { t, peakon1: Peakon::new(p1, q1), peakon2: Peakon::new(p2, q2) }
    }

    pub fn single(t: f64, p: f64, q: f64) -> Self {
        Self::new(t, p, q, 0.0, q)
    }

    #[inline]
    pub fn p1(&self) -> f64 {
        self.peakon1.p
    }

    #[inline]
    pub fn p2(&self) -> f64 {
        self.peakon2.p
    }

    #[inline]
    pub fn q1(&self) -> f64 {
        self.peakon1.q
    }

    #[inline]
    pub fn q2(&self) -> f64 {
        self.peakon2.q
    }

    /// Separation `[q2 - q1]_p` in `[0, 2pi)`.
    #[inline]
    pub fn separation(&self) -> f64 {
        wrap_unchecked(self.q2() - self.q1())
    }

    pub fn peakons(&self) -> [Peakon; 2] {
        [self.peakon1, self.peakon2]
    }

    /// Same state with both momenta multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self::new(self.t, lambda * self.p1(), self.q1(), lambda * self.p2(), self.q2())
    }
}

/// Collision profile `C(x) = p* E(x - q*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionProfile {
    pub p_star: f64,
    q_star: f64,
}

impl CollisionProfile {
    pub fn new(p_star: f64, q_star: f64) -> Self {
        Self { p_star, q_star: wrap_unchecked(q_star) }
    }

    #[inline]
    pub fn q_star(&self) -> f64 {
        self.q_star
    }

    pub fn as_peakon(&self) -> Peakon {
        Peakon::new(self.p_star, self.q_star)
    }
}

/// A finite signed combination `sum_j a_j E(x - theta_j)`.
///
/// Differences such as `u(t) - C` are represented this way so that their
/// Fourier coefficients stay exact.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeakonSum {
    pub terms: Vec<Peakon>,
}

impl PeakonSum {
    pub fn new(terms: Vec<Peakon>) -> Self {
        Self { terms }
    }

    pub fn from_state(state: &TwoPeakonState) -> Self {
        Self::new(state.peakons().to_vec())
    }

    pub fn from_profile(profile: &CollisionProfile) -> Self {
        Self::new(vec![profile.as_peakon()])
    }

    /// `self - other`.
    pub fn minus(&self, other: &PeakonSum) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|pk| Peakon { p: -pk.p, q: pk.q }));
        Self { terms }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|pk| pk.p * kernel(x - pk.q)).sum()
    }

    /// `sum_j |a_j|`, the uniform bound on `|sum_j a_j e^{-in theta_j}|`.
    pub fn amplitude_bound(&self) -> f64 {
        self.terms.iter().map(|pk| pk.p.abs()).sum()
    }

    pub fn fourier_coeff(&self, n: i64) -> Complex64 {
        let nf = n as f64;
        let sum: Complex64 = self
            .terms
            .iter()
            .map(|pk| pk.p * Complex64::from_polar(1.0, -nf * pk.q))
            .sum();
        sum * coefficient_scale(n)
    }
}

/// `sinh(pi) / (pi (1 + n^2))`, the coefficient of a unit peakon at the origin.
#[inline]
pub fn coefficient_scale(n: i64) -> f64 {
    let nf = n as f64;
    PI.sinh() / (PI * (1.0 + nf * nf))
}

/// `u(x) = p1 E(x - q1) + p2 E(x - q2)`.
pub fn eval_field(state: &TwoPeakonState, x: f64) -> f64 {
    state.p1() * kernel(x - state.q1()) + state.p2() * kernel(x - state.q2())
}

/// `u_x(x)` away from the crests; evaluating on a crest with nonzero amplitude is an error.
pub fn eval_field_x(state: &TwoPeakonState, x: f64) -> Result<f64> {
    for pk in state.peakons() {
        if pk.p != 0.0 && circular_distance(x, pk.q) == 0.0 {
            return Err(Error::Domain(format!("u_x undefined at the crest x = {x}")));
        }
    }
    Ok(state.p1() * kernel_prime(x - state.q1()) + state.p2() * kernel_prime(x - state.q2()))
}

pub fn collision_function(profile: &CollisionProfile, x: f64) -> f64 {
    profile.p_star * kernel(x - profile.q_star)
}

/// Speed of the single peakon of amplitude `p`: `p^2 (1 + (1 - a) sinh^2 pi)`.
pub fn peakon_speed(params: &AbParams, p: f64) -> f64 {
    p * p * (1.0 + (1.0 - params.a()) * sinh_pi_sq())
}

pub fn fourier_coeff(state: &TwoPeakonState, n: i64) -> Complex64 {
    PeakonSum::from_state(state).fourier_coeff(n)
}
