//! Periodic geometry on the circle `R / 2piZ`.
//!
//! Everything here is a pure function of value data. The peakon kernel on the
//! circle is `E(x) = cosh([x]_p - pi)` with `[x]_p = x - 2pi floor(x / 2pi)`, and
//! the separation dynamics are governed by
//!
//! ```text
//! L_a(q) = (1 - a) sinh^2(pi) + (3a - 1) sinh^2([q]_p - pi).
//! ```

use std::f64::consts::PI;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;

/// Fallback initial separation used when `L_a` never reaches the target value.
pub const DEFAULT_MU_FALLBACK: f64 = 0.1;

/// Default for the selection constant `c` in `(1, 2)`.
pub const DEFAULT_C: f64 = 1.5;

static SINH_PI_SQ: LazyLock<f64> = LazyLock::new(|| {
    let s = PI.sinh();
    s * s
});

/// `sinh^2(pi)` to full double precision.
#[inline]
pub fn sinh_pi_sq() -> f64 {
    *SINH_PI_SQ
}

/// An angle reduced to `[0, 2pi)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WrappedAngle(f64);

impl WrappedAngle {
    pub fn new(x: f64) -> Result<Self> {
        wrap(x)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<WrappedAngle> for f64 {
    fn from(w: WrappedAngle) -> f64 {
        w.0
    }
}

/// Equation parameters `(a, b)`; `a != 0` is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbParams {
    a: f64,
    b: f64,
}

impl AbParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParams(format!("non-finite parameters a = {a}, b = {b}")));
        }
        if a == 0.0 {
            return Err(Error::InvalidParams("a must be nonzero".into()));
        }
        Ok(Self { a, b })
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn b(&self) -> f64 {
        self.b
    }
}

/// `[x]_p = x - 2pi floor(x / 2pi)`.
pub fn wrap(x: f64) -> Result<WrappedAngle> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("cannot wrap non-finite value {x}")));
    }
    Ok(WrappedAngle(wrap_unchecked(x)))
}

/// Infallible wrap for internal use on values already known to be finite.
#[inline]
pub(crate) fn wrap_unchecked(x: f64) -> f64 {
    let r = x - TWO_PI * (x / TWO_PI).floor();
    // tiny negative inputs round up to exactly 2pi
    if !(0.0..TWO_PI).contains(&r) {
        0.0
    } else {
        r
    }
}

/// Signed representative of `x` in `[-pi, pi)`.
#[inline]
pub fn signed_angle(x: f64) -> f64 {
    let r = wrap_unchecked(x);
    if r >= PI {
        r - TWO_PI
    } else {
        r
    }
}

/// Distance on the circle, in `[0, pi]`.
#[inline]
pub fn circular_distance(x: f64, y: f64) -> f64 {
    signed_angle(x - y).abs()
}

/// `E(x) = cosh([x]_p - pi)`.
#[inline]
pub fn kernel(x: f64) -> f64 {
    (wrap_unchecked(x) - PI).cosh()
}

/// `E'(x) = sinh([x]_p - pi)`; the one-sided derivative of [`kernel`] from the right at peaks.
#[inline]
pub fn kernel_prime(x: f64) -> f64 {
    (wrap_unchecked(x) - PI).sinh()
}

/// Checked variants rejecting non-finite arguments.
pub fn kernel_checked(x: f64) -> Result<f64> {
    Ok((wrap(x)?.value() - PI).cosh())
}

pub fn kernel_prime_checked(x: f64) -> Result<f64> {
    Ok((wrap(x)?.value() - PI).sinh())
}

/// The coefficient `L_a(q)` of `p = p2^2 - p1^2` in the separation equation.
#[inline]
pub fn l_a(params: &AbParams, q: f64) -> f64 {
    let a = params.a();
    let s = kernel_prime(q);
    (1.0 - a) * sinh_pi_sq() + (3.0 * a - 1.0) * s * s
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Choose the initial separation `mu in (0, pi)`.
///
/// Solves `L_a(mu) = c a sinh^2(pi)` when that value is attained on `(0, pi)`;
/// otherwise falls back to [`DEFAULT_MU_FALLBACK`], shrunk if needed so that
/// `L_a` keeps the sign of `a` on `[0, mu]`.
pub fn select_mu(params: &AbParams, c: f64) -> Result<f64> {
    if !(c > 1.0 && c < 2.0) {
        return Err(Error::InvalidParams(format!("selection constant c = {c} must lie in (1, 2)")));
    }
    let target = c * params.a() * sinh_pi_sq();
    let f = |q: f64| l_a(params, q) - target;

    // L_a is monotone on [0, pi] because sinh^2(q - pi) is.
    let (lo, hi) = (0.0, PI);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if sign(f_lo) * sign(f_hi) < 0 {
        return Ok(bisect(f, lo, hi, f_lo));
    }

    let mut mu = DEFAULT_MU_FALLBACK;
    let want = sign(params.a());
    if sign(l_a(params, 0.0)) != want {
        return Err(Error::Domain("L_a does not have the sign of a at q = 0".into()));
    }
    if sign(l_a(params, mu)) != want {
        let root = bisect(|q| l_a(params, q), 0.0, mu, l_a(params, 0.0));
        mu = 0.5 * root;
        if mu <= 0.0 {
            return Err(Error::Domain("no interval of constant sign for L_a".into()));
        }
    }
    Ok(mu)
}

/// The closed-form separation `pi + asinh(+-sqrt((a(c + sinh^2 pi) - 1)/(3a - 1)))`.
///
/// This targets `L_a(mu) = c a + sinh^2(pi) - 1` rather than the value the
/// separation argument needs, and is exposed for comparison only. Returns the
/// branch below `pi` when real, `None` for `a = 1/3` or a negative radicand.
pub fn closed_form_mu(params: &AbParams, c: f64) -> Option<f64> {
    let a = params.a();
    let den = 3.0 * a - 1.0;
    if den == 0.0 {
        return None;
    }
    let rad = (a * (c + sinh_pi_sq()) - 1.0) / den;
    if !(rad >= 0.0) {
        return None;
    }
    Some(PI - rad.sqrt().asinh())
}

/// `min |L_a(q)|` over `q in [0, mu]`.
///
/// `L_a` is monotone on `[0, pi]`, so the minimum sits at an endpoint once a sign
/// change is ruled out.
pub fn min_abs_l(params: &AbParams, mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu < PI) {
        return Err(Error::Domain(format!("mu = {mu} outside (0, pi)")));
    }
    let l0 = l_a(params, 0.0);
    let l1 = l_a(params, mu);
    if sign(l0) != sign(l1) || l0 == 0.0 {
        return Err(Error::Domain(format!("L_a changes sign on [0, {mu}]")));
    }
    Ok(l0.abs().min(l1.abs()))
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if sign(fm) == sign(f_lo) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
