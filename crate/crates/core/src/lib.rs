//! Numerical laboratory for periodic two-peakon solutions of the cubic
//! ab-family
//!
//! ```text
//! u_t + u^2 u_x - a u_x^3 + D^{-2} d_x [ b/3 u^3 + (6-6a-b)/2 u u_x^2 ]
//!                         + D^{-2} [ (2a+b-2)/2 u_x^3 ] = 0,   x in R / 2piZ
//! ```
//!
//! with `D^{-2} = (1 - d_x^2)^{-1}`. The crate integrates the 4x4 peakon ODE,
//! checks the closed-form invariants of the motion, locates collisions, measures
//! Sobolev distances to the collision profile and builds two distinct solutions
//! issuing from the same single-peakon datum.
//!
//! Module map:
//!
//! * [`geometry`]: wrapping to `[0, 2pi)`, the kernel `E`, `E'`, the coefficient `L_a`
//!   and the choice of initial separation.
//! * [`peakon`]: field evaluation, collision profile, Fourier coefficients.
//! * [`dynamics`]: right-hand sides and the adaptive integrator with event location.
//! * [`closed_form`]: `z(q)`, `g(q)`, `G1`, `G2`, the case profiles and `eps`.
//! * [`sobolev`]: truncated `H^s` norms with certified tails.
//! * [`residual`]: pointwise residuals of the nonlocal and local forms and the
//!   non-uniqueness construction.

pub mod closed_form;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod peakon;
pub mod quadrature;
pub mod residual;
pub mod sobolev;

pub use error::{Error, Result};
pub use geometry::{AbParams, WrappedAngle};
pub use peakon::{CollisionProfile, Peakon, TwoPeakonState};
