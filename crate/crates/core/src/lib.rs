//! Invariant measure of the gap process of a degenerate rank-based
//! three-particle Brownian system, computed several independent ways and
//! cross-checked.
//!
//! The three particles interact through their ranks: each particle receives
//! the drift attached to its current rank and only the middle-ranked particle
//! diffuses. The two gaps (G, H) between consecutive order statistics form a
//! degenerate reflected diffusion in the quadrant whose stationary law is
//! known in closed form. This crate evaluates:
//!
//! - the kernel, branch curves, conformal gluing map and decoupling
//!   polynomials behind the boundary value problem ([`kernel`]);
//! - a Jacobi-type theta function, its modular transformation and its
//!   relatives for Brownian motion killed in an interval ([`theta`]);
//! - Laplace transforms of the stationary and boundary measures, in
//!   trigonometric closed form and as infinite products ([`laplace`]);
//! - the stationary density as an alternating series of exponentials built
//!   by compensation, boundary densities by three methods, marginals and
//!   CDFs ([`density`]);
//! - Monte Carlo oracles: an Euler-Maruyama particle simulator and an
//!   infinite-exponential-convolution sampler ([`stochastic`]);
//! - a verification harness running the whole cross-check lattice
//!   ([`verify`]).

pub mod density;
pub mod error;
pub mod kernel;
pub mod laplace;
pub mod numeric;
pub mod params;
pub mod stochastic;
pub mod theta;
pub mod verify;

pub use error::{Error, Result};
pub use params::ModelParams;

/// Complex scalar used throughout (64-bit components).
pub type Complex = num_complex::Complex64;
