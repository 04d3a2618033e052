//! The Jacobi-type function
//!
//!   theta_mu(q) = sum_{n in Z} (n + mu/2) q^{n(n+mu)},   |q| < 1,
//!
//! evaluated at q = e^{-u} (the nome is always passed through its exponent
//! u > 0), together with its u-derivatives, its closed-form Laplace
//! transform, the transition densities of Brownian motion killed /
//! conditioned in [0,1], and the Ramanujan theta-function relation.
//!
//! Two complementary series are used. The defining sum has terms decaying
//! like e^{-n^2 u} and is used for u >= pi. For u < pi the Poisson-summation
//! (modular) form
//!
//!   theta_mu(e^{-u}) = pi^{3/2} u^{-3/2} sum_{n in Z} n sin(pi mu n)
//!                        exp(-pi^2 n^2 / u + mu^2 u / 4)
//!
//! decays like e^{-pi^2 n^2 / u}; the switch point u = pi balances the two
//! rates, so convergence is super-exponential in both regimes.
//!
//! Bilateral sums are evaluated symmetrically, pairing n with -n, and
//! accumulated with compensated summation.

use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use crate::params::ModelParams;

use std::f64::consts::PI;

/// Which series produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Direct,
    Transformed,
}

/// A numerically evaluated infinite sum.
#[derive(Debug, Clone, Copy)]
pub struct SeriesValue {
    pub value: f64,
    /// Number of series terms actually evaluated.
    pub terms_used: usize,
    /// Bound on the truncation error (geometric-ratio bound on the dropped
    /// tail). On success `tail_bound <= tol`.
    pub tail_bound: f64,
    pub regime: Regime,
    /// Sum of absolute values of the summed terms. `noise floor =
    /// abs_sum * machine eps` bounds the cancellation error of the value;
    /// it is reported for conditioning diagnostics, not included in
    /// `tail_bound`.
    pub abs_sum: f64,
}

const MAX_PAIRS: u32 = 100_000;
const MIN_PAIRS: u32 = 3;

/// Sum `center + sum_{n>=1} (terms of pair n)`. The closure pushes the terms
/// of pair n into the accumulator (individually, so the tracked |term| sum
/// honestly reflects the cancellation) and returns a positive magnitude
/// envelope for the pair. Stops once the envelope has been below `tol/10`
/// with a geometric tail estimate below `tol`, but not before `MIN_PAIRS`
/// pairs.
fn sum_bilateral(
    center: f64,
    mut emit: impl FnMut(u32, &mut KahanSum) -> f64,
    tol: f64,
    what: &str,
) -> Result<(f64, u32, f64, f64)> {
    let mut acc = KahanSum::new();
    acc.push(center);
    let mut prev_env = f64::INFINITY;
    let mut n = 1u32;
    loop {
        let env = emit(n, &mut acc);
        if n >= MIN_PAIRS && env < tol / 10.0 {
            // Geometric bound on the dropped tail from the observed ratio.
            let ratio = if prev_env > 0.0 { (env / prev_env).min(0.9) } else { 0.0 };
            let tail = if env == 0.0 { 0.0 } else { env * ratio / (1.0 - ratio) };
            if tail < tol {
                return Ok((acc.value(), n, tail, acc.abs_sum()));
            }
        }
        prev_env = env;
        n += 1;
        if n > MAX_PAIRS {
            return Err(Error::Convergence(format!(
                "{what}: no convergence to tol {tol:.3e} within {MAX_PAIRS} bilateral pairs"
            )));
        }
    }
}

fn validate_theta_args(u: f64, mu: f64, tol: f64) -> Result<()> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::Domain(format!(
            "theta series requires u > 0 (q = e^-u < 1); got u = {u}"
        )));
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::Domain(format!("mu must lie in (0,1); got {mu}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive; got {tol}")));
    }
    Ok(())
}

/// theta_mu(e^{-u}) by the defining series. Intended for u >= pi; exposed
/// for cross-checking the modular identity.
pub fn theta_mu_direct(u: f64, mu: f64, tol: f64) -> Result<SeriesValue> {
    validate_theta_args(u, mu, tol)?;
    let (value, pairs, tail, abs_sum) = sum_bilateral(
        mu / 2.0,
        |n, acc| {
            let n = n as f64;
            let tp = (n + mu / 2.0) * (-n * (n + mu) * u).exp();
            let tm = (-n + mu / 2.0) * (-n * (n - mu) * u).exp();
            acc.push(tp);
            acc.push(tm);
            tp.abs() + tm.abs()
        },
        tol,
        "theta_mu direct series",
    )?;
    finite_series(value, 1 + 2 * pairs as usize, tail, Regime::Direct, abs_sum, "theta_mu_direct")
}

/// theta_mu(e^{-u}) by the Poisson-summation form. Intended for u < pi;
/// exposed for cross-checking the modular identity.
pub fn theta_mu_transformed(u: f64, mu: f64, tol: f64) -> Result<SeriesValue> {
    validate_theta_args(u, mu, tol)?;
    let pref = PI.powi(3).sqrt() / u.powf(1.5) * (mu * mu * u / 4.0).exp();
    // Relative envelope uses |sin| <= 1 so an accidental zero of
    // sin(pi mu n) cannot stop the sum early.
    let tol_inner = if pref > 0.0 { tol / pref } else { tol };
    let (raw, pairs, tail, abs_sum) = sum_bilateral(
        0.0,
        |n, acc| {
            let n = n as f64;
            let e = (-PI * PI * n * n / u).exp();
            acc.push(2.0 * n * (PI * mu * n).sin() * e);
            2.0 * n * e
        },
        tol_inner,
        "theta_mu transformed series",
    )?;
    finite_series(
        pref * raw,
        pairs as usize,
        pref * tail,
        Regime::Transformed,
        pref * abs_sum,
        "theta_mu_transformed",
    )
}

fn finite_series(
    value: f64,
    terms_used: usize,
    tail_bound: f64,
    regime: Regime,
    abs_sum: f64,
    what: &str,
) -> Result<SeriesValue> {
    if !value.is_finite() {
        return Err(Error::NonFinite(what.to_string()));
    }
    Ok(SeriesValue { value, terms_used, tail_bound, regime, abs_sum })
}

/// theta_mu(e^{-u}) with automatic regime selection (direct for u >= pi,
/// transformed otherwise).
pub fn theta_mu(u: f64, mu: f64, tol: f64) -> Result<SeriesValue> {
    if u >= PI {
        theta_mu_direct(u, mu, tol)
    } else {
        theta_mu_transformed(u, mu, tol)
    }
}

/// k-th derivative (k = 1, 2, 3) with respect to u of
/// u -> theta_mu(e^{-scale * u}).
///
/// The regime switch applies to the theta argument w = scale * u. In the
/// transformed regime each term w^{-3/2} exp(-pi^2 n^2/w + mu^2 w/4) is
/// differentiated through its logarithmic derivatives.
pub fn theta_mu_derivative(u: f64, mu: f64, order: u8, scale: f64, tol: f64) -> Result<SeriesValue> {
    validate_theta_args(u, mu, tol)?;
    if !(1..=3).contains(&order) {
        return Err(Error::Usage(format!("derivative order must be 1, 2 or 3; got {order}")));
    }
    if !(scale > 0.0) {
        return Err(Error::Domain(format!("scale must be positive; got {scale}")));
    }
    let w = scale * u;
    if w >= PI {
        let (value, pairs, tail, abs_sum) = sum_bilateral(
            0.0, // the n = 0 term is constant in u
            |n, acc| {
                let n = n as f64;
                let rp = -n * (n + mu) * scale;
                let rm = -n * (n - mu) * scale;
                let tp = (n + mu / 2.0) * rp.powi(order as i32) * (rp * u).exp();
                let tm = (-n + mu / 2.0) * rm.powi(order as i32) * (rm * u).exp();
                acc.push(tp);
                acc.push(tm);
                tp.abs() + tm.abs()
            },
            tol,
            "theta derivative direct series",
        )?;
        finite_series(value, 2 * pairs as usize, tail, Regime::Direct, abs_sum, "theta_mu_derivative")
    } else {
        let pref = PI.powi(3).sqrt() * scale.powi(order as i32);
        let tol_inner = tol / pref;
        let (raw, pairs, tail, abs_sum) = sum_bilateral(
            0.0,
            |n, acc| {
                let n = n as f64;
                let c = PI * PI * n * n;
                let d = mu * mu / 4.0;
                let g = w.powf(-1.5) * (-c / w + d * w).exp();
                let l1 = -1.5 / w + c / (w * w) + d;
                let l2 = 1.5 / (w * w) - 2.0 * c / (w * w * w);
                let l3 = -3.0 / (w * w * w) + 6.0 * c / (w * w * w * w);
                let gk = match order {
                    1 => g * l1,
                    2 => g * (l1 * l1 + l2),
                    _ => g * (l1 * l1 * l1 + 3.0 * l1 * l2 + l3),
                };
                acc.push(2.0 * n * (PI * mu * n).sin() * gk);
                (2.0 * n * gk).abs()
            },
            tol_inner,
            "theta derivative transformed series",
        )?;
        finite_series(
            pref * raw,
            pairs as usize,
            pref * tail,
            Regime::Transformed,
            pref * abs_sum,
            "theta_mu_derivative",
        )
    }
}

/// Closed form of the Laplace transform
///
///   int_0^oo theta_mu1(e^{-(l1+l2) u}) e^{-u x} du
///     = pi sin(pi mu1) / ((l1+l2) (cos(pi sqrt(mu1^2 - 4x/(l1+l2))) - cos(pi mu1)))
///
/// for x > 0. At x = 0 the integral diverges (theta tends to the nonzero
/// constant mu1/2 at u -> oo), which shows up as a vanishing denominator;
/// this is reported as a domain error.
pub fn theta_laplace_closed(x: f64, p: &ModelParams) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("theta_laplace_closed requires x >= 0, got {x}")));
    }
    let ls = p.lambda_sum();
    let mu = p.mu1();
    let den = crate::kernel::cos_pi_sqrt(mu * mu - 4.0 * x / ls) - (PI * mu).cos();
    if den <= 0.0 {
        return Err(Error::Domain(format!(
            "the transform diverges as x -> 0 (theta tends to mu/2 > 0 at infinity); \
             denominator {den:.3e} at x = {x}"
        )));
    }
    Ok(PI * (PI * mu).sin() / (ls * den))
}

/// Transition density p_t(x,y) of Brownian motion killed at 0 and 1,
/// by the method of images:
///
///   p_t(x,y) = (2 pi t)^{-1/2} sum_n [ e^{-(x-y+2n)^2/(2t)}
///                                    - e^{-(x+y-2+2n)^2/(2t)} ],
///
/// each image of y under the reflection group of [0,1] appearing exactly
/// once (the normalization consistent with the eigenfunction expansion
/// 2 sum_k sin(k pi x) sin(k pi y) e^{-k^2 pi^2 t/2} and with the small-t
/// free Gaussian limit).
pub fn killed_bm_density(t: f64, x: f64, y: f64, tol: f64) -> Result<SeriesValue> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("killed_bm_density requires t > 0, got {t}")));
    }
    for (name, v) in [("x", x), ("y", y)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain(format!("{name} must lie in (0,1); got {v}")));
        }
    }
    if !(tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let pref = 1.0 / (2.0 * PI * t).sqrt();
    let g = |z: f64| (-z * z / (2.0 * t)).exp();
    let term = |n: f64| g(x - y + 2.0 * n) - g(x + y - 2.0 + 2.0 * n);
    let env = |n: f64| g(x - y + 2.0 * n) + g(x + y - 2.0 + 2.0 * n);
    let tol_inner = tol / pref;
    let (raw, pairs, tail, abs_sum) = sum_bilateral(
        term(0.0),
        |n, acc| {
            let n = n as f64;
            acc.push(term(n));
            acc.push(term(-n));
            env(n) + env(-n)
        },
        tol_inner,
        "killed BM image series",
    )?;
    finite_series(
        pref * raw,
        1 + 2 * pairs as usize,
        pref * tail,
        Regime::Direct,
        pref * abs_sum,
        "killed_bm_density",
    )
}

/// Eigenfunction expansion of the same density,
/// 2 sum_{k>=1} sin(k pi x) sin(k pi y) e^{-k^2 pi^2 t / 2}.
/// Internal oracle for cross-checking `killed_bm_density` at t >= 1, where
/// the image series needs many terms.
#[cfg(test)]
pub(crate) fn killed_bm_density_eigen(t: f64, x: f64, y: f64, tol: f64) -> Result<f64> {
    let (v, _, _, _) = sum_bilateral(
        0.0,
        |k, acc| {
            let k = k as f64;
            let e = (-k * k * PI * PI * t / 2.0).exp();
            acc.push(2.0 * (k * PI * x).sin() * (k * PI * y).sin() * e);
            2.0 * e
        },
        tol,
        "killed BM eigenfunction series",
    )?;
    Ok(v)
}

/// Entrance density of Brownian motion conditioned to stay in [0,1],
/// started at the boundary:
///
///   q_t(0,y) = sin(pi y) sum_n n sin(n pi y) e^{-pi^2 (n^2-1) t/2}.
///
/// Integrates to 1 over y in (0,1) for every t > 0 (only n = +-1 survive
/// the integration).
pub fn entrance_density(t: f64, y: f64, tol: f64) -> Result<SeriesValue> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("entrance_density requires t > 0, got {t}")));
    }
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::Domain(format!("y must lie in (0,1); got {y}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let pref = (PI * y).sin();
    let tol_inner = if pref > 0.0 { tol / pref } else { tol };
    let (raw, pairs, tail, abs_sum) = sum_bilateral(
        0.0,
        |n, acc| {
            let n = n as f64;
            let e = (-PI * PI * (n * n - 1.0) * t / 2.0).exp();
            // n and -n contribute equally.
            acc.push(2.0 * n * (n * PI * y).sin() * e);
            2.0 * n * e
        },
        tol_inner,
        "entrance density series",
    )?;
    finite_series(
        pref * raw,
        pairs as usize,
        pref * tail,
        Regime::Direct,
        pref * abs_sum,
        "entrance_density",
    )
}

/// Residual of the Ramanujan theta-function representation
///
///   theta_mu(q) = g(q^{1+mu}, q^{1-mu}) + (mu/2) f(q^{1+mu}, q^{1-mu}),
///
/// where f(a,b) = sum_n a^{n(n+1)/2} b^{n(n-1)/2} and g is its degree
/// derivative sum_n n a^{n(n+1)/2} b^{n(n-1)/2}. f and g are evaluated as
/// bilateral series independent of `theta_mu`'s own summation.
pub fn ramanujan_relation_residual(u: f64, mu: f64, tol: f64) -> Result<f64> {
    validate_theta_args(u, mu, tol)?;
    // a b = q^2; |ab| >= 1 would mean q >= 1, excluded by u > 0.
    let exponent = |n: f64| (1.0 + mu) * n * (n + 1.0) / 2.0 + (1.0 - mu) * n * (n - 1.0) / 2.0;
    let (f, _, _, _) = sum_bilateral(
        1.0,
        |n, acc| {
            let n = n as f64;
            let tp = (-u * exponent(n)).exp();
            let tm = (-u * exponent(-n)).exp();
            acc.push(tp);
            acc.push(tm);
            tp + tm
        },
        tol / 10.0,
        "Ramanujan f series",
    )?;
    let (g, _, _, _) = sum_bilateral(
        0.0,
        |n, acc| {
            let n = n as f64;
            let tp = n * (-u * exponent(n)).exp();
            let tm = -n * (-u * exponent(-n)).exp();
            acc.push(tp);
            acc.push(tm);
            tp.abs() + tm.abs()
        },
        tol / 10.0,
        "Ramanujan g series",
    )?;
    let theta = theta_mu(u, mu, tol / 10.0)?;
    Ok((theta.value - g - mu / 2.0 * f).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate_panels;

    #[test]
    fn rejects_bad_arguments() {
        assert!(theta_mu(0.0, 0.5, 1e-12).is_err());
        assert!(theta_mu(-1.0, 0.5, 1e-12).is_err());
        assert!(theta_mu(1.0, 1.0, 1e-12).is_err());
        assert!(theta_mu(1.0, 0.5, 0.0).is_err());
        assert!(theta_mu_derivative(1.0, 0.5, 4, 1.0, 1e-12).is_err());
    }

    #[test]
    fn large_u_limit_is_center_term() {
        // Only n = 0 survives as u -> oo: theta -> mu/2. The slowest
        // correction is the n = -1 term, of size (1 - mu/2) e^{-(1-mu)u}.
        for mu in [0.1, 0.3, 0.5, 0.8] {
            let u = 50.0;
            let v = theta_mu(u, mu, 1e-30).unwrap();
            assert_eq!(v.regime, Regime::Direct);
            let leading_correction = (1.0 - mu / 2.0) * (-(1.0 - mu) * u).exp();
            assert!(
                (v.value - mu / 2.0).abs() <= 2.0 * leading_correction + 1e-20,
                "mu={mu}: dev={}",
                (v.value - mu / 2.0).abs()
            );
        }
        // Far enough out the center term is all that remains at 1e-20.
        let v = theta_mu(250.0, 0.5, 1e-30).unwrap();
        assert!((v.value - 0.25).abs() < 1e-20);
    }

    #[test]
    fn small_u_positive_and_vanishing() {
        // theta(e^{-u}) > 0 and decreasing to 0 as u -> 0+.
        let mut prev = f64::INFINITY;
        for u in [2.0, 1.0, 0.5, 0.25, 0.12] {
            let v = theta_mu(u, 0.5, 1e-20).unwrap().value;
            assert!(v > 0.0, "u={u}, v={v}");
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-15);
    }

    #[test]
    fn modular_identity_at_switch() {
        // u = 2, mu = 0.5: both series are well conditioned.
        let d = theta_mu_direct(2.0, 0.5, 1e-18).unwrap();
        let t = theta_mu_transformed(2.0, 0.5, 1e-18).unwrap();
        assert!(
            (d.value - t.value).abs() <= 1e-13 * t.value.abs(),
            "direct={}, transformed={}",
            d.value,
            t.value
        );
    }

    #[test]
    fn modular_identity_grid() {
        // Strict relative agreement wherever the direct sum's conditioning
        // allows it; noise-floor agreement below that.
        for mu in [0.1, 0.3, 0.5, 0.7, 0.9] {
            for i in 0..30 {
                let u = 0.05 * (50.0_f64 / 0.05).powf(i as f64 / 29.0);
                let d = theta_mu_direct(u, mu, 1e-18).unwrap();
                let t = theta_mu_transformed(u, mu, 1e-18).unwrap();
                let diff = (d.value - t.value).abs();
                let noise = 8.0 * (d.abs_sum + t.abs_sum) * f64::EPSILON;
                if noise < 1e-13 * t.value.abs() {
                    assert!(diff <= 1e-12 * t.value.abs(), "u={u} mu={mu} rel={}", diff / t.value);
                } else {
                    assert!(diff <= noise + d.tail_bound + t.tail_bound, "u={u} mu={mu}");
                }
            }
        }
    }

    #[test]
    fn tail_bounds_are_honest() {
        for (u, mu) in [(4.0, 0.3), (1.5, 0.5), (0.8, 0.7)] {
            let coarse = theta_mu(u, mu, 1e-6).unwrap();
            let fine = theta_mu(u, mu, 1e-16).unwrap();
            assert!(
                (coarse.value - fine.value).abs() <= coarse.tail_bound.max(1e-18),
                "u={u} mu={mu}: diff={} bound={}",
                (coarse.value - fine.value).abs(),
                coarse.tail_bound
            );
            assert!(coarse.tail_bound <= 1e-6);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let h = 1e-5;
        for u in [0.5, 1.0, 2.0, 5.0] {
            for scale in [1.0, 2.0] {
                let d1 = theta_mu_derivative(u, 0.4, 1, scale, 1e-14).unwrap().value;
                let fp = theta_mu(scale * (u + h), 0.4, 1e-16).unwrap().value;
                let fm = theta_mu(scale * (u - h), 0.4, 1e-16).unwrap().value;
                let fd = (fp - fm) / (2.0 * h);
                assert!(
                    (d1 - fd).abs() <= 1e-7 * d1.abs().max(1e-12),
                    "u={u} scale={scale}: d1={d1} fd={fd}"
                );
            }
        }
    }

    #[test]
    fn higher_derivatives_match_finite_differences() {
        let h = 1e-4;
        let u = 1.3;
        let mu = 0.6;
        let f = |x: f64| theta_mu(x, mu, 1e-18).unwrap().value;
        let d2 = theta_mu_derivative(u, mu, 2, 1.0, 1e-14).unwrap().value;
        let fd2 = (f(u + h) - 2.0 * f(u) + f(u - h)) / (h * h);
        assert!((d2 - fd2).abs() < 1e-6 * d2.abs());
        let d3 = theta_mu_derivative(u, mu, 3, 1.0, 1e-14).unwrap().value;
        let fd3 = (f(u + 2.0 * h) - 2.0 * f(u + h) + 2.0 * f(u - h) - f(u - 2.0 * h))
            / (2.0 * h * h * h);
        assert!((d3 - fd3).abs() < 1e-4 * d3.abs());
    }

    #[test]
    fn derivatives_vanish_at_both_ends() {
        // Large u: the derivative decays like e^{-(1-mu)u} (n = 0 term is
        // constant). Small u: all derivatives tend to 0.
        let d40 = theta_mu_derivative(40.0, 0.5, 1, 1.0, 1e-30).unwrap().value;
        let d60 = theta_mu_derivative(60.0, 0.5, 1, 1.0, 1e-30).unwrap().value;
        assert!(d40.abs() < 2.0 * (-20.0_f64).exp());
        assert!(d60.abs() < d40.abs() * (-9.0_f64).exp());
        for order in 1..=3 {
            let small = theta_mu_derivative(0.05, 0.5, order, 1.0, 1e-40).unwrap();
            assert!(small.value.abs() < 1e-40, "order {order}: {}", small.value);
        }
    }

    #[test]
    fn laplace_closed_form_values() {
        // At x* = (l1+l2) mu1^2 / 4 the transform equals
        // pi cot(pi mu1 / 2) / (l1 + l2): for mu1 = 1/2 this is pi / lambda_sum.
        for ls in [2.0, 0.5] {
            let p = ModelParams::from_lambdas(ls / 2.0, ls / 2.0).unwrap();
            let xstar = ls * 0.25 * 0.25;
            let v = theta_laplace_closed(xstar, &p).unwrap();
            assert!((v - PI / ls).abs() < 1e-13 * (PI / ls));
        }
        let p = ModelParams::from_lambdas(1.0 / 6.0, 5.0 / 6.0).unwrap();
        let mu = p.mu1();
        let xstar = p.lambda_sum() * mu * mu / 4.0;
        let v = theta_laplace_closed(xstar, &p).unwrap();
        let expected = PI * (PI * mu).sin() / ((1.0 - (PI * mu).cos()) * p.lambda_sum());
        assert!((v - expected).abs() < 1e-13 * expected);
        assert!((expected - PI * (PI * mu / 2.0).tan().recip()).abs() < 1e-12);

        // Diverges at x = 0; negative x rejected.
        assert!(theta_laplace_closed(0.0, &p).is_err());
        assert!(theta_laplace_closed(-0.5, &p).is_err());
    }

    #[test]
    fn laplace_matches_quadrature() {
        let p = ModelParams::from_lambdas(1.0, 1.0).unwrap();
        let ls = p.lambda_sum();
        let mu = p.mu1();
        for x in [0.5, 1.0, 5.0] {
            let closed = theta_laplace_closed(x, &p).unwrap();
            let integrand = |u: f64| theta_mu(ls * u, mu, 1e-16).unwrap().value * (-x * u).exp();
            let mut quad = integrate_panels(integrand, &[1e-9, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 40.0], 48);
            // Tail beyond 40: theta ~ mu/2 up to e^{-(1+mu) ls u} corrections.
            quad += mu / 2.0 * (-40.0 * x).exp() / x;
            assert!(
                (quad - closed).abs() <= 1e-8 * closed.abs(),
                "x={x}: quad={quad} closed={closed}"
            );
        }
    }

    #[test]
    fn killed_bm_basics() {
        // Symmetry in (x, y).
        let a = killed_bm_density(0.4, 0.3, 0.7, 1e-14).unwrap().value;
        let b = killed_bm_density(0.4, 0.7, 0.3, 1e-14).unwrap().value;
        assert!((a - b).abs() < 1e-13);

        // Small t at the center: image terms are negligible, the free
        // Gaussian density dominates.
        let t = 0.01;
        let v = killed_bm_density(t, 0.5, 0.5, 1e-14).unwrap().value;
        assert!((v - 1.0 / (2.0 * PI * t).sqrt()).abs() < 1e-10);

        // Killing: the mass over (0,1) is strictly below 1.
        let mass = integrate_panels(
            |y| killed_bm_density(0.5, 0.3, y, 1e-13).unwrap().value,
            &[1e-12, 0.25, 0.5, 0.75, 1.0 - 1e-12],
            48,
        );
        assert!(mass < 1.0);
        assert!(mass > 0.0);

        assert!(killed_bm_density(0.5, 0.0, 0.5, 1e-12).is_err());
        assert!(killed_bm_density(-0.1, 0.5, 0.5, 1e-12).is_err());
    }

    #[test]
    fn killed_bm_matches_eigenfunction_form() {
        for t in [1.0, 2.0, 5.0] {
            for (x, y) in [(0.5, 0.5), (0.2, 0.8), (0.35, 0.6)] {
                let image = killed_bm_density(t, x, y, 1e-15).unwrap().value;
                let eigen = killed_bm_density_eigen(t, x, y, 1e-16).unwrap();
                assert!((image - eigen).abs() < 1e-13, "t={t} x={x} y={y}");
            }
        }
    }

    #[test]
    fn entrance_density_properties() {
        // Vanishes at the edges (sin(pi y) prefactor).
        assert!(entrance_density(0.7, 1e-9, 1e-13).unwrap().value < 1e-7);
        assert!(entrance_density(0.7, 1.0 - 1e-9, 1e-13).unwrap().value < 1e-7);

        // Probability density of the conditioned process for every t.
        for t in [0.3, 1.0, 5.0] {
            let mass = integrate_panels(
                |y| entrance_density(t, y, 1e-13).unwrap().value,
                &[1e-12, 0.25, 0.5, 0.75, 1.0 - 1e-12],
                48,
            );
            assert!((mass - 1.0).abs() < 1e-8, "t={t}: mass={mass}");
        }

        // Large t: the n = +-1 terms dominate, q -> 2 sin^2(pi y),
        // which still integrates to 1.
        let t = 20.0;
        for y in [0.2, 0.5, 0.9] {
            let v = entrance_density(t, y, 1e-16).unwrap().value;
            let leading = 2.0 * (PI * y).sin().powi(2);
            assert!((v - leading).abs() < 1e-12, "y={y}");
        }
    }

    #[test]
    fn theta_entrance_identity() {
        // theta_mu(e^{-2/t}) = (pi t/2)^{3/2} exp(mu^2/(2t) - pi^2 t/2)
        //                      q_t(0,mu) / sin(pi mu).
        for t in [0.5, 1.0, 3.0] {
            for mu in [0.3, 0.5, 0.7] {
                let lhs = theta_mu(2.0 / t, mu, 1e-22).unwrap().value;
                let q = entrance_density(t, mu, 1e-22).unwrap().value;
                let rhs = (PI * t / 2.0).powf(1.5)
                    * (mu * mu / (2.0 * t) - PI * PI * t / 2.0).exp()
                    * q
                    / (PI * mu).sin();
                assert!(
                    (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1e-300),
                    "t={t} mu={mu}: lhs={lhs} rhs={rhs}"
                );
            }
        }
    }

    #[test]
    fn ramanujan_relation() {
        assert!(ramanujan_relation_residual(2.0, 0.5, 1e-12).unwrap() < 1e-12);
        assert!(ramanujan_relation_residual(5.0, 0.25, 1e-14).unwrap() < 1e-14);
    }

    #[test]
    fn huber_special_case() {
        // 4 theta_{1/2}(q^4) = sum_n (-1)^n n q^{n(n+1)} (bilateral).
        let u = 0.9; // q = e^{-u}
        let lhs = 4.0 * theta_mu(4.0 * u, 0.5, 1e-18).unwrap().value;
        let (rhs, _, _, _) = sum_bilateral(
            0.0,
            |n, acc| {
                let n = n as f64;
                let sign = if (n as i64) % 2 == 0 { 1.0 } else { -1.0 };
                // term at +n, and term at -n: (-1)^{-n} (-n) q^{n(n-1)}
                let tp = sign * n * (-u * n * (n + 1.0)).exp();
                let tm = -sign * n * (-u * n * (n - 1.0)).exp();
                acc.push(tp);
                acc.push(tm);
                tp.abs() + tm.abs()
            },
            1e-18,
            "Huber series",
        )
        .unwrap();
        assert!((lhs - rhs).abs() < 1e-12, "lhs={lhs} rhs={rhs}");
    }
}
