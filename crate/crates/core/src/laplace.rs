//! Laplace transforms of the stationary measure and of the two boundary
//! (local-time) measures.
//!
//! The transform of the first boundary measure has the trigonometric closed
//! form
//!
//!   nu1_hat(y) = 4 pi sin(pi mu1) / (3 l1 l2)
//!                * y (y + l2) (y + 2 l1 + l2)
//!                / ( cos(pi sqrt(mu1^2 - 4y/(l1+l2))) - cos(pi mu1) ),
//!
//! which is meromorphic on all of C (cos of a square root is entire), with
//! poles at y = -k(k+mu1)(l1+l2) for integer |k| >= 2. The same function also
//! has a globally convergent infinite-product representation over those pole
//! rates, and the bivariate transform pi_hat follows from the basic adjoint
//! relationship
//!
//!   K(x,y) pi_hat(x,y) = (x - y/2) nu1_hat(y) + (y - x/2) nu2_hat(x).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel;
use crate::numeric::digamma;
use crate::params::ModelParams;

use std::f64::consts::PI;

/// How a transform value was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    TrigClosedForm,
    InfiniteProduct,
    ViaBar,
}

/// A Laplace-transform evaluation.
#[derive(Debug, Clone, Copy)]
pub struct TransformValue {
    pub value: Complex64,
    pub method: Method,
    /// Number of factors used, for product evaluations.
    pub product_terms: Option<usize>,
}

/// Below this modulus of y the closed form is evaluated through a series
/// expansion of numerator and denominator around the removable point y = 0.
const SERIES_WINDOW: f64 = 1e-6;

/// Absolute pole-proximity threshold.
const POLE_TOL: f64 = 1e-10;

fn check_pole_proximity(y: Complex64, p: &ModelParams) -> Result<()> {
    let ls = p.lambda_sum();
    let mu = p.mu1();
    // Solve k(k + mu) = -y/ls for k and probe nearby integers.
    let s = (Complex64::new(mu * mu, 0.0) - 4.0 * y / ls).sqrt();
    for root in [(s.re - mu) / 2.0, (-s.re - mu) / 2.0] {
        let base = root.round() as i64;
        for k in [base - 1, base, base + 1] {
            if k.abs() < 2 {
                continue; // removable: cancelled by the numerator cubic
            }
            let kf = k as f64;
            let pole = Complex64::new(-ls * kf * (kf + mu), 0.0);
            if (y - pole).norm() < POLE_TOL {
                return Err(Error::Singularity {
                    re: y.re,
                    im: y.im,
                    index: Some(k),
                    context: format!("nu1_hat pole at y = {}", pole.re),
                });
            }
        }
    }
    Ok(())
}

/// Laplace transform of the first boundary measure, meromorphic closed form.
///
/// Real inputs follow a purely real code path, so real arguments give exactly
/// real values. At y = 0 the removable 0/0 is resolved by the analytic limit
/// nu1_hat(0) = (2/3)(2 l1 + l2).
pub fn nu1_hat(y: Complex64, p: &ModelParams) -> Result<TransformValue> {
    if !y.re.is_finite() || !y.im.is_finite() {
        return Err(Error::Domain("nu1_hat requires a finite argument".into()));
    }
    check_pole_proximity(y, p)?;
    let ls = p.lambda_sum();
    let (l1, l2) = (p.lambda1(), p.lambda2());
    let mu = p.mu1();
    let pref = 4.0 * PI * (PI * mu).sin() / (3.0 * l1 * l2);

    let value = if y.norm() < SERIES_WINDOW {
        // den(y) = E(mu^2 - 4y/ls) - E(mu^2) with E(w) = cos(pi sqrt(w));
        // expand E around w0 = mu^2 to third order in h = -4y/ls.
        let s0 = (PI * mu).sin();
        let c0 = (PI * mu).cos();
        let e1 = -PI * s0 / (2.0 * mu);
        let e2 = -PI * PI * c0 / (4.0 * mu * mu) + PI * s0 / (4.0 * mu.powi(3));
        let e3 = PI.powi(3) * s0 / (8.0 * mu.powi(3)) + 3.0 * PI * PI * c0 / (8.0 * mu.powi(4))
            - 3.0 * PI * s0 / (8.0 * mu.powi(5));
        let h = -4.0 * y / ls;
        let den_over_y = (-4.0 / ls) * (e1 + h * (e2 / 2.0 + h * e3 / 6.0));
        pref * (y + l2) * (y + 2.0 * l1 + l2) / den_over_y
    } else if y.im == 0.0 {
        let den = kernel::cos_pi_sqrt(mu * mu - 4.0 * y.re / ls) - (PI * mu).cos();
        let num = y.re * (y.re + l2) * (y.re + 2.0 * l1 + l2);
        Complex64::new(pref * num / den, 0.0)
    } else {
        let den = kernel::cos_pi_sqrt_c(Complex64::new(mu * mu, 0.0) - 4.0 * y / ls)
            - (PI * mu).cos();
        pref * y * (y + l2) * (y + 2.0 * l1 + l2) / den
    };
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::NonFinite("nu1_hat".into()));
    }
    Ok(TransformValue { value, method: Method::TrigClosedForm, product_terms: None })
}

/// Laplace transform of the second boundary measure: nu1_hat with x <-> y
/// and lambda1 <-> lambda2 interchanged.
pub fn nu2_hat(x: Complex64, p: &ModelParams) -> Result<TransformValue> {
    nu1_hat(x, &p.swapped())
}

/// Convenience: nu1_hat on the real axis.
pub fn nu1_hat_real(y: f64, p: &ModelParams) -> Result<f64> {
    Ok(nu1_hat(Complex64::new(y, 0.0), p)?.value.re)
}

/// Globally meromorphic infinite-product form,
///
///   nu1_hat(y) = (2/3)(2 l1 + l2) prod_{|k| >= 2} r_k / (y + r_k),
///   r_k = k (k + mu1) (l1 + l2),
///
/// truncated symmetrically at |k| <= n_factors with the first-order
/// multiplicative tail correction exp(-y * sum_{|k| > n} 1/r_k); the tail sum
/// is evaluated in closed form with digamma functions.
pub fn nu1_hat_product(y: f64, p: &ModelParams, n_factors: usize) -> Result<TransformValue> {
    if !(y >= 0.0) {
        return Err(Error::Domain(format!("nu1_hat_product requires y >= 0, got {y}")));
    }
    if n_factors < 10 {
        return Err(Error::Usage(format!(
            "n_factors must be at least 10, got {n_factors}"
        )));
    }
    let ls = p.lambda_sum();
    let mu = p.mu1();
    let mut product = 1.0;
    for k in 2..=n_factors {
        let kf = k as f64;
        let rp = kf * (kf + mu) * ls;
        let rm = kf * (kf - mu) * ls; // rate for index -k
        product *= (rp / (y + rp)) * (rm / (y + rm));
    }
    let nf = n_factors as f64;
    let tail_sum = (digamma(nf + 1.0 + mu) - digamma(nf + 1.0 - mu)) / (mu * ls);
    let value = (2.0 / 3.0) * (2.0 * p.lambda1() + p.lambda2()) * product * (-y * tail_sum).exp();
    Ok(TransformValue {
        value: Complex64::new(value, 0.0),
        method: Method::InfiniteProduct,
        product_terms: Some(2 * n_factors),
    })
}

/// Bivariate transform via the basic adjoint relationship,
/// pi_hat(x,y) = [(x - y/2) nu1_hat(y) + (y - x/2) nu2_hat(x)] / K(x,y),
/// with pi_hat(0,0) = 1 (probability normalization).
///
/// The zero set of K is a genuine singularity of this expression except
/// where the numerator also vanishes; evaluation near K = 0 is refused.
pub fn pi_hat(x: Complex64, y: Complex64, p: &ModelParams) -> Result<TransformValue> {
    if x.norm() < 1e-14 && y.norm() < 1e-14 {
        return Ok(TransformValue {
            value: Complex64::new(1.0, 0.0),
            method: Method::ViaBar,
            product_terms: None,
        });
    }
    let kv = kernel::k(x, y, p);
    let scale = 1.0 + x.norm_sqr() + y.norm_sqr();
    if kv.norm() < 1e-12 * scale {
        return Err(Error::Singularity {
            re: x.re,
            im: x.im,
            index: None,
            context: format!("pi_hat: kernel K(x,y) vanishes at x={x}, y={y}"),
        });
    }
    let n1 = nu1_hat(y, p)?.value;
    let n2 = nu2_hat(x, p)?.value;
    let value = ((x - y / 2.0) * n1 + (y - x / 2.0) * n2) / kv;
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::NonFinite("pi_hat".into()));
    }
    Ok(TransformValue { value, method: Method::ViaBar, product_terms: None })
}

/// Symmetric partial sum of the Mittag-Leffler expansion
///
///   pi / (cos(pi mu s) - cos(pi mu))
///     = -2/(mu sin(pi mu)) sum_{n in Z} (1 + 2n/mu) / (s^2 - (1 + 2n/mu)^2),
///
/// truncated at |n| <= n_terms. Converges to the left side like O(1/n_terms).
pub fn ml_shifted_cosine_partial(s: Complex64, mu: f64, n_terms: usize) -> Result<Complex64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::Domain(format!("mu must lie in (0,1); got {mu}")));
    }
    let s2 = s * s;
    let mut sum = Complex64::new(0.0, 0.0);
    for n in -(n_terms as i64)..=(n_terms as i64) {
        let a = 1.0 + 2.0 * n as f64 / mu;
        let den = s2 - a * a;
        if den.norm() < 1e-12 * (1.0 + s.norm_sqr() + a * a) {
            return Err(Error::Singularity {
                re: s.re,
                im: s.im,
                index: Some(n),
                context: format!("Mittag-Leffler pole s = +-{a}"),
            });
        }
        sum += a / den;
    }
    Ok(-2.0 / (mu * (PI * mu).sin()) * sum)
}

/// The telescoping product
/// prod_{|k| >= 2} k(k+mu2) / (k(k+mu2) - mu1) = 2 (1 + mu1) / (1 + mu2):
/// the exponential moment of the normalized second boundary density at
/// lambda1. Finitely many factors are multiplied out; the two tails telescope
/// in closed form and are applied as exact correction factors.
pub fn nu2_tilde_exp_moment_product(p: &ModelParams, n_factors: usize) -> f64 {
    let mu1 = p.mu1();
    let mu2 = p.mu2();
    let mut product = 1.0;
    for k in 2..=n_factors {
        let kf = k as f64;
        product *= kf * (kf + mu2) / (kf * (kf + mu2) - mu1);
        product *= kf * (kf - mu2) / (kf * (kf - mu2) - mu1); // index -k
    }
    let nf = n_factors as f64;
    product * (nf + 1.0) / (nf + 1.0 - mu1) * (nf + mu1) / nf
}

/// Partial product prod_{k=1}^{n} l_k / (l_k - lambda) with
/// l_k = lambda (k+2)(k+3)/2: the exponential moment E exp(lambda (G+H)) in
/// the symmetric case. Telescopes to 2 as n -> infinity.
pub fn sigma_exp_moment_partial_product(n_factors: usize) -> f64 {
    // lambda cancels: l_k/(l_k - lambda) = (k+2)(k+3) / ((k+1)(k+4)).
    let mut product = 1.0;
    for k in 1..=n_factors {
        let kf = k as f64;
        product *= (kf + 2.0) * (kf + 3.0) / ((kf + 1.0) * (kf + 4.0));
    }
    product
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sym() -> ModelParams {
        ModelParams::from_lambdas(1.0, 1.0).unwrap()
    }

    fn asym() -> ModelParams {
        ModelParams::from_lambdas(1.0 / 6.0, 5.0 / 6.0).unwrap()
    }

    #[test]
    fn nu1_hat_at_zero() {
        for p in [sym(), asym(), ModelParams::from_lambdas(0.3, 1.7).unwrap()] {
            let v = nu1_hat(c(0.0, 0.0), &p).unwrap().value;
            let expected = 2.0 / 3.0 * (2.0 * p.lambda1() + p.lambda2());
            assert!((v.re - expected).abs() < 1e-14 * expected);
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn series_window_is_continuous() {
        // Inside |y| < 1e-6 the function is evaluated by a series expansion;
        // replicate the direct formula at the same points and compare. The
        // direct formula still carries ~1e-10 relative accuracy there (the
        // 0/0 cancellation costs about six digits).
        for p in [sym(), asym()] {
            let mu = p.mu1();
            let ls = p.lambda_sum();
            let pref = 4.0 * PI * (PI * mu).sin() / (3.0 * p.lambda1() * p.lambda2());
            for y in [c(9.9e-7, 0.0), c(-9e-7, 3e-7), c(5e-7, -5e-7), c(0.0, 8e-7)] {
                let series = nu1_hat(y, &p).unwrap().value;
                let den = kernel::cos_pi_sqrt_c(c(mu * mu, 0.0) - 4.0 * y / ls)
                    - (PI * mu).cos();
                let direct =
                    pref * y * (y + p.lambda2()) * (y + 2.0 * p.lambda1() + p.lambda2()) / den;
                assert!(
                    (series - direct).norm() < 1e-8 * series.norm(),
                    "y={y}: series={series} direct={direct}"
                );
            }
        }
    }

    #[test]
    fn symmetric_closed_form_value() {
        // lambda = 1, y = 1: nu1_hat = (32 pi / 3) / cosh(pi sqrt(7) / 2).
        let p = sym();
        let v = nu1_hat(c(1.0, 0.0), &p).unwrap().value.re;
        let expected = 32.0 * PI / 3.0 / ((PI / 2.0) * 7.0_f64.sqrt()).cosh();
        assert!((v - expected).abs() < 1e-13 * expected);
        assert!((v - 1.0505).abs() < 5e-4);
    }

    #[test]
    fn positive_and_decaying_on_real_axis() {
        for p in [sym(), asym()] {
            let mut prev = f64::INFINITY;
            for y in [0.0, 0.5, 1.0, 2.0, 5.0, 20.0] {
                let v = nu1_hat_real(y, &p).unwrap();
                assert!(v > 0.0);
                assert!(v < prev);
                prev = v;
            }
            // Laplace transform of a finite measure decays at +infinity.
            assert!(nu1_hat_real(2000.0, &p).unwrap() < 1e-30);
        }
    }

    #[test]
    fn pole_detection_carries_index() {
        let p = asym();
        let ls = p.lambda_sum();
        let mu = p.mu1();
        for k in [2i64, -2, 5] {
            let kf = k as f64;
            let pole = -ls * kf * (kf + mu);
            let err = nu1_hat(c(pole + 2e-11, 0.0), &p).unwrap_err();
            match err {
                Error::Singularity { index, .. } => assert_eq!(index, Some(k)),
                other => panic!("expected singularity, got {other:?}"),
            }
        }
        // The would-be poles k = 0, +-1 are removable: evaluation succeeds.
        assert!(nu1_hat(c(-p.lambda2(), 0.0), &p).is_ok());
        assert!(nu1_hat(c(-(2.0 * p.lambda1() + p.lambda2()), 0.0), &p).is_ok());
    }

    #[test]
    fn product_form_matches_trig_form() {
        for p in [sym(), asym()] {
            for y in [0.0, 0.5, 1.0, 2.0, 5.0] {
                let trig = nu1_hat_real(y, &p).unwrap();
                let prod = nu1_hat_product(y, &p, 10_000).unwrap();
                assert_eq!(prod.product_terms, Some(20_000));
                let rel = (prod.value.re / trig - 1.0).abs();
                assert!(rel < 1e-8, "y={y}: rel={rel}");
            }
            // y = 0: every factor is one, the value is exact.
            let v0 = nu1_hat_product(0.0, &p, 10).unwrap().value.re;
            assert_eq!(v0, 2.0 / 3.0 * (2.0 * p.lambda1() + p.lambda2()));
        }
        assert!(nu1_hat_product(1.0, &sym(), 9).is_err());
        assert!(nu1_hat_product(-1.0, &sym(), 100).is_err());
    }

    #[test]
    fn telescoping_product_identity() {
        for p in [sym(), asym(), ModelParams::from_lambdas(0.3, 1.7).unwrap()] {
            let lhs = nu2_tilde_exp_moment_product(&p, 500);
            let rhs = 2.0 * (1.0 + p.mu1()) / (1.0 + p.mu2());
            assert!((lhs - rhs).abs() < 1e-8 * rhs, "lhs={lhs} rhs={rhs}");
        }
    }

    #[test]
    fn sigma_exp_moment_tends_to_two() {
        let p3 = sigma_exp_moment_partial_product(1_000);
        let p4 = sigma_exp_moment_partial_product(10_000);
        assert!((p3 - 2.0).abs() < 4.1e-3);
        assert!((p4 - 2.0).abs() < 4.1e-4);
        assert!((p4 - 2.0).abs() < (p3 - 2.0).abs());
    }

    #[test]
    fn pi_hat_normalization_and_diagonal() {
        let p = sym();
        assert_eq!(pi_hat(c(0.0, 0.0), c(0.0, 0.0), &p).unwrap().value, c(1.0, 0.0));

        // Symmetric case: pi_hat(y,y) = nu1_hat(y) / (2 lambda).
        for y in [0.5, 1.0, 2.0] {
            let lhs = pi_hat(c(y, 0.0), c(y, 0.0), &p).unwrap().value.re;
            let rhs = nu1_hat_real(y, &p).unwrap() / 2.0;
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn pi_hat_along_doubled_ray() {
        // pi_hat(2y, y) = (3/2) nu1_hat(y) / (y + 2 l1 + l2).
        for p in [sym(), asym()] {
            for y in [0.5, 1.0] {
                let lhs = pi_hat(c(2.0 * y, 0.0), c(y, 0.0), &p).unwrap().value.re;
                let rhs = 1.5 * nu1_hat_real(y, &p).unwrap()
                    / (y + 2.0 * p.lambda1() + p.lambda2());
                assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
            }
        }
    }

    #[test]
    fn pi_hat_rejects_kernel_zeros() {
        let p = sym();
        let x = c(kernel::branch_points(&p).x_plus + 1.0, 0.0);
        let y = kernel::branch_a2(x, kernel::Sign::Plus, &p);
        assert!(matches!(pi_hat(x, y, &p), Err(Error::Singularity { .. })));
    }

    #[test]
    fn ml_partial_sums() {
        // s = 0, mu = 1/2: pi/(1 - cos(pi/2)) = pi, algebraic O(1/N) tail.
        let v = ml_shifted_cosine_partial(c(0.0, 0.0), 0.5, 10_000).unwrap();
        assert!((v.re - PI).abs() < 2e-4, "got {}", v.re);

        // Complex and between-pole arguments against the direct cosine form.
        for (s, mu) in [(c(0.0, 0.3), 0.5), (c(2.5, 0.0), 0.25)] {
            let v = ml_shifted_cosine_partial(s, mu, 200_000).unwrap();
            let direct = PI / ((PI * mu * s).cos() - (PI * mu).cos());
            assert!((v - direct).norm() < 1e-4 * direct.norm().max(1.0));
        }

        // Pole collision is reported with the offending index.
        let err = ml_shifted_cosine_partial(c(1.0 + 2.0 / 0.5, 0.0), 0.5, 100).unwrap_err();
        assert!(matches!(err, Error::Singularity { index: Some(1), .. }));
    }

    #[test]
    fn carleman_boundary_condition() {
        // nu1_hat(conj y) = G(y) nu1_hat(y) on the parabola P2.
        for p in [sym(), asym()] {
            let bp = kernel::branch_points(&p);
            for i in 0..50 {
                let x = bp.x_plus + 8.0 * (i as f64 + 0.5) / 50.0;
                let y = kernel::p2_point(x, &p).unwrap();
                let n_y = nu1_hat(y, &p).unwrap().value;
                let n_conj = nu1_hat(y.conj(), &p).unwrap().value;
                let g = kernel::boundary_ratio_g(y, &p).unwrap();
                let resid = (n_conj - g * n_y).norm();
                assert!(resid < 1e-8 * (1.0 + n_y.norm()), "x={x}: resid={resid}");
            }
        }
    }

    #[test]
    fn continuation_formula() {
        // nu1_hat(y) = -[(2y - A1+(y)) / (2 A1+(y) - y)] nu2_hat(A1+(y))
        // wherever Re A1+(y) > 0; on the real axis that is y in (-lambda2, 0),
        // and the cut side y > lambda1/2 where A1+ is complex.
        for p in [sym(), asym()] {
            for i in 0..25 {
                let y = c(-p.lambda2() * (i as f64 + 0.5) / 25.0, 0.0);
                let a = kernel::branch_a1(y, kernel::Sign::Plus, &p);
                if a.re <= 0.0 {
                    continue;
                }
                let lhs = nu1_hat(y, &p).unwrap().value;
                let rhs = -(2.0 * y - a) / (2.0 * a - y) * nu2_hat(a, &p).unwrap().value;
                assert!((lhs - rhs).norm() < 1e-8 * (1.0 + lhs.norm()));
            }
            // On the cut side, Re A1+(y) = y - lambda1/2 > 0 needs
            // y > lambda1/2.
            for t in [0.2, 1.0, 4.0] {
                let y = c(p.lambda1() / 2.0 + t, 0.0);
                let a = kernel::branch_a1(y, kernel::Sign::Plus, &p);
                assert!(a.re > 0.0);
                let lhs = nu1_hat(y, &p).unwrap().value;
                let rhs = -(2.0 * y - a) / (2.0 * a - y) * nu2_hat(a, &p).unwrap().value;
                assert!((lhs - rhs).norm() < 1e-8 * (1.0 + lhs.norm()));
            }
        }
    }

    #[test]
    fn invariance_relation_on_parabola() {
        // nu1_hat(conj y)/D1(conj y) = nu1_hat(y)/D1(y) on P2.
        for p in [sym(), asym()] {
            let bp = kernel::branch_points(&p);
            for t in [0.02, 0.3, 1.0, 3.0, 7.0] {
                let y = kernel::p2_point(bp.x_plus + t, &p).unwrap();
                let lhs = nu1_hat(y.conj(), &p).unwrap().value / kernel::d1_poly(y.conj(), &p);
                let rhs = nu1_hat(y, &p).unwrap().value / kernel::d1_poly(y, &p);
                assert!((lhs - rhs).norm() < 1e-8 * (1.0 + rhs.norm()));
            }
        }
    }

    #[test]
    fn homogeneity_general() {
        // nu1_hat((l1+l2) y; l1, l2) = (l1+l2) nu1_hat(y; mu1, mu2) and the
        // same reduction for pi_hat.
        for p in [asym(), ModelParams::from_lambdas(0.3, 1.7).unwrap(), sym()] {
            let ls = p.lambda_sum();
            let q = ModelParams::from_lambdas(p.mu1(), p.mu2()).unwrap();
            for y in [0.25, 1.0, 3.0, 7.5] {
                let lhs = nu1_hat_real(ls * y, &p).unwrap();
                let rhs = ls * nu1_hat_real(y, &q).unwrap();
                assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
            }
            for (x, y) in [(0.5, 0.25), (1.0, 2.0), (3.0, 0.1), (2.0, 2.0)] {
                let lhs = pi_hat(c(ls * x, 0.0), c(ls * y, 0.0), &p).unwrap().value.re;
                let rhs = pi_hat(c(x, 0.0), c(y, 0.0), &q).unwrap().value.re;
                assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
            }
        }
    }

    #[test]
    fn homogeneity_symmetric() {
        // nu1_hat(lambda y; lambda) = lambda nu1_hat(y; 1).
        let unit = ModelParams::from_lambdas(1.0, 1.0).unwrap();
        for lambda in [0.5, 2.0, 7.0] {
            let p = ModelParams::from_lambdas(lambda, lambda).unwrap();
            for y in [0.1, 1.0, 4.0] {
                let lhs = nu1_hat_real(lambda * y, &p).unwrap();
                let rhs = lambda * nu1_hat_real(y, &unit).unwrap();
                assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
            }
        }
    }

    #[test]
    fn continuity_across_former_cut() {
        // The closed form is entire apart from poles: values just above and
        // below the old branch cut [y+, oo) agree.
        let p = asym();
        let y0 = kernel::branch_points(&p).y_plus + 0.7;
        let above = nu1_hat(c(y0, 1e-9), &p).unwrap().value;
        let below = nu1_hat(c(y0, -1e-9), &p).unwrap().value;
        assert!((above - below).norm() < 1e-7 * above.norm());
    }
}
