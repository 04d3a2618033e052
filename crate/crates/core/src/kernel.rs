//! The kernel K(x,y) = (x-y)^2 + lambda1 x + lambda2 y, its dual K*, the
//! algebraic branches solving K = 0, the image parabola P2 with interior D2,
//! the conformal gluing map W, the decoupling cubics D1/D2, and the boundary
//! ratio G of the Carleman problem.
//!
//! All square roots and logarithms use principal determinations; evaluation
//! exactly on a cut takes the "+" side limit (the branches are complex
//! conjugates across their cut).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Branch points of A2 (in x) and A1 (in y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoints {
    /// x+ = lambda2^2 / (4 (lambda1 + lambda2))
    pub x_plus: f64,
    /// y+ = lambda1^2 / (4 (lambda1 + lambda2))
    pub y_plus: f64,
}

pub fn branch_points(p: &ModelParams) -> BranchPoints {
    let ls = p.lambda_sum();
    BranchPoints {
        x_plus: p.lambda2() * p.lambda2() / (4.0 * ls),
        y_plus: p.lambda1() * p.lambda1() / (4.0 * ls),
    }
}

/// Which branch of a bivalued algebraic function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// K(x,y) = (x-y)^2 + lambda1 x + lambda2 y.
pub fn k(x: Complex64, y: Complex64, p: &ModelParams) -> Complex64 {
    let d = x - y;
    d * d + p.lambda1() * x + p.lambda2() * y
}

/// Dual kernel K*(a,b) = (a-b)^2 - lambda1 a - lambda2 b.
///
/// Exponential densities e^{-au-bv} are annihilated by the adjoint generator
/// exactly when K*(a,b) = 0.
pub fn k_star(a: f64, b: f64, p: &ModelParams) -> f64 {
    let d = a - b;
    d * d - p.lambda1() * a - p.lambda2() * b
}

/// A1^{+-}(y) = -lambda1/2 + y +- sqrt(lambda1^2/4 - (lambda1+lambda2) y),
/// the solutions in x of K(x, y) = 0.
pub fn branch_a1(y: Complex64, sign: Sign, p: &ModelParams) -> Complex64 {
    let root = (Complex64::new(p.lambda1() * p.lambda1() / 4.0, 0.0) - p.lambda_sum() * y).sqrt();
    let base = y - p.lambda1() / 2.0;
    match sign {
        Sign::Plus => base + root,
        Sign::Minus => base - root,
    }
}

/// A2^{+-}(x) = -lambda2/2 + x +- sqrt(lambda2^2/4 - (lambda1+lambda2) x),
/// the solutions in y of K(x, y) = 0.
pub fn branch_a2(x: Complex64, sign: Sign, p: &ModelParams) -> Complex64 {
    let root = (Complex64::new(p.lambda2() * p.lambda2() / 4.0, 0.0) - p.lambda_sum() * x).sqrt();
    let base = x - p.lambda2() / 2.0;
    match sign {
        Sign::Plus => base + root,
        Sign::Minus => base - root,
    }
}

/// Point of the parabola P2 = A2^{+-}([x+, oo)), upper branch.
///
/// For x >= x+ returns A2^+(x) computed in real arithmetic, so the imaginary
/// part is exactly sqrt((lambda1+lambda2) x - lambda2^2/4) >= 0.
pub fn p2_point(x: f64, p: &ModelParams) -> Result<Complex64> {
    let bp = branch_points(p);
    if x < bp.x_plus {
        return Err(Error::Domain(format!(
            "p2_point requires x >= x+ = {}, got {x}",
            bp.x_plus
        )));
    }
    let im2 = p.lambda_sum() * x - p.lambda2() * p.lambda2() / 4.0;
    Ok(Complex64::new(
        x - p.lambda2() / 2.0,
        im2.max(0.0).sqrt(),
    ))
}

/// Residual of the parabola equation
/// (Im y)^2 - (lambda1+lambda2) Re y - lambda2 (2 lambda1 + lambda2)/4;
/// zero exactly on P2.
pub fn p2_residual(y: Complex64, p: &ModelParams) -> f64 {
    y.im * y.im - p.lambda_sum() * y.re - p.lambda2() * (2.0 * p.lambda1() + p.lambda2()) / 4.0
}

/// Location of a point relative to the parabola P2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Strictly inside D2.
    Interior,
    /// Within 1e-12 (scaled) of the parabola.
    Boundary,
    /// Strictly outside.
    Exterior,
}

/// Classify a point against D2 (interior of P2). Points whose parabola
/// residual is below 1e-12 (relative to the point's scale) count as boundary.
pub fn d2_region(y: Complex64, p: &ModelParams) -> Region {
    let r = p2_residual(y, p);
    let scale = 1.0 + y.norm_sqr() + p.lambda_sum() * y.re.abs();
    if r.abs() <= 1e-12 * scale {
        Region::Boundary
    } else if r < 0.0 {
        Region::Interior
    } else {
        Region::Exterior
    }
}

/// cos(pi sqrt(w)) for real w of either sign, as a real number:
/// cos(pi sqrt(w)) for w >= 0 and cosh(pi sqrt(-w)) for w < 0.
///
/// This is the entire function E(w) = sum (-pi^2 w)^k / (2k)! restricted to
/// the real axis; a short series is used for |w| < 1e-8 so the two trig
/// regimes meet without any spurious loss near w = 0.
pub fn cos_pi_sqrt(w: f64) -> f64 {
    if w.abs() < 1e-8 {
        let z = std::f64::consts::PI * std::f64::consts::PI * w;
        // 1 - z/2 + z^2/24 - z^3/720 + z^4/40320
        return 1.0 + z * (-0.5 + z * (1.0 / 24.0 + z * (-1.0 / 720.0 + z / 40320.0)));
    }
    if w >= 0.0 {
        (std::f64::consts::PI * w.sqrt()).cos()
    } else {
        (std::f64::consts::PI * (-w).sqrt()).cosh()
    }
}

/// cos(pi sqrt(w)) for complex w. Entire in w: cos is even, so the branch of
/// the square root is irrelevant.
pub fn cos_pi_sqrt_c(w: Complex64) -> Complex64 {
    if w.im == 0.0 {
        return Complex64::new(cos_pi_sqrt(w.re), 0.0);
    }
    (std::f64::consts::PI * w.sqrt()).cos()
}

/// Conformal gluing function
/// W(y) = cosh^2( pi sqrt( y/(l1+l2) - l1^2 / (4 (l1+l2)^2) ) ).
///
/// W maps D2 conformally onto the slit plane C \ (-oo, 0] and identifies the
/// conjugate boundary points of P2 with points of (-oo, 0].
pub fn w_map(y: Complex64, p: &ModelParams) -> Complex64 {
    let bp = branch_points(p);
    // cosh^2(pi sqrt(v)) = cos^2(pi sqrt(-v)) with v = (y - y+)/(l1+l2).
    let c = cos_pi_sqrt_c((Complex64::new(bp.y_plus, 0.0) - y) / p.lambda_sum());
    c * c
}

/// Inverse gluing function on the slit plane,
/// W^{-1}(z) = l1^2/(4(l1+l2)) + (l1+l2)/pi^2 * ln^2( sqrt(z) - sqrt(z-1) ).
pub fn w_inv(z: Complex64, p: &ModelParams) -> Result<Complex64> {
    if z.im == 0.0 && z.re <= 0.0 {
        return Err(Error::Domain(format!(
            "w_inv is not defined on the slit (-oo, 0]: z = {}",
            z.re
        )));
    }
    let omega = (z.sqrt() - (z - 1.0).sqrt()).ln();
    let bp = branch_points(p);
    Ok(bp.y_plus + p.lambda_sum() * omega * omega / (std::f64::consts::PI * std::f64::consts::PI))
}

/// Decoupling cubic D1(y) = y (y + lambda2) (y + 2 lambda1 + lambda2).
pub fn d1_poly(y: Complex64, p: &ModelParams) -> Complex64 {
    y * (y + p.lambda2()) * (y + 2.0 * p.lambda1() + p.lambda2())
}

/// Decoupling cubic D2(x) = x (x + lambda1) (x + 2 lambda2 + lambda1).
pub fn d2_poly(x: Complex64, p: &ModelParams) -> Complex64 {
    x * (x + p.lambda1()) * (x + 2.0 * p.lambda2() + p.lambda1())
}

/// Residual of the decoupling identity
///
///   (x - y/2) D1(y) - (y - x/2) D2(x)
///     = 1/2 (x^2 - y^2 + (l1 + 2 l2) x - (2 l1 + l2) y) K(x,y),
///
/// which vanishes identically as a polynomial in (x, y).
pub fn decoupling_residual(x: Complex64, y: Complex64, p: &ModelParams) -> Complex64 {
    let lhs = (x - y / 2.0) * d1_poly(y, p) - (y - x / 2.0) * d2_poly(x, p);
    let factor = x * x - y * y + (p.lambda1() + 2.0 * p.lambda2()) * x
        - (2.0 * p.lambda1() + p.lambda2()) * y;
    lhs - 0.5 * factor * k(x, y, p)
}

/// Boundary ratio of the Carleman problem,
///
///   G(y) = (2 A1+(y) - y)/(2 y - A1+(y)) * (2 conj(y) - A1+(y))/(2 A1+(y) - conj(y)).
///
/// On P2 it satisfies G(y) = D1(conj y) / D1(y) and |G| = 1.
pub fn boundary_ratio_g(y: Complex64, p: &ModelParams) -> Result<Complex64> {
    let a = branch_a1(y, Sign::Plus, p);
    let yc = y.conj();
    let den1 = 2.0 * y - a;
    let den2 = 2.0 * a - yc;
    let scale = 1.0 + y.norm() + a.norm();
    for (den, which) in [(den1, "2y - A1+(y)"), (den2, "2A1+(y) - conj(y)")] {
        if den.norm() < 1e-13 * scale {
            return Err(Error::Singularity {
                re: y.re,
                im: y.im,
                index: None,
                context: format!("boundary ratio G: denominator {which} vanishes"),
            });
        }
    }
    Ok(((2.0 * a - y) / den1) * ((2.0 * yc - a) / den2))
}
