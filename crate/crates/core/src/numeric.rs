//! Small numeric utilities: compensated summation, digamma, and
//! Gauss-Legendre panel quadrature.

/// Kahan compensated accumulator.
///
/// Also tracks the sum of absolute values of the pushed terms, which is the
/// condition number of the summation and bounds the cancellation noise floor
/// (`ulp * abs_sum`).
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    correction: f64,
    abs_sum: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        let y = x - self.correction;
        let t = self.sum + y;
        self.correction = (t - self.sum) - y;
        self.sum = t;
        self.abs_sum += x.abs();
    }

    pub fn value(&self) -> f64 {
        self.sum
    }

    /// Sum of |terms|; `abs_sum * eps` is an honest floor on the absolute
    /// rounding error of the accumulated value.
    pub fn abs_sum(&self) -> f64 {
        self.abs_sum
    }

    /// Cancellation noise floor of the accumulated sum.
    pub fn noise_floor(&self) -> f64 {
        self.abs_sum * f64::EPSILON
    }
}

/// Digamma function for x > 0.
///
/// Upward recurrence to x >= 8, then the standard asymptotic series.
/// Absolute accuracy is ~1e-15 on the positive axis.
pub fn digamma(mut x: f64) -> f64 {
    assert!(x > 0.0, "digamma requires x > 0");
    let mut acc = 0.0;
    while x < 16.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // psi(x) ~ ln x - 1/(2x) - sum B_{2n} / (2n x^{2n})
    acc + x.ln() - 0.5 * inv
        - inv2
            * (1.0 / 12.0
                - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))))
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration on the Legendre recurrence; plenty for n <= 128.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for k in 0..m {
        // Tricomi initial guess.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative by recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let pj = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = pj;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                // One clean-up iteration after convergence.
                let mut q0 = 1.0;
                let mut q1 = x;
                for j in 2..=n {
                    let qj = ((2 * j - 1) as f64 * x * q1 - (j - 1) as f64 * q0) / j as f64;
                    q0 = q1;
                    q1 = qj;
                }
                dp = n as f64 * (x * q1 - q0) / (x * x - 1.0);
                x -= q1 / dp;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        // P'_n(0) via recurrence on [0].
        let mut p0 = 1.0;
        let mut p1 = 0.0;
        for j in 2..=n {
            let pj = -((j - 1) as f64) * p0 / j as f64;
            p0 = p1;
            p1 = pj;
        }
        // derivative at 0: n * (0*p1 - p0) / (0 - 1) = n * p0
        let dp = n as f64 * p0;
        weights[n / 2] = 2.0 / (dp * dp);
    }
    (nodes, weights)
}

/// Integrate `f` over consecutive panels `[edges[i], edges[i+1]]` with an
/// `n`-point Gauss-Legendre rule per panel.
pub fn integrate_panels(f: impl Fn(f64) -> f64, edges: &[f64], n: usize) -> f64 {
    let (xs, ws) = gauss_legendre(n);
    let mut total = KahanSum::new();
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in xs.iter().zip(&ws) {
            total.push(half * w * f(mid + half * x));
        }
    }
    total.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_cancellation() {
        let mut s = KahanSum::new();
        for _ in 0..10_000 {
            s.push(0.1);
            s.push(-0.1);
        }
        s.push(1.0);
        assert_eq!(s.value(), 1.0);
        assert!(s.abs_sum() > 1999.0);
    }

    #[test]
    fn digamma_known_values() {
        // psi(1) = -gamma
        assert!((digamma(1.0) + 0.577_215_664_901_532_9).abs() < 1e-14);
        // psi(1/2) = -gamma - 2 ln 2
        assert!((digamma(0.5) + 0.577_215_664_901_532_9 + 2.0 * (2.0_f64).ln()).abs() < 1e-13);
        // recurrence psi(x+1) = psi(x) + 1/x at an awkward point
        let x = 3.7;
        assert!((digamma(x + 1.0) - digamma(x) - 1.0 / x).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_exactness() {
        // n-point rule is exact for polynomials of degree 2n-1.
        let (xs, ws) = gauss_legendre(12);
        let integral: f64 = xs
            .iter()
            .zip(&ws)
            .map(|(x, w)| w * x.powi(22))
            .sum();
        assert!((integral - 2.0 / 23.0).abs() < 1e-14);
        let weight_sum: f64 = ws.iter().sum();
        assert!((weight_sum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn panel_integration_exp() {
        let v = integrate_panels(|x| (-x).exp(), &[0.0, 1.0, 3.0, 10.0], 32);
        assert!((v - (1.0 - (-10.0_f64).exp())).abs() < 1e-13);
    }
}
