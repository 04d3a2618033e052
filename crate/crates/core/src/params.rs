//! Model parameters shared by every module.
//!
//! The three-particle system is parameterized either by the rank drifts
//! (d1, d2, d3) with d1 < d2 < d3, or directly by the positive rates
//!
//!   lambda1 = 2 (d2 - d1),   lambda2 = 2 (d3 - d2).
//!
//! Every closed-form quantity downstream depends only on (lambda1, lambda2);
//! the drifts are kept for the particle simulator. When parameters are
//! constructed from rates, the drifts are anchored at d1 = 0 (gaps are
//! translation invariant).

use crate::error::{Error, Result};

/// Relative tolerance for detecting the symmetric case lambda1 == lambda2.
const SYMMETRY_REL_TOL: f64 = 1e-14;

/// Immutable model parameters. Safe to share between threads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    deltas: [f64; 3],
    lambda1: f64,
    lambda2: f64,
}

impl ModelParams {
    /// Build from rank drifts d1 < d2 < d3 (strict).
    pub fn from_deltas(d1: f64, d2: f64, d3: f64) -> Result<Self> {
        for (name, d) in [("delta1", d1), ("delta2", d2), ("delta3", d3)] {
            if !d.is_finite() {
                return Err(Error::Parameter(format!("{name} must be finite, got {d}")));
            }
        }
        if !(d1 < d2) {
            return Err(Error::Parameter(format!(
                "delta1 < delta2 violated: {d1} >= {d2}"
            )));
        }
        if !(d2 < d3) {
            return Err(Error::Parameter(format!(
                "delta2 < delta3 violated: {d2} >= {d3}"
            )));
        }
        Ok(Self {
            deltas: [d1, d2, d3],
            lambda1: 2.0 * (d2 - d1),
            lambda2: 2.0 * (d3 - d2),
        })
    }

    /// Build from the rates lambda1 > 0, lambda2 > 0, anchoring d1 = 0.
    pub fn from_lambdas(l1: f64, l2: f64) -> Result<Self> {
        for (name, l) in [("lambda1", l1), ("lambda2", l2)] {
            if !l.is_finite() || !(l > 0.0) {
                return Err(Error::Parameter(format!(
                    "{name} must be a positive finite real, got {l}"
                )));
            }
        }
        Ok(Self {
            deltas: [0.0, l1 / 2.0, l1 / 2.0 + l2 / 2.0],
            lambda1: l1,
            lambda2: l2,
        })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// lambda1 + lambda2.
    pub fn lambda_sum(&self) -> f64 {
        self.lambda1 + self.lambda2
    }

    /// mu1 = lambda1 / (lambda1 + lambda2), in (0, 1).
    pub fn mu1(&self) -> f64 {
        self.lambda1 / (self.lambda1 + self.lambda2)
    }

    /// mu2 = 1 - mu1, so that mu1 + mu2 = 1 exactly.
    pub fn mu2(&self) -> f64 {
        1.0 - self.mu1()
    }

    /// Rank drifts (d1, d2, d3); anchored at d1 = 0 when built from rates.
    pub fn deltas(&self) -> [f64; 3] {
        self.deltas
    }

    /// True when lambda1 == lambda2 within relative 1e-14.
    pub fn symmetric(&self) -> bool {
        (self.lambda1 - self.lambda2).abs() <= SYMMETRY_REL_TOL * self.lambda1.max(self.lambda2)
    }

    /// Parameters with lambda1 and lambda2 interchanged. Used to derive the
    /// "2"-side quantities from the "1"-side formulas.
    pub fn swapped(&self) -> Self {
        Self {
            deltas: [0.0, self.lambda2 / 2.0, self.lambda2 / 2.0 + self.lambda1 / 2.0],
            lambda1: self.lambda2,
            lambda2: self.lambda1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn from_deltas_examples() {
        let p = ModelParams::from_deltas(0.0, 0.5, 1.0).unwrap();
        assert_eq!(p.lambda1(), 1.0);
        assert_eq!(p.lambda2(), 1.0);
        assert_eq!(p.mu1(), 0.5);
        assert!(p.symmetric());

        // The (1/6, 5/6) rate pair, drifts back-solved.
        let p = ModelParams::from_deltas(0.0, 1.0 / 12.0, 0.5).unwrap();
        assert!((p.lambda1() - 1.0 / 6.0).abs() < 1e-15);
        assert!((p.lambda2() - 5.0 / 6.0).abs() < 1e-15);
        assert!((p.mu1() - 1.0 / 6.0).abs() < 1e-15);
        assert!(!p.symmetric());

        let err = ModelParams::from_deltas(0.0, 0.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::Parameter(ref m) if m.contains("delta1 < delta2")));
    }

    #[test]
    fn from_lambdas_examples() {
        let p = ModelParams::from_lambdas(1.0, 1.0).unwrap();
        assert!(p.symmetric());
        assert_eq!(p.mu1(), 0.5);
        assert_eq!(p.deltas(), [0.0, 0.5, 1.0]);

        let p = ModelParams::from_lambdas(1.0 / 6.0, 5.0 / 6.0).unwrap();
        assert_eq!(p.mu1(), 1.0 / 6.0 / (1.0 / 6.0 + 5.0 / 6.0));
        assert_eq!(p.mu2(), 1.0 - p.mu1());
        assert_eq!(p.lambda_sum(), 1.0 / 6.0 + 5.0 / 6.0);

        assert!(ModelParams::from_lambdas(0.0, 1.0).is_err());
        assert!(ModelParams::from_lambdas(1.0, -2.0).is_err());
        assert!(ModelParams::from_lambdas(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn mu_sum_exact() {
        let p = ModelParams::from_lambdas(0.3, 1.7).unwrap();
        assert_eq!(p.mu1() + p.mu2(), 1.0);
    }

    #[test]
    fn swap_involution() {
        let p = ModelParams::from_lambdas(0.3, 1.7).unwrap();
        let q = p.swapped();
        assert_eq!(q.lambda1(), 1.7);
        assert_eq!(q.lambda2(), 0.3);
        assert_eq!(q.swapped().lambda1(), p.lambda1());
    }

    proptest! {
        #[test]
        fn roundtrip_bitwise(d1 in -10.0_f64..10.0, g1 in 1e-6_f64..10.0, g2 in 1e-6_f64..10.0) {
            let p = ModelParams::from_deltas(d1, d1 + g1, d1 + g1 + g2).unwrap();
            prop_assert!(p.lambda1() > 0.0 && p.lambda2() > 0.0);
            prop_assert!(p.mu1() > 0.0 && p.mu1() < 1.0);
            // Round trip reproduces the rates bit-for-bit.
            let q = ModelParams::from_lambdas(p.lambda1(), p.lambda2()).unwrap();
            prop_assert_eq!(q.lambda1().to_bits(), p.lambda1().to_bits());
            prop_assert_eq!(q.lambda2().to_bits(), p.lambda2().to_bits());
        }
    }
}
