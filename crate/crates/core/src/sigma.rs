//! Lipschitz nonlinearities `σ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum SigmaFamily {
    /// `c0 + c1·u`
    Affine { c0: f64, c1: f64 },
    /// `amplitude·sin(frequency·u)`
    Sine { amplitude: f64, frequency: f64 },
    /// `u`
    Identity,
}

/// A nonlinearity with its Lipschitz constant. Construction through
/// [`SigmaSpec::new`] enforces `σ(1) ≠ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaSpec {
    family: SigmaFamily,
}

impl SigmaSpec {
    pub fn new(family: SigmaFamily) -> Result<Self> {
        let s = Self { family };
        for v in s.params() {
            if !v.is_finite() {
                return Err(Error::InvalidParameter("sigma parameters must be finite".into()));
            }
        }
        if s.eval(1.0) == 0.0 {
            return Err(Error::TrivialSigma);
        }
        Ok(s)
    }

    /// Bypasses the `σ(1) ≠ 0` check. Only for triviality tests.
    #[doc(hidden)]
    pub fn unchecked(family: SigmaFamily) -> Self {
        Self { family }
    }

    pub fn additive(c: f64) -> Result<Self> {
        Self::new(SigmaFamily::Affine { c0: c, c1: 0.0 })
    }

    pub fn identity() -> Self {
        Self {
            family: SigmaFamily::Identity,
        }
    }

    pub fn family(&self) -> SigmaFamily {
        self.family
    }

    fn params(&self) -> Vec<f64> {
        match self.family {
            SigmaFamily::Affine { c0, c1 } => vec![c0, c1],
            SigmaFamily::Sine { amplitude, frequency } => vec![amplitude, frequency],
            SigmaFamily::Identity => vec![],
        }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self.family {
            SigmaFamily::Affine { c0, c1 } => c0 + c1 * u,
            SigmaFamily::Sine { amplitude, frequency } => amplitude * (frequency * u).sin(),
            SigmaFamily::Identity => u,
        }
    }

    /// Lipschitz constant. Zero for constant σ, for which every bound
    /// that uses it remains valid in the limit `L → 0`.
    pub fn lipschitz(&self) -> f64 {
        match self.family {
            SigmaFamily::Affine { c1, .. } => c1.abs(),
            SigmaFamily::Sine { amplitude, frequency } => (amplitude * frequency).abs(),
            SigmaFamily::Identity => 1.0,
        }
    }

    /// `Some(c)` when σ is the constant `c`.
    pub fn constant_value(&self) -> Option<f64> {
        match self.family {
            SigmaFamily::Affine { c0, c1: 0.0 } => Some(c0),
            SigmaFamily::Sine { amplitude: 0.0, .. } => Some(0.0),
            _ => None,
        }
    }

    pub fn sigma0(&self) -> f64 {
        self.eval(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn c3_is_enforced() {
        assert_eq!(
            SigmaSpec::new(SigmaFamily::Affine { c0: 1.0, c1: -1.0 }),
            Err(Error::TrivialSigma)
        );
        assert!(SigmaSpec::new(SigmaFamily::Sine { amplitude: 0.0, frequency: 1.0 }).is_err());
        assert!(SigmaSpec::additive(0.0).is_err());
        assert!(SigmaSpec::additive(2.0).is_ok());
    }

    proptest! {
        #[test]
        fn lipschitz_constant_holds(a in -50.0f64..50.0, b in -50.0f64..50.0) {
            for s in [
                SigmaSpec::identity(),
                SigmaSpec::new(SigmaFamily::Affine { c0: 0.5, c1: -2.0 }).unwrap(),
                SigmaSpec::new(SigmaFamily::Sine { amplitude: 1.5, frequency: 0.7 }).unwrap(),
            ] {
                prop_assert!((s.eval(a) - s.eval(b)).abs() <= s.lipschitz() * (a - b).abs() * (1.0 + 1e-12) + 1e-12);
            }
        }
    }
}
