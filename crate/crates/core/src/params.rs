//! Infection and curing rates.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpidemicParams {
    pub beta: f64,
    pub gamma: f64,
}

impl EpidemicParams {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Validation(alloc::format!(
                "beta must be positive, got {beta}"
            )));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Validation(alloc::format!(
                "gamma must be non-negative, got {gamma}"
            )));
        }
        Ok(Self { beta, gamma })
    }

    /// SI dynamics: `gamma = 0`.
    pub fn si(beta: f64) -> Result<Self> {
        Self::new(beta, 0.0)
    }

    /// Exponential rate `beta * lambda - gamma` of the linearized mode with
    /// eigenvalue `lambda`.
    pub fn alpha(&self, lambda: f64) -> f64 {
        self.beta * lambda - self.gamma
    }

    pub fn is_supercritical(&self, lambda1: f64) -> bool {
        self.beta * lambda1 > self.gamma
    }

    pub fn require_supercritical(&self, lambda1: f64) -> Result<f64> {
        if self.is_supercritical(lambda1) {
            Ok(self.alpha(lambda1))
        } else {
            Err(Error::Subcritical {
                rate: self.beta * lambda1,
                gamma: self.gamma,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold() {
        let p = EpidemicParams::new(1.0, 0.5).unwrap();
        assert!(p.is_supercritical(0.6));
        assert!(!p.is_supercritical(0.5));
        assert_eq!(p.alpha(2.0), 1.5);
        assert!(p.require_supercritical(0.4).is_err());
        assert!(EpidemicParams::new(0.0, 1.0).is_err());
        assert!(EpidemicParams::new(1.0, -1.0).is_err());
    }
}
