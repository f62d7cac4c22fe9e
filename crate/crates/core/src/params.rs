use alloc::format;

use crate::{Error, Result};

/// Model parameters of the trap field and the killing rate.
///
/// Radii have tail `nu([r, inf)) = r^-alpha` for `r >= 1`; a trap of radius
/// `r` adds `r^-gamma` to the killing rate inside its ball.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelParams {
    pub d: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
}

impl ModelParams {
    pub fn new(d: usize, alpha: f64, gamma: f64, lambda: f64) -> Result<Self> {
        let p = ModelParams { d, alpha, gamma, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::invalid("d must be at least 1"));
        }
        if !self.alpha.is_finite() || self.alpha <= self.d as f64 {
            return Err(Error::invalid(format!(
                "alpha must exceed d (alpha = {}, d = {})",
                self.alpha, self.d
            )));
        }
        if !self.gamma.is_finite() || self.gamma <= 0.0 {
            return Err(Error::invalid(format!("gamma must be positive (gamma = {})", self.gamma)));
        }
        // lambda = 0 (pure stopping) is admitted for the no-killing control.
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::invalid(format!("lambda must be non-negative (lambda = {})", self.lambda)));
        }
        Ok(())
    }

    /// `nu([lo, hi))` for `1 <= lo <= hi`.
    pub fn radius_mass(&self, lo: f64, hi: f64) -> f64 {
        crate::math::powf(lo, -self.alpha) - crate::math::powf(hi, -self.alpha)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_alpha_at_or_below_d() {
        let e = ModelParams::new(2, 2.0, 0.2, 0.5).unwrap_err();
        assert!(alloc::string::ToString::to_string(&e).contains("alpha must exceed d"));
        assert!(ModelParams::new(2, 1.5, 0.2, 0.5).is_err());
        assert!(ModelParams::new(2, 2.2, 0.0, 0.5).is_err());
        assert!(ModelParams::new(0, 2.2, 0.2, 0.5).is_err());
        assert!(ModelParams::new(2, 2.2, 0.2, -1.0).is_err());
        assert!(ModelParams::new(2, 2.2, 0.2, 0.0).is_ok());
    }
}
