//! Closed-form exponent bounds.

use alloc::format;

use crate::potential::xi_bar;
use crate::{Error, ModelParams, Result};

/// Tolerance used to decide the corollary regime `alpha - d = gamma`.
pub const COROLLARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundSet {
    /// Upper bound on the transversal exponent.
    pub xi_tilde: f64,
    /// Literal `min(1/2, 1/(1+alpha-d), 3/(3+2 gamma+alpha-d))`.
    pub xi_lower: f64,
    /// Concentration exponent at the given `xi`.
    pub chi: f64,
    pub xi: f64,
    pub xi_bar: f64,
    pub corollary_applies: bool,
    /// `1/(1+gamma)` when the corollary applies.
    pub corollary_value: Option<f64>,
}

pub fn xi_tilde(p: &ModelParams) -> f64 {
    let d = p.d as f64;
    let inner = (1.0 / (1.0 + p.gamma)).min((2.0 + d) / (2.0 * p.alpha));
    0.75f64.max(1.0 / (1.0 + p.alpha - d)).max(inner)
}

pub fn chi(p: &ModelParams, xi: f64) -> f64 {
    let d = p.d as f64;
    let xb = xi_bar(p, xi);
    0.5f64
        .max((1.0 - p.gamma) * xb)
        .max(0.5 * (1.0 + xb * (1.0 + d - 2.0 * p.gamma - p.alpha)))
}

pub fn xi_lower(p: &ModelParams) -> f64 {
    let ad = p.alpha - p.d as f64;
    0.5f64.min(1.0 / (1.0 + ad)).min(3.0 / (3.0 + 2.0 * p.gamma + ad))
}

pub fn corollary_applies(p: &ModelParams) -> bool {
    let ad = p.alpha - p.d as f64;
    (ad - p.gamma).abs() <= COROLLARY_TOL && p.gamma <= 1.0 / 3.0 + COROLLARY_TOL
}

pub fn theoretical_bounds(params: &ModelParams, xi: f64) -> Result<BoundSet> {
    params.validate()?;
    if !(xi > 0.5 && xi < 1.0) {
        return Err(Error::invalid(format!("xi must lie in (1/2, 1) (xi = {xi})")));
    }
    let applies = corollary_applies(params);
    Ok(BoundSet {
        xi_tilde: xi_tilde(params),
        xi_lower: xi_lower(params),
        chi: chi(params, xi),
        xi,
        xi_bar: xi_bar(params, xi),
        corollary_applies: applies,
        corollary_value: applies.then(|| 1.0 / (1.0 + params.gamma)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn default_params() {
        let p = ModelParams::new(2, 2.2, 0.2, 0.5).unwrap();
        let b = theoretical_bounds(&p, 5.0 / 6.0).unwrap();
        assert!(close(b.xi_tilde, 5.0 / 6.0));
        assert!(close(b.chi, 2.0 / 3.0));
        assert!(b.corollary_applies);
        assert!(close(b.corollary_value.unwrap(), 5.0 / 6.0));
        assert!(close(b.xi_lower, 0.5));
    }

    #[test]
    fn heavy_gamma() {
        let p = ModelParams::new(2, 4.0, 2.0, 0.5).unwrap();
        let b = theoretical_bounds(&p, 0.75).unwrap();
        assert!(close(b.xi_tilde, 0.75));
        assert!(!b.corollary_applies);
        assert_eq!(b.corollary_value, None);
    }

    #[test]
    fn rejects_bad_xi() {
        let p = ModelParams::new(2, 2.2, 0.2, 0.5).unwrap();
        assert!(theoretical_bounds(&p, 0.5).is_err());
        assert!(theoretical_bounds(&p, 1.0).is_err());
        let bad = ModelParams { d: 2, alpha: 1.9, gamma: 0.2, lambda: 0.5 };
        assert!(theoretical_bounds(&bad, 0.8).is_err());
    }
}
