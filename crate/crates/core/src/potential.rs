//! Selection between the raw potential and the band-clipped modified one.

use alloc::{format, vec::Vec};

use crate::math::{ln, log2, powf, floor};
use crate::{Error, ModelParams, Result};

/// Which potential the sampler sees.
///
/// `Modified` keeps dyadic bands `0..=n_max` with `n_max = floor(xi_bar *
/// log2 L)`, `xi_bar = min(xi, d / alpha)`, and clips the contribution of
/// band `n` at `2^(-n gamma) ln L`. Traps beyond band `n_max` (in particular
/// every trap of radius above `2 L^xi_bar`) are ignored.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PotentialSpec {
    Raw,
    Modified(Modified),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Modified {
    pub scale: f64,
    pub xi: f64,
    pub xi_bar: f64,
    pub n_max: u32,
    /// Clip level per band, `clips[n] = 2^(-n gamma) ln L`.
    pub clips: Vec<f64>,
}

impl PotentialSpec {
    pub fn raw() -> Self {
        PotentialSpec::Raw
    }

    pub fn modified(params: &ModelParams, scale: f64, xi: f64) -> Result<Self> {
        if !(xi > 0.5 && xi < 1.0) {
            return Err(Error::invalid(format!("xi must lie in (1/2, 1) (xi = {xi})")));
        }
        if !scale.is_finite() || scale <= 1.0 {
            return Err(Error::invalid(format!("L must exceed 1 for the modified potential (L = {scale})")));
        }
        let xi_bar = xi_bar(params, xi);
        let n_max = floor(xi_bar * log2(scale)) as u32;
        let log_l = ln(scale);
        let clips = (0..=n_max)
            .map(|n| powf(2.0, -(n as f64) * params.gamma) * log_l)
            .collect();
        Ok(PotentialSpec::Modified(Modified { scale, xi, xi_bar, n_max, clips }))
    }

    pub fn is_raw(&self) -> bool {
        matches!(self, PotentialSpec::Raw)
    }

    /// Largest radius the potential can see, if bounded.
    pub fn radius_cutoff(&self) -> Option<f64> {
        match self {
            PotentialSpec::Raw => None,
            PotentialSpec::Modified(m) => Some(2.0 * powf(m.scale, m.xi_bar)),
        }
    }

    /// Upper bound `ln L * sum_n 2^(-n gamma)` on the modified potential.
    pub fn ceiling(&self) -> Option<f64> {
        match self {
            PotentialSpec::Raw => None,
            PotentialSpec::Modified(m) => Some(m.clips.iter().sum()),
        }
    }
}

/// `min(xi, d / alpha)`.
pub fn xi_bar(params: &ModelParams, xi: f64) -> f64 {
    xi.min(params.d as f64 / params.alpha)
}
