//! Log-log regression of per-scale observables.

use alloc::{collections::BTreeMap, format, string::String, vec::Vec};

use crate::math::ln;
use crate::stats::{median, ols, std_dev};
use crate::{Error, Result};

/// Minimum number of distinct scales in a fit.
pub const MIN_SCALES: usize = 4;
/// Minimum replicas per scale for the disorder standard deviation.
pub const MIN_REPLICAS_STD: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Observable {
    /// Median over replicas of the weighted 0.9-quantile of the maximal
    /// transversal displacement.
    FluctQ90,
    /// Standard deviation over replicas of `log Z`.
    LogZDisorderStd,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::FluctQ90 => "fluct_q90",
            Observable::LogZDisorderStd => "logZ_disorder_std",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fluct_q90" => Ok(Observable::FluctQ90),
            "logZ_disorder_std" => Ok(Observable::LogZDisorderStd),
            _ => Err(Error::invalid(format!(
                "unknown observable '{s}' (expected fluct_q90 or logZ_disorder_std)"
            ))),
        }
    }
}

/// Minimal per-record input of a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitInput {
    pub scale: f64,
    pub log_z: f64,
    pub q90: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExponentFit {
    pub observable: String,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub l_grid: Vec<f64>,
    /// Aggregated observable per entry of `l_grid`.
    pub values: Vec<f64>,
    /// Scales dropped because the aggregate was not positive or finite.
    pub excluded: Vec<f64>,
}

pub fn fit_exponent(records: &[FitInput], obs: Observable) -> Result<ExponentFit> {
    let mut groups: BTreeMap<u64, (f64, Vec<FitInput>)> = BTreeMap::new();
    for r in records {
        if !(r.scale > 0.0 && r.scale.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive (L = {})", r.scale)));
        }
        groups.entry(r.scale.to_bits()).or_insert_with(|| (r.scale, Vec::new())).1.push(*r);
    }
    if groups.len() < MIN_SCALES {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_SCALES} distinct L values, got {}",
            groups.len()
        )));
    }

    let mut l_grid = Vec::new();
    let mut values = Vec::new();
    let mut excluded = Vec::new();
    for (scale, rs) in groups.values() {
        let v = match obs {
            Observable::FluctQ90 => {
                let qs: Vec<f64> = rs.iter().map(|r| r.q90).filter(|q| q.is_finite()).collect();
                median(&qs)
            }
            Observable::LogZDisorderStd => {
                let zs: Vec<f64> = rs.iter().map(|r| r.log_z).filter(|z| z.is_finite()).collect();
                if zs.len() < MIN_REPLICAS_STD {
                    return Err(Error::InsufficientData(format!(
                        "need at least {MIN_REPLICAS_STD} replicas at L = {scale}, got {}",
                        zs.len()
                    )));
                }
                std_dev(&zs)
            }
        };
        if v > 0.0 && v.is_finite() {
            l_grid.push(*scale);
            values.push(v);
        } else {
            excluded.push(*scale);
        }
    }
    if l_grid.len() < MIN_SCALES {
        return Err(Error::InsufficientData(format!(
            "only {} L values with a positive observable after exclusion",
            l_grid.len()
        )));
    }
    let xs: Vec<f64> = l_grid.iter().map(|&l| ln(l)).collect();
    let ys: Vec<f64> = values.iter().map(|&v| ln(v)).collect();
    let line = ols(&xs, &ys).ok_or_else(|| Error::InsufficientData("degenerate regression".into()))?;
    Ok(ExponentFit {
        observable: obs.name().into(),
        slope: line.slope,
        intercept: line.intercept,
        stderr: line.stderr,
        r_squared: line.r_squared,
        l_grid,
        values,
        excluded,
    })
}
