//! Rayon drivers. Work units are independent and results are collected in
//! unit order, so outputs do not depend on the thread count.

use rayon::prelude::*;
use trapwalk_core::lab::{alpha_curve_from, alpha_replica, run_sweep_unit, AlphaConfig, AlphaCurve, SweepConfig, SweepRecord};
use trapwalk_core::Result;

/// Environment variable holding the worker count.
pub const THREADS_ENV: &str = "TRAPWALK_THREADS";

/// Configures the global pool from `TRAPWALK_THREADS`, if set.
pub fn init_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got '{v}'"))?;
    // A pool may already exist when called twice in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn par_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    Ok((0..cfg.units())
        .into_par_iter()
        .map(|k| {
            let (i, r) = cfg.unit(k);
            run_sweep_unit(cfg, i, r)
        })
        .collect())
}

pub fn par_alpha_curve(cfg: &AlphaConfig) -> Result<AlphaCurve> {
    cfg.validate()?;
    let per: Vec<Vec<f64>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|k| alpha_replica(cfg, k))
        .collect::<Result<_>>()?;
    Ok(alpha_curve_from(cfg, &per))
}
