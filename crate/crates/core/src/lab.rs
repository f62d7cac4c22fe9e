//! Experiment kernels: disorder sweeps over `L`, the point-to-point
//! `alpha(r)` curve, band resampling and the raw/modified comparison.
//!
//! Everything here is sequential and deterministic given the master seed.
//! Parallel drivers call the per-unit functions and fold in index order.

use alloc::{format, string::String, vec, vec::Vec};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use crate::field::sample_field;
use crate::geometry::{Geometry, GeometryKind};
use crate::math::{ceil, log2, powf, sqrt};
use crate::potential::PotentialSpec;
use crate::smc::{smc_run, SmcConfig, XiEstimate};
use crate::stats::{mean, median, std_dev};
use crate::{Error, ModelParams, Result, TrapField};

const SWEEP: u64 = 0x5eed_0001;
const ALPHA: u64 = 0x5eed_0002;
const BAND: u64 = 0x5eed_0003;

/// Bootstrap resamples for the `alpha(r)` increase test.
pub const BOOTSTRAP_DRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepConfig {
    pub params: ModelParams,
    pub l_grid: Vec<f64>,
    pub replicas: usize,
    /// Exponent of the modified potential.
    pub xi: f64,
    pub smc: SmcConfig,
    pub master_seed: u64,
    /// `false` runs the no-trap control.
    pub traps: bool,
    pub geometry: GeometryKind,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.smc.validate()?;
        if self.l_grid.len() < 1 || self.l_grid.iter().any(|&l| !(l > 1.0) || !l.is_finite()) {
            return Err(Error::invalid("L grid must be non-empty with every L > 1"));
        }
        if self.l_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("L grid must be increasing"));
        }
        if self.replicas < 1 {
            return Err(Error::invalid("replicas must be at least 1"));
        }
        if !(self.xi > 0.5 && self.xi < 1.0) {
            return Err(Error::invalid(format!("xi must lie in (1/2, 1) (xi = {})", self.xi)));
        }
        Ok(())
    }

    pub fn units(&self) -> usize {
        self.l_grid.len() * self.replicas
    }

    /// `(l_index, replica)` of unit `k`; units are ordered by `L`, then replica.
    pub fn unit(&self, k: usize) -> (usize, usize) {
        (k / self.replicas, k % self.replicas)
    }
}

/// Result for one `(L, replica)` pair.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRecord {
    pub scale: f64,
    pub l_index: usize,
    pub replica: usize,
    pub field_seed: u64,
    pub smc_seed: u64,
    pub traps: usize,
    pub log_z: f64,
    pub log_z_stderr: f64,
    pub mu_a: Vec<XiEstimate>,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub escape_fraction: f64,
    pub hits: usize,
    pub resamples: u32,
    /// `None` for a completed run.
    pub error: Option<String>,
}

impl SweepRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

pub fn sweep_seeds(master: u64, l_index: usize, replica: usize) -> (u64, u64) {
    let base = [SWEEP, l_index as u64, replica as u64];
    (
        crate::derive_seed(master, &[base[0], base[1], base[2], 0]),
        crate::derive_seed(master, &[base[0], base[1], base[2], 1]),
    )
}

/// Smallest power of two covering band `n_max` of the modified potential.
pub fn modified_r_max(spec: &PotentialSpec) -> f64 {
    match spec {
        PotentialSpec::Modified(m) => powf(2.0, (m.n_max + 1) as f64),
        PotentialSpec::Raw => f64::INFINITY,
    }
}

fn geometry_for(kind: GeometryKind, d: usize, l: f64) -> Result<Geometry> {
    match kind {
        GeometryKind::Hyperplane => Geometry::hyperplane(d, l),
        GeometryKind::Ball => Geometry::ball(d, l),
    }
}

/// Field and target for sweep unit `(l_index, replica)`.
pub fn sweep_setup(cfg: &SweepConfig, l_index: usize, replica: usize) -> Result<(TrapField, PotentialSpec, Geometry)> {
    let l = cfg.l_grid[l_index];
    let (field_seed, _) = sweep_seeds(cfg.master_seed, l_index, replica);
    let geom = geometry_for(cfg.geometry, cfg.params.d, l)?;
    let spec = PotentialSpec::modified(&cfg.params, l, cfg.xi)?;
    let window = geom.required_window(cfg.smc.xi_max().max(cfg.xi));
    let field = if cfg.traps {
        sample_field(cfg.params, window, modified_r_max(&spec), field_seed)?
    } else {
        TrapField::empty(cfg.params, window)?
    };
    Ok((field, spec, geom))
}

/// Runs one sweep unit; failures are recorded rather than returned.
pub fn run_sweep_unit(cfg: &SweepConfig, l_index: usize, replica: usize) -> SweepRecord {
    let (field_seed, smc_seed) = sweep_seeds(cfg.master_seed, l_index, replica);
    let mut rec = SweepRecord {
        scale: cfg.l_grid[l_index],
        l_index,
        replica,
        field_seed,
        smc_seed,
        traps: 0,
        log_z: f64::NAN,
        log_z_stderr: f64::NAN,
        mu_a: Vec::new(),
        q50: f64::NAN,
        q90: f64::NAN,
        q99: f64::NAN,
        escape_fraction: f64::NAN,
        hits: 0,
        resamples: 0,
        error: None,
    };
    let run = sweep_setup(cfg, l_index, replica).and_then(|(field, spec, geom)| {
        rec.traps = field.len();
        let smc = SmcConfig { seed: smc_seed, ..cfg.smc.clone() };
        smc_run(&field, &spec, &geom, &smc)
    });
    match run {
        Ok(r) => {
            rec.log_z = r.log_z_hat;
            rec.log_z_stderr = r.log_z_stderr;
            rec.mu_a = r.mu_a;
            [rec.q50, rec.q90, rec.q99] = r.fluct_quantiles;
            rec.escape_fraction = r.escape_fraction;
            rec.hits = r.hits;
            rec.resamples = r.resamples;
            if r.hits == 0 {
                rec.error = Some("no particle reached the target".into());
            }
        }
        Err(e) => rec.error = Some(format!("{e}")),
    }
    rec
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    Ok((0..cfg.units())
        .map(|k| {
            let (i, r) = cfg.unit(k);
            run_sweep_unit(cfg, i, r)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlphaConfig {
    pub params: ModelParams,
    pub r_grid: Vec<f64>,
    pub replicas: usize,
    pub xi: f64,
    pub smc: SmcConfig,
    pub master_seed: u64,
    pub traps: bool,
}

impl AlphaConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.smc.validate()?;
        if self.r_grid.is_empty() || self.r_grid.iter().any(|&r| !(r > 1.0) || !r.is_finite()) {
            return Err(Error::invalid("r grid must be non-empty with every r > 1"));
        }
        if self.r_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("r grid must be increasing"));
        }
        if self.replicas < 2 {
            return Err(Error::invalid("alpha curve needs at least 2 replicas"));
        }
        if !(self.xi > 0.5 && self.xi < 1.0) {
            return Err(Error::invalid(format!("xi must lie in (1/2, 1) (xi = {})", self.xi)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlphaPoint {
    pub r: f64,
    /// Mean of `-log Z` over replicas.
    pub mean: f64,
    pub stderr: f64,
    /// `-log Z` per replica.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlphaCurve {
    pub points: Vec<AlphaPoint>,
    /// For consecutive grid points, the fraction of replica bootstrap
    /// resamples in which the mean increases.
    pub increase_fraction: Vec<f64>,
}

/// One replica of the curve: `-log Z(0, y_r)` for every `r` on a single field
/// large enough for the largest `r`.
pub fn alpha_replica(cfg: &AlphaConfig, replica: usize) -> Result<Vec<f64>> {
    let d = cfg.params.d;
    let r_top = *cfg.r_grid.last().unwrap();
    let field_seed = crate::derive_seed(cfg.master_seed, &[ALPHA, replica as u64, 0]);
    let top = Geometry::ball(d, r_top)?;
    let window = top.required_window(cfg.smc.xi_max().max(cfg.xi));
    let top_spec = PotentialSpec::modified(&cfg.params, r_top, cfg.xi)?;
    let field = if cfg.traps {
        sample_field(cfg.params, window, modified_r_max(&top_spec), field_seed)?
    } else {
        TrapField::empty(cfg.params, window)?
    };
    cfg.r_grid
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let geom = Geometry::ball(d, r)?;
            let spec = PotentialSpec::modified(&cfg.params, r, cfg.xi)?;
            let seed = crate::derive_seed(cfg.master_seed, &[ALPHA, replica as u64, 1, k as u64]);
            let smc = SmcConfig { seed, ..cfg.smc.clone() };
            Ok(-smc_run(&field, &spec, &geom, &smc)?.log_z_hat)
        })
        .collect()
}

/// Assembles the curve from per-replica values (replica-major).
pub fn alpha_curve_from(cfg: &AlphaConfig, per_replica: &[Vec<f64>]) -> AlphaCurve {
    let n = per_replica.len();
    let points: Vec<AlphaPoint> = cfg
        .r_grid
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let values: Vec<f64> = per_replica.iter().map(|v| v[k]).collect();
            AlphaPoint { r, mean: mean(&values), stderr: std_dev(&values) / sqrt(n as f64), values }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(cfg.master_seed, &[ALPHA, u64::MAX]));
    let mut increase = vec![0usize; points.len().saturating_sub(1)];
    let mut sums = vec![0.0; points.len()];
    for _ in 0..BOOTSTRAP_DRAWS {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for _ in 0..n {
            let j = rng.random_range(0..n);
            for (s, v) in sums.iter_mut().zip(&per_replica[j]) {
                *s += v;
            }
        }
        for (k, c) in increase.iter_mut().enumerate() {
            if sums[k + 1] > sums[k] {
                *c += 1;
            }
        }
    }
    AlphaCurve {
        points,
        increase_fraction: increase.iter().map(|&c| c as f64 / BOOTSTRAP_DRAWS as f64).collect(),
    }
}

pub fn alpha_curve(cfg: &AlphaConfig) -> Result<AlphaCurve> {
    cfg.validate()?;
    let per: Vec<Vec<f64>> = (0..cfg.replicas).map(|k| alpha_replica(cfg, k)).collect::<Result<_>>()?;
    Ok(alpha_curve_from(cfg, &per))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BandResample {
    /// Dyadic band (`None` when every band is redrawn).
    pub band: Option<u32>,
    pub base_log_z: f64,
    /// `log Z` on each redrawn field.
    pub log_z: Vec<f64>,
    /// `|log Z(omega) - log Z(omega')|` per replacement.
    pub deltas: Vec<f64>,
    pub median_delta: f64,
}

/// Highest band the potential can see.
pub fn top_band(field: &TrapField, spec: &PotentialSpec) -> u32 {
    match spec {
        PotentialSpec::Modified(m) => m.n_max,
        PotentialSpec::Raw => crate::field::band_limit(field.r_max()),
    }
}

pub fn band_resample_seed(seed: u64, band: Option<u32>, k: usize) -> u64 {
    crate::derive_seed(seed, &[BAND, band.map_or(u64::MAX, u64::from), k as u64])
}

/// Replaces the traps with radius in `[2^band, 2^(band+1))` by independent
/// copies and reruns the sampler with the same path noise. `band = None`
/// redraws every band.
pub fn band_resample_experiment(
    field: &TrapField,
    spec: &PotentialSpec,
    geom: &Geometry,
    band: Option<u32>,
    replicas: usize,
    smc: &SmcConfig,
    seed: u64,
) -> Result<BandResample> {
    if let Some(n) = band {
        let top = top_band(field, spec);
        if n > top {
            return Err(Error::invalid(format!("band {n} outside [0, {top}]")));
        }
    }
    if replicas < 1 {
        return Err(Error::invalid("replicas must be at least 1"));
    }
    let base = smc_run(field, spec, geom, smc)?.log_z_hat;
    let mut log_z = Vec::with_capacity(replicas);
    for k in 0..replicas {
        let fresh = band_resample_seed(seed, band, k);
        let other = match band {
            Some(n) if n <= crate::field::band_limit(field.r_max()) => field.with_band_redrawn(n, fresh)?,
            // a band above the sampled range stays empty
            Some(_) => field.clone(),
            None => field.with_all_bands_redrawn(fresh)?,
        };
        log_z.push(smc_run(&other, spec, geom, smc)?.log_z_hat);
    }
    let deltas: Vec<f64> = log_z.iter().map(|z| (z - base).abs()).collect();
    Ok(BandResample { band, base_log_z: base, median_delta: median(&deltas), log_z, deltas })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PotentialComparison {
    pub xi: f64,
    pub mu_raw: f64,
    pub mu_modified: f64,
    pub gap: f64,
    pub log_z_raw: f64,
    pub log_z_modified: f64,
}

/// `mu(A^xi)` under the raw and the modified potential with common noise.
pub fn modified_vs_raw(field: &TrapField, geom: &Geometry, xi: f64, smc: &SmcConfig) -> Result<PotentialComparison> {
    let modified = PotentialSpec::modified(field.params(), geom.scale(), xi)?;
    let cfg = SmcConfig { xi_grid: vec![xi], ..smc.clone() };
    let raw = smc_run(field, &PotentialSpec::Raw, geom, &cfg)?;
    let md = smc_run(field, &modified, geom, &cfg)?;
    let first = |r: &crate::SmcResult| r.mu_a.first().map(|m| m.value).ok_or(Error::EmptyEnsemble);
    let (mu_raw, mu_modified) = (first(&raw)?, first(&md)?);
    Ok(PotentialComparison {
        xi,
        mu_raw,
        mu_modified,
        gap: (mu_raw - mu_modified).abs(),
        log_z_raw: raw.log_z_hat,
        log_z_modified: md.log_z_hat,
    })
}

/// Default `r_max` for raw-potential runs: the truncation budget power of
/// two, but never below the modified cutoff `2 L^xi_bar`.
pub fn raw_r_max(params: &ModelParams, window: &crate::Window, scale: f64, xi: f64) -> Result<f64> {
    let cutoff = 2.0 * powf(scale, crate::potential::xi_bar(params, xi));
    let floor_pow2 = powf(2.0, ceil(log2(cutoff)));
    crate::field::auto_r_max(params, window, floor_pow2, crate::field::TRUNCATION_BUDGET)
}
