//! Feynman-Kac particle sampler for Brownian motion killed at rate
//! `lambda + V` and stopped at a target.
//!
//! Paths are Gaussian random walks with step variance `dt` per coordinate.
//! Each particle carries the log of its killing weight multiplied by a guide
//! `h(x) = exp(-kappa * dist(x, target))`; resampling acts on these guided
//! weights and the guide telescopes out of the normalizing-constant estimate,
//! since `h = 1` on the target. Particles leaving the window get weight zero.

use alloc::{format, string::String, vec, vec::Vec};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::StandardNormal;

use crate::cubes::{check_cube_args, CubeSet};
use crate::geometry::{Geometry, GeometryKind};
use crate::math::{exp, ln, powf, sqrt};
use crate::potential::PotentialSpec;
use crate::rng::{derive_seed, StreamRng};
use crate::stats::weighted_quantile;
use crate::{Error, Result, TrapField, DEFAULT_XI_GRID};

/// Escape fractions above this are flagged in the result.
pub const ESCAPE_WARNING: f64 = 0.01;

/// Guiding function used for resampling.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Guide {
    /// `kappa = sqrt(2 (lambda + v))`, `v` the mean potential along the axis.
    Auto,
    /// Fixed decay rate `kappa`.
    Rate(f64),
    /// No guide (`kappa = 0`): plain Feynman-Kac resampling.
    Off,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmcConfig {
    pub dt: f64,
    pub n_particles: usize,
    pub seed: u64,
    /// Tube exponents for the confinement estimates.
    pub xi_grid: Vec<f64>,
    /// Resample when `ESS < ess_fraction * N`; `0` disables resampling.
    pub ess_fraction: f64,
    /// Stop once the guided mass still in flight falls below this fraction
    /// of the total; `0` runs until every particle is stopped or `max_time`.
    pub alive_tolerance: f64,
    /// Hard time horizon; `None` picks `10 (L + 1) / kappa` (or `10 L^2`).
    pub max_time: Option<f64>,
    pub guide: Guide,
    /// Side `l` of the visited-cube registry, if tracked.
    pub cube_side: Option<f64>,
}

impl Default for SmcConfig {
    fn default() -> Self {
        SmcConfig {
            dt: 1e-3,
            n_particles: 10_000,
            seed: 0,
            xi_grid: DEFAULT_XI_GRID.to_vec(),
            ess_fraction: 0.5,
            alive_tolerance: 1e-10,
            max_time: None,
            guide: Guide::Auto,
            cube_side: None,
        }
    }
}

impl SmcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(Error::invalid(format!("dt must lie in (0, 0.1] (dt = {})", self.dt)));
        }
        if self.n_particles < 100 {
            return Err(Error::invalid(format!(
                "particles must be at least 100 (particles = {})",
                self.n_particles
            )));
        }
        if self.xi_grid.iter().any(|&x| !(x > 0.5 && x < 1.0)) {
            return Err(Error::invalid("xi_grid values must lie in (1/2, 1)"));
        }
        if !(0.0..=1.0).contains(&self.ess_fraction) {
            return Err(Error::invalid("ess_fraction must lie in [0, 1]"));
        }
        if !(self.alive_tolerance >= 0.0 && self.alive_tolerance < 1.0) {
            return Err(Error::invalid("alive_tolerance must lie in [0, 1)"));
        }
        if let Some(t) = self.max_time {
            if !(t > 0.0) {
                return Err(Error::invalid("max_time must be positive"));
            }
        }
        if let Guide::Rate(k) = self.guide {
            if !(k >= 0.0) || !k.is_finite() {
                return Err(Error::invalid("guide rate must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_grid.iter().copied().fold(0.5, f64::max)
    }
}

/// Final state of one particle that reached the target.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    /// Normalized weight among hitting particles.
    pub weight: f64,
    /// `sup_s dist(B_s, axis segment)`.
    pub max_dist: f64,
    /// Cubes touched, when tracked.
    pub cubes: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct XiEstimate {
    pub xi: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmcResult {
    pub log_z_hat: f64,
    /// Delta-method standard error of `log_z_hat` from the genealogy
    /// (Lee-Whiteley) variance estimator.
    pub log_z_stderr: f64,
    /// ESS before each resampling and at termination.
    pub ess_trace: Vec<f64>,
    pub mu_a: Vec<XiEstimate>,
    /// Weighted quantiles 0.5, 0.9, 0.99 of the maximal axis distance.
    pub fluct_quantiles: [f64; 3],
    /// `P(A_T >= n)` for the visited-cube count, if tracked.
    pub visited_cubes_tail: Vec<(u64, f64)>,
    pub n_particles: usize,
    pub dt: f64,
    pub seed: u64,
    pub scale: f64,
    pub guide_rate: f64,
    pub steps: u64,
    pub final_time: f64,
    pub resamples: u32,
    /// Particles stopped at the target at termination.
    pub hits: usize,
    /// Fraction of guided mass lost through window exits.
    pub escape_fraction: f64,
    pub escape_events: u64,
    /// Set when `escape_fraction` exceeds 1%.
    pub escape_warning: bool,
    /// Guided mass still in flight at termination, as a fraction.
    pub truncated_mass: f64,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub paths: Vec<PathSummary>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Alive,
    Hit,
    Dead,
}

/// Guide rate for `Guide::Auto`: mean potential over 64 points on the axis.
pub fn auto_guide_rate(field: &TrapField, spec: &PotentialSpec, geom: &Geometry) -> f64 {
    let n = 64;
    let d = geom.dim();
    let mut x = vec![0.0; d];
    let mut acc = 0.0;
    let mut used = 0;
    for k in 0..n {
        let t = (k as f64 + 0.5) / n as f64;
        for j in 0..d {
            x[j] = geom.start()[j] + t * (geom.end()[j] - geom.start()[j]);
        }
        if field.window().contains(&x) {
            acc += field.potential_unchecked(spec, &x);
            used += 1;
        }
    }
    let v = if used > 0 { acc / used as f64 } else { 0.0 };
    sqrt(2.0 * (field.params().lambda + v))
}

struct Ensemble {
    d: usize,
    pos: Vec<f64>,
    log_w: Vec<f64>,
    state: Vec<State>,
    guide_dist: Vec<f64>,
    max_dist2: Vec<f64>,
    eve: Vec<u32>,
    cubes: Option<Vec<CubeSet>>,
}

impl Ensemble {
    fn resample(&mut self, norm_w: &[f64], u0: f64) {
        let n = self.log_w.len();
        let d = self.d;
        let mut ancestors = Vec::with_capacity(n);
        let mut cum = 0.0;
        let mut i = 0;
        for k in 0..n {
            let target = (u0 + k as f64) / n as f64;
            while i + 1 < n && cum + norm_w[i] < target {
                cum += norm_w[i];
                i += 1;
            }
            // never pick a zero-weight slot through rounding at the tail
            let mut a = i;
            while norm_w[a] == 0.0 && a > 0 {
                a -= 1;
            }
            ancestors.push(a);
        }
        let mut pos = vec![0.0; n * d];
        for (k, &a) in ancestors.iter().enumerate() {
            pos[k * d..(k + 1) * d].copy_from_slice(&self.pos[a * d..(a + 1) * d]);
        }
        self.pos = pos;
        self.state = ancestors.iter().map(|&a| self.state[a]).collect();
        self.guide_dist = ancestors.iter().map(|&a| self.guide_dist[a]).collect();
        self.max_dist2 = ancestors.iter().map(|&a| self.max_dist2[a]).collect();
        self.eve = ancestors.iter().map(|&a| self.eve[a]).collect();
        if let Some(c) = &self.cubes {
            self.cubes = Some(ancestors.iter().map(|&a| c[a].clone()).collect());
        }
        // Guided weights are equal after resampling.
        for w in &mut self.log_w {
            *w = 0.0;
        }
    }
}

/// Runs the sampler to termination.
pub fn smc_run(field: &TrapField, spec: &PotentialSpec, geom: &Geometry, cfg: &SmcConfig) -> Result<SmcResult> {
    cfg.validate()?;
    let d = field.dim();
    if geom.dim() != d {
        return Err(Error::Dimension { expected: d, got: geom.dim() });
    }
    let required = geom.required_window(cfg.xi_max());
    if !field.window().contains_window(&required) {
        return Err(Error::invalid(format!(
            "window too small: need {:?}..{:?} for the tube at xi = {} plus 5 sqrt(L)",
            required.lo(),
            required.hi(),
            cfg.xi_max()
        )));
    }
    if geom.target_distance(geom.start()) == 0.0 {
        return Err(Error::invalid("start lies in the target"));
    }
    if let Some(side) = cfg.cube_side {
        check_cube_args(d, side)?;
    }

    let lambda = field.params().lambda;
    let kappa = match cfg.guide {
        Guide::Auto => auto_guide_rate(field, spec, geom),
        Guide::Rate(k) => k,
        Guide::Off => 0.0,
    };
    let max_time = cfg.max_time.unwrap_or_else(|| {
        if kappa > 0.0 {
            10.0 * (geom.scale() + 1.0) / kappa
        } else {
            10.0 * geom.scale() * geom.scale()
        }
    });
    let n = cfg.n_particles;
    let dt = cfg.dt;
    let sdt = sqrt(dt);
    let plane = geom.end()[0];

    let start_dist = geom.target_distance(geom.start());
    let mut ens = Ensemble {
        d,
        pos: geom.start().iter().copied().cycle().take(n * d).collect(),
        log_w: vec![-kappa * start_dist; n],
        state: vec![State::Alive; n],
        guide_dist: vec![start_dist; n],
        max_dist2: vec![geom.axis_dist2(geom.start()); n],
        eve: (0..n as u32).collect(),
        cubes: cfg.cube_side.map(|_| vec![CubeSet::default(); n]),
    };
    if let (Some(c), Some(side)) = (&mut ens.cubes, cfg.cube_side) {
        for set in c.iter_mut() {
            set.visit(geom.start(), side);
        }
    }

    let mut log_z_acc = 0.0;
    let mut ess_trace = Vec::new();
    let mut resamples = 0u32;
    let mut escape_events = 0u64;
    let mut kept_mass = 1.0f64;
    let mut step: u64 = 0;
    let mut time = 0.0;
    let mut old = vec![0.0; d];
    let mut new = vec![0.0; d];

    // Stopped particles keep their weight; only the alive list is revisited.
    let mut alive: Vec<usize> = (0..n).collect();
    let mut frozen = Lse::default();
    let mut log_total = ln(n as f64) - kappa * start_dist;
    let mut truncated;

    loop {
        let mut escaped_mass = 0.0;
        let mut still = Vec::with_capacity(alive.len());
        for &i in &alive {
            let mut rng = StreamRng::for_particle(cfg.seed, step, i as u64);
            let p = &mut ens.pos[i * d..(i + 1) * d];
            old.copy_from_slice(p);
            for j in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                new[j] = old[j] + sdt * z;
            }
            let mut step_dt = dt;
            let hit = match geom.kind() {
                GeometryKind::Hyperplane => {
                    if new[0] >= plane {
                        let f = (plane - old[0]) / (new[0] - old[0]);
                        for j in 1..d {
                            new[j] = old[j] + f * (new[j] - old[j]);
                        }
                        new[0] = plane;
                        step_dt = f * dt;
                        true
                    } else {
                        false
                    }
                }
                GeometryKind::Ball => crate::math::dist2(&new, geom.end()) <= 1.0,
            };
            if !field.window().contains(&new) {
                escaped_mass += exp(ens.log_w[i] - log_total);
                ens.state[i] = State::Dead;
                ens.log_w[i] = f64::NEG_INFINITY;
                escape_events += 1;
                continue;
            }
            let v = field.potential_unchecked(spec, &new);
            let dist = if hit { 0.0 } else { geom.target_distance(&new) };
            ens.log_w[i] += -(lambda + v) * step_dt + kappa * (ens.guide_dist[i] - dist);
            ens.guide_dist[i] = dist;
            let a2 = geom.axis_dist2(&new);
            if a2 > ens.max_dist2[i] {
                ens.max_dist2[i] = a2;
            }
            if let (Some(c), Some(side)) = (&mut ens.cubes, cfg.cube_side) {
                c[i].visit(&new, side);
            }
            p.copy_from_slice(&new);
            if hit {
                ens.state[i] = State::Hit;
                frozen.push(ens.log_w[i]);
            } else {
                still.push(i);
            }
        }
        alive = still;
        step += 1;
        time += dt;
        kept_mass *= (1.0 - escaped_mass).max(0.0);

        let mut moving = Lse::default();
        for &i in &alive {
            moving.push(ens.log_w[i]);
        }
        let all = frozen.merged(&moving);
        if all.is_empty() {
            return Err(Error::AllParticlesDied);
        }
        log_total = all.log_sum();
        let ess = exp(2.0 * log_total - all.log_sum2());
        truncated = exp(moving.log_sum() - log_total);

        if alive.is_empty() || truncated < cfg.alive_tolerance || time >= max_time {
            ess_trace.push(ess);
            break;
        }
        if ess < cfg.ess_fraction * n as f64 {
            ess_trace.push(ess);
            log_z_acc += log_total - ln(n as f64);
            let norm_w = normalized(&ens.log_w);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0x7e5a, step]));
            let u0: f64 = rng.random();
            ens.resample(&norm_w, u0);
            resamples += 1;
            alive = (0..n).filter(|&i| ens.state[i] == State::Alive).collect();
            frozen = Lse::default();
            for i in 0..n {
                if ens.state[i] == State::Hit {
                    frozen.push(0.0);
                }
            }
            log_total = ln(n as f64);
        }
    }

    let (m, total) = mass(&ens.log_w);
    let log_z_hat = log_z_acc + m + ln(total / n as f64);
    let norm_w = normalized(&ens.log_w);

    // Genealogy variance estimate of Z relative to Z^2.
    let mut eve_mass = vec![0.0; n];
    for i in 0..n {
        eve_mass[ens.eve[i] as usize] += norm_w[i];
    }
    let same: f64 = eve_mass.iter().map(|e| e * e).sum();
    let factor = powf(n as f64 / (n as f64 - 1.0), resamples as f64 + 1.0);
    let rel_var = (1.0 - factor * (1.0 - same)).max(0.0);
    let log_z_stderr = sqrt(rel_var);

    // Hitting particles form the sample of the conditioned path measure.
    let hit_mass: f64 = (0..n).filter(|&i| ens.state[i] == State::Hit).map(|i| norm_w[i]).sum();
    let paths: Vec<PathSummary> = (0..n)
        .filter(|&i| ens.state[i] == State::Hit)
        .map(|i| PathSummary {
            weight: if hit_mass > 0.0 { norm_w[i] / hit_mass } else { 0.0 },
            max_dist: sqrt(ens.max_dist2[i]),
            cubes: ens.cubes.as_ref().map(|c| c[i].len() as u64).unwrap_or(0),
        })
        .collect();

    let mut result = SmcResult {
        log_z_hat,
        log_z_stderr,
        ess_trace,
        mu_a: Vec::new(),
        fluct_quantiles: [f64::NAN; 3],
        visited_cubes_tail: Vec::new(),
        n_particles: n,
        dt,
        seed: cfg.seed,
        scale: geom.scale(),
        guide_rate: kappa,
        steps: step,
        final_time: time,
        resamples,
        hits: paths.len(),
        escape_fraction: 1.0 - kept_mass,
        escape_events,
        escape_warning: 1.0 - kept_mass > ESCAPE_WARNING,
        truncated_mass: truncated,
        paths,
    };
    if result.hits > 0 && hit_mass > 0.0 {
        result.mu_a = mu_event_estimates(&result, &cfg.xi_grid)?;
        let items: Vec<(f64, f64)> = result.paths.iter().map(|p| (p.max_dist, p.weight)).collect();
        for (slot, q) in result.fluct_quantiles.iter_mut().zip([0.5, 0.9, 0.99]) {
            *slot = weighted_quantile(&items, q).unwrap_or(f64::NAN);
        }
        if cfg.cube_side.is_some() {
            result.visited_cubes_tail = visited_cubes_tail(&result);
        }
    }
    Ok(result)
}

/// Running log-sum-exp of weights and squared weights.
#[derive(Default, Clone, Copy)]
struct Lse {
    max: f64,
    sum: f64,
    sum2: f64,
    count: usize,
}

impl Lse {
    fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if self.count == 0 {
            *self = Lse { max: x, sum: 1.0, sum2: 1.0, count: 1 };
            return;
        }
        if x > self.max {
            let r = exp(self.max - x);
            self.sum = self.sum * r + 1.0;
            self.sum2 = self.sum2 * r * r + 1.0;
            self.max = x;
        } else {
            let w = exp(x - self.max);
            self.sum += w;
            self.sum2 += w * w;
        }
        self.count += 1;
    }

    fn merged(&self, other: &Lse) -> Lse {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let max = self.max.max(other.max);
        let (a, b) = (exp(self.max - max), exp(other.max - max));
        Lse {
            max,
            sum: self.sum * a + other.sum * b,
            sum2: self.sum2 * a * a + other.sum2 * b * b,
            count: self.count + other.count,
        }
    }

    fn is_empty(&self) -> bool {
        self.count == 0 || !(self.sum > 0.0)
    }

    fn log_sum(&self) -> f64 {
        if self.count == 0 {
            f64::NEG_INFINITY
        } else {
            self.max + ln(self.sum)
        }
    }

    fn log_sum2(&self) -> f64 {
        if self.count == 0 {
            f64::NEG_INFINITY
        } else {
            2.0 * self.max + ln(self.sum2)
        }
    }
}

fn normalized(log_w: &[f64]) -> Vec<f64> {
    let (m, total) = mass(log_w);
    log_w
        .iter()
        .map(|&x| if x == f64::NEG_INFINITY || !(total > 0.0) { 0.0 } else { exp(x - m) / total })
        .collect()
}

fn mass(log_w: &[f64]) -> (f64, f64) {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return (0.0, 0.0);
    }
    let total = log_w
        .iter()
        .map(|&x| if x == f64::NEG_INFINITY { 0.0 } else { exp(x - m) })
        .sum();
    (m, total)
}

/// Weighted fraction of hitting paths that never left the tube of radius
/// `L^xi`, for each `xi`.
pub fn mu_event_estimates(result: &SmcResult, xi_grid: &[f64]) -> Result<Vec<XiEstimate>> {
    if let Some(x) = xi_grid.iter().find(|&&x| !(x > 0.5 && x < 1.0)) {
        return Err(Error::invalid(format!("xi = {x} outside (1/2, 1)")));
    }
    xi_grid
        .iter()
        .map(|&xi| Ok(XiEstimate { xi, value: tube_fraction(result, powf(result.scale, xi))? }))
        .collect()
}

/// Weighted fraction of hitting paths whose maximal axis distance is at most
/// `radius`.
pub fn tube_fraction(result: &SmcResult, radius: f64) -> Result<f64> {
    if result.paths.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let total: f64 = result.paths.iter().map(|p| p.weight).sum();
    let inside: f64 = result
        .paths
        .iter()
        .map(|p| if p.max_dist <= radius { p.weight } else { 0.0 })
        .sum();
    Ok((inside / total).min(1.0))
}

/// Weighted tail of the visited-cube count over hitting paths.
pub fn visited_cubes_tail(result: &SmcResult) -> Vec<(u64, f64)> {
    let samples: Vec<(u64, f64)> = result.paths.iter().map(|p| (p.cubes, p.weight)).collect();
    crate::cubes::weighted_tail(&samples)
}

/// Human-readable diagnostics for a result.
pub fn diagnostics(result: &SmcResult) -> Vec<String> {
    let mut out = Vec::new();
    if result.escape_warning {
        out.push(format!("window escape fraction {:.4} exceeds 1%", result.escape_fraction));
    }
    if result.truncated_mass > 1e-3 {
        out.push(format!("{:.2e} of the mass was still in flight at the horizon", result.truncated_mass));
    }
    out
}
