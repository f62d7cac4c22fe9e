use alloc::{format, vec::Vec};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, Poisson};

use super::{Trap, TrapField};
use crate::math::powf;
use crate::rng::derive_seed;
use crate::{Error, ModelParams, Result, Window};

/// Default ceiling on the expected number of missed (radius > r_max) traps.
pub const TRUNCATION_BUDGET: f64 = 0.01;

/// Largest power of two tried by [`auto_r_max`].
const MAX_R_EXPONENT: u32 = 62;

const BAND_STREAM: u64 = 0xba4d;

/// What the sampler configured for one dyadic band.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BandPlan {
    pub band: u32,
    /// Upper end of the band's radius range after truncation.
    pub upper: f64,
    /// `nu([2^n, upper))`.
    pub mass: f64,
    /// Volume of the window padded by `2^(n+1)`.
    pub padded_volume: f64,
    /// Poisson mean `mass * padded_volume`.
    pub mean: f64,
    /// Points drawn in the padded window.
    pub drawn: u64,
    /// Points kept (ball meets the window).
    pub kept: u64,
}

fn band_plan(params: &ModelParams, window: &Window, r_max: f64, n: u32) -> BandPlan {
    let lo = powf(2.0, n as f64);
    let upper = (2.0 * lo).min(r_max);
    let mass = if upper > lo { params.radius_mass(lo, upper) } else { 0.0 };
    let padded_volume = window.padded(2.0 * lo).volume();
    BandPlan { band: n, upper, mass, padded_volume, mean: mass * padded_volume, drawn: 0, kept: 0 }
}

/// Inverse CDF of `nu` restricted to `[lo, upper)`.
fn band_radius(alpha: f64, lo: f64, upper: f64, u: f64) -> f64 {
    let a = powf(lo, -alpha);
    let b = powf(upper, -alpha);
    let r = powf(a - u * (a - b), -1.0 / alpha);
    // Keep the band invariant floor(log2 r) = n under rounding.
    if r >= 2.0 * lo {
        f64::from_bits((2.0 * lo).to_bits() - 1)
    } else {
        r.max(lo)
    }
}

/// Draws the traps of band `n` from the stream keyed by `(seed, n)`.
fn draw_band(params: &ModelParams, window: &Window, r_max: f64, seed: u64, n: u32) -> (BandPlan, Vec<Trap>) {
    let mut plan = band_plan(params, window, r_max, n);
    let mut traps = Vec::new();
    if plan.mean <= 0.0 {
        return (plan, traps);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[BAND_STREAM, n as u64]));
    let count = Poisson::new(plan.mean).map(|p| p.sample(&mut rng) as u64).unwrap_or(0);
    let lo = powf(2.0, n as f64);
    let padded = window.padded(2.0 * lo);
    let d = params.d;
    for _ in 0..count {
        let center: Vec<f64> = (0..d)
            .map(|j| padded.lo()[j] + rng.random::<f64>() * padded.extent(j))
            .collect();
        let radius = band_radius(params.alpha, lo, plan.upper, rng.random::<f64>());
        if window.meets_ball(&center, radius) {
            traps.push(Trap::new(center, radius));
        }
    }
    plan.drawn = count;
    plan.kept = traps.len() as u64;
    (plan, traps)
}

/// Highest band index sampled for `r_max`.
pub fn band_limit(r_max: f64) -> u32 {
    // bands n with 2^n <= r_max
    let mut n = 0u32;
    while n < 1023 && powf(2.0, (n + 1) as f64) <= r_max {
        n += 1;
    }
    n
}

/// Samples a windowed trap field.
///
/// Band `n` (radii in `[2^n, min(2^(n+1), r_max))`) draws a Poisson number
/// of centres uniformly in the window padded by `2^(n+1)`; traps whose ball
/// misses the window are discarded. Deterministic in all arguments.
pub fn sample_field(params: ModelParams, window: Window, r_max: f64, seed: u64) -> Result<TrapField> {
    params.validate()?;
    check_inputs(&params, &window, r_max)?;
    let mut traps = Vec::new();
    let mut plan = Vec::new();
    for n in 0..=band_limit(r_max) {
        let (p, t) = draw_band(&params, &window, r_max, seed, n);
        plan.push(p);
        traps.extend(t);
    }
    Ok(TrapField::assemble(params, window, r_max, seed, traps, plan))
}

fn check_inputs(params: &ModelParams, window: &Window, r_max: f64) -> Result<()> {
    if window.dim() != params.d {
        return Err(Error::Dimension { expected: params.d, got: window.dim() });
    }
    if !(r_max >= 1.0) || !r_max.is_finite() {
        return Err(Error::invalid(format!("r_max must be at least 1 (r_max = {r_max})")));
    }
    Ok(())
}

impl TrapField {
    /// Replaces the traps of band `n` by an independent draw keyed by
    /// `fresh_seed`; every other band is kept. Redrawing every band with the
    /// same `fresh_seed` reproduces `sample_field(.., fresh_seed)`.
    pub fn with_band_redrawn(&self, n: u32, fresh_seed: u64) -> Result<TrapField> {
        self.with_bands_redrawn(&[n], fresh_seed)
    }

    pub fn with_bands_redrawn(&self, which: &[u32], fresh_seed: u64) -> Result<TrapField> {
        let limit = band_limit(self.r_max);
        if let Some(&bad) = which.iter().find(|&&n| n > limit) {
            return Err(Error::invalid(format!("band {bad} exceeds the field's top band {limit}")));
        }
        let mut traps = Vec::new();
        let mut plan = Vec::new();
        for n in 0..=limit {
            if which.contains(&n) {
                let (p, t) = draw_band(&self.params, &self.window, self.r_max, fresh_seed, n);
                plan.push(p);
                traps.extend(t);
            } else {
                traps.extend(self.band_range(n as usize).map(|i| self.trap(i)));
                if let Some(p) = self.plan.iter().find(|p| p.band == n) {
                    plan.push(p.clone());
                }
            }
        }
        Ok(TrapField::assemble(self.params, self.window.clone(), self.r_max, self.seed, traps, plan))
    }

    /// Every band redrawn from `fresh_seed`.
    pub fn with_all_bands_redrawn(&self, fresh_seed: u64) -> Result<TrapField> {
        let all: Vec<u32> = (0..=band_limit(self.r_max)).collect();
        let mut f = self.with_bands_redrawn(&all, fresh_seed)?;
        f.seed = fresh_seed;
        Ok(f)
    }
}

fn unit_ball_volume(j: usize) -> f64 {
    // omega_0 = 1, omega_1 = 2, omega_j = omega_{j-2} 2 pi / j
    let mut w = [1.0, 2.0];
    if j < 2 {
        return w[j];
    }
    let mut k = 2;
    while k <= j {
        w[k % 2] *= 2.0 * core::f64::consts::PI / k as f64;
        k += 1;
    }
    w[j % 2]
}

/// Expected number of traps with radius above `r_max` whose ball meets the
/// window: `int_{r_max}^inf vol(W + B_r) alpha r^(-alpha-1) dr`, with the
/// Steiner polynomial of a box `vol(W + B_r) = sum_j e_(d-j)(sides) omega_j r^j`.
pub fn truncation_budget(params: &ModelParams, window: &Window, r_max: f64) -> f64 {
    let d = params.d;
    // elementary symmetric polynomials of the side lengths
    let mut e = alloc::vec![0.0; d + 1];
    e[0] = 1.0;
    for j in 0..d {
        let a = window.extent(j);
        for k in (1..=j + 1).rev() {
            e[k] += e[k - 1] * a;
        }
    }
    let alpha = params.alpha;
    (0..=d)
        .map(|j| {
            let tail = alpha * powf(r_max, j as f64 - alpha) / (alpha - j as f64);
            e[d - j] * unit_ball_volume(j) * tail
        })
        .sum()
}

/// Smallest power of two `r_max >= min_radius` whose truncation budget is
/// below `budget`.
pub fn auto_r_max(params: &ModelParams, window: &Window, min_radius: f64, budget: f64) -> Result<f64> {
    params.validate()?;
    let mut last = f64::INFINITY;
    for k in 0..=MAX_R_EXPONENT {
        let r = powf(2.0, k as f64);
        if r < min_radius {
            continue;
        }
        last = truncation_budget(params, window, r);
        if last < budget {
            return Ok(r);
        }
    }
    Err(Error::TruncationUnattainable { budget: last, exponent: MAX_R_EXPONENT })
}
