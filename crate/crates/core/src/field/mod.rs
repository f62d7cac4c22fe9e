//! The quenched trap field: a windowed realization of the marked Poisson
//! process with intensity `Lebesgue x nu`, plus the spatial index used to
//! evaluate potentials.

mod index;
mod sample;

use alloc::{format, vec::Vec};
use core::ops::Range;

use crate::math::{dist2, floor, log2, powf};
use crate::potential::PotentialSpec;
use crate::{Error, ModelParams, Result, Window};

use index::BandGrid;
pub use sample::{auto_r_max, band_limit, sample_field, truncation_budget, BandPlan, TRUNCATION_BUDGET};

/// One trap: a ball of radius `radius >= 1` centred at `center`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trap {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Trap {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Trap { center, radius }
    }

    /// Dyadic band `n` with `radius in [2^n, 2^(n+1))`.
    pub fn band(&self) -> u32 {
        band_of(self.radius)
    }
}

pub(crate) fn band_of(radius: f64) -> u32 {
    floor(log2(radius)).max(0.0) as u32
}

/// Immutable trap field over a window.
///
/// Traps are stored sorted by band (stable within a band), and every stored
/// trap's ball meets the window.
#[derive(Debug, Clone)]
pub struct TrapField {
    params: ModelParams,
    window: Window,
    r_max: f64,
    seed: u64,
    centers: Vec<f64>,
    radii: Vec<f64>,
    radii2: Vec<f64>,
    weights: Vec<f64>,
    bands: Vec<Range<usize>>,
    grids: Vec<BandGrid>,
    plan: Vec<BandPlan>,
}

/// Cell side of band `n` is `2^(n+1) / CELL_DIVISOR`.
pub const CELL_DIVISOR: f64 = 4.0;

impl TrapField {
    /// A field with no traps.
    pub fn empty(params: ModelParams, window: Window) -> Result<Self> {
        TrapField::from_traps(params, window, 1.0, 0, Vec::new())
    }

    /// Builds a field from explicit traps.
    ///
    /// Every trap must have `1 <= radius <= r_max` and meet the window.
    pub fn from_traps(
        params: ModelParams,
        window: Window,
        r_max: f64,
        seed: u64,
        traps: Vec<Trap>,
    ) -> Result<Self> {
        params.validate()?;
        let d = params.d;
        if window.dim() != d {
            return Err(Error::Dimension { expected: d, got: window.dim() });
        }
        if !(r_max >= 1.0) || !r_max.is_finite() {
            return Err(Error::invalid(format!("r_max must be at least 1 (r_max = {r_max})")));
        }
        for (i, t) in traps.iter().enumerate() {
            if t.center.len() != d {
                return Err(Error::Dimension { expected: d, got: t.center.len() });
            }
            if !(t.radius >= 1.0) || t.radius > r_max || t.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid(format!(
                    "trap {i}: radius {} outside [1, r_max = {r_max}]",
                    t.radius
                )));
            }
            if !window.meets_ball(&t.center, t.radius) {
                return Err(Error::invalid(format!("trap {i} does not meet the window")));
            }
        }
        Ok(TrapField::assemble(params, window, r_max, seed, traps, Vec::new()))
    }

    pub(crate) fn assemble(
        params: ModelParams,
        window: Window,
        r_max: f64,
        seed: u64,
        mut traps: Vec<Trap>,
        plan: Vec<BandPlan>,
    ) -> Self {
        let d = params.d;
        traps.sort_by_key(|t| t.band());
        let nbands = traps.last().map(|t| t.band() as usize + 1).unwrap_or(0);
        let mut bands = Vec::with_capacity(nbands);
        let mut start = 0;
        for n in 0..nbands as u32 {
            let end = start + traps[start..].iter().take_while(|t| t.band() == n).count();
            bands.push(start..end);
            start = end;
        }
        let mut centers = Vec::with_capacity(traps.len() * d);
        let mut radii = Vec::with_capacity(traps.len());
        for t in &traps {
            centers.extend_from_slice(&t.center);
            radii.push(t.radius);
        }
        let radii2 = radii.iter().map(|r| r * r).collect();
        let weights = radii.iter().map(|&r| powf(r, -params.gamma)).collect();
        let grids = bands
            .iter()
            .enumerate()
            .map(|(n, range)| {
                let cell = powf(2.0, n as f64 + 1.0) / CELL_DIVISOR;
                BandGrid::build(&window, cell, range.clone(), &centers, &radii)
            })
            .collect();
        TrapField { params, window, r_max, seed, centers, radii, radii2, weights, bands, grids, plan }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.params.d
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// Number of bands holding at least the slot for one trap.
    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn band_range(&self, n: usize) -> Range<usize> {
        self.bands.get(n).cloned().unwrap_or(0..0)
    }

    /// Sampling plan per band (empty for fields built from explicit traps).
    pub fn plan(&self) -> &[BandPlan] {
        &self.plan
    }

    /// Expected number of traps with radius above `r_max` meeting the window.
    pub fn truncation_budget(&self) -> f64 {
        truncation_budget(&self.params, &self.window, self.r_max)
    }

    pub fn trap(&self, i: usize) -> Trap {
        let d = self.params.d;
        Trap::new(self.centers[i * d..(i + 1) * d].to_vec(), self.radii[i])
    }

    pub fn traps(&self) -> impl Iterator<Item = Trap> + '_ {
        (0..self.len()).map(move |i| self.trap(i))
    }

    pub fn index_entries(&self) -> usize {
        self.grids.iter().map(BandGrid::entry_count).sum()
    }

    /// Same window, params and seed with one more trap.
    pub fn with_trap(&self, trap: Trap) -> Result<Self> {
        let mut traps: Vec<Trap> = self.traps().collect();
        traps.push(trap);
        let r_max = self.r_max.max(traps.last().map(|t| t.radius).unwrap_or(1.0));
        TrapField::from_traps(self.params, self.window.clone(), r_max, self.seed, traps)
    }

    /// Same field with a different killing rate.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let params = self.params.with_lambda(lambda);
        params.validate()?;
        let mut f = self.clone();
        f.params = params;
        Ok(f)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.params.d {
            return Err(Error::Dimension { expected: self.params.d, got: x.len() });
        }
        if !self.window.contains(x) {
            return Err(Error::OutsideWindow(format!("{x:?}")));
        }
        Ok(())
    }

    /// Potential at `x` through the spatial index.
    pub fn potential(&self, spec: &PotentialSpec, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.potential_unchecked(spec, x))
    }

    #[inline]
    pub(crate) fn band_sum(&self, n: usize, x: &[f64]) -> f64 {
        let d = self.params.d;
        let mut s = 0.0;
        for &i in self.grids[n].candidates(self.window.lo(), x) {
            let i = i as usize;
            if dist2(x, &self.centers[i * d..(i + 1) * d]) <= self.radii2[i] {
                s += self.weights[i];
            }
        }
        s
    }

    /// Caller guarantees `x` lies in the window.
    #[inline]
    pub(crate) fn potential_unchecked(&self, spec: &PotentialSpec, x: &[f64]) -> f64 {
        let mut total = 0.0;
        match spec {
            PotentialSpec::Raw => {
                for n in 0..self.bands.len() {
                    total += self.band_sum(n, x);
                }
            }
            PotentialSpec::Modified(m) => {
                let top = self.bands.len().min(m.n_max as usize + 1);
                for n in 0..top {
                    total += self.band_sum(n, x).min(m.clips[n]);
                }
            }
        }
        total
    }

    /// Potential at `x` by scanning every stored trap; the reference the
    /// index is checked against. Accumulation order matches [`Self::potential`].
    pub fn potential_scan(&self, spec: &PotentialSpec, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let d = self.params.d;
        let mut total = 0.0;
        for (n, range) in self.bands.iter().enumerate() {
            let mut s = 0.0;
            for i in range.clone() {
                if dist2(x, &self.centers[i * d..(i + 1) * d]) <= self.radii2[i] {
                    s += self.weights[i];
                }
            }
            match spec {
                PotentialSpec::Raw => total += s,
                PotentialSpec::Modified(m) => {
                    if n <= m.n_max as usize {
                        total += s.min(m.clips[n]);
                    }
                }
            }
        }
        Ok(total)
    }

    /// Number of traps whose closed ball contains `x`.
    pub fn overlap_count(&self, x: &[f64]) -> Result<usize> {
        self.check_point(x)?;
        let d = self.params.d;
        let mut count = 0;
        for grid in &self.grids {
            for &i in grid.candidates(self.window.lo(), x) {
                let i = i as usize;
                if dist2(x, &self.centers[i * d..(i + 1) * d]) <= self.radii2[i] {
                    count += 1;
                }
            }
        }
        Ok(count)
    }

    /// Linear-scan overlap count.
    pub fn overlap_count_scan(&self, x: &[f64]) -> Result<usize> {
        self.check_point(x)?;
        let d = self.params.d;
        Ok((0..self.len())
            .filter(|&i| dist2(x, &self.centers[i * d..(i + 1) * d]) <= self.radii2[i])
            .count())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{ceil, ln};
    use alloc::vec;

    fn params(gamma: f64) -> ModelParams {
        ModelParams::new(2, 2.2, gamma, 0.5).unwrap()
    }

    #[test]
    fn single_trap_indicator() {
        let w = Window::centered(2, 5.0).unwrap();
        let f = TrapField::from_traps(params(1.0), w, 2.0, 0, vec![Trap::new(vec![0.0, 0.0], 2.0)]).unwrap();
        let raw = PotentialSpec::Raw;
        assert_eq!(f.potential(&raw, &[1.0, 0.0]).unwrap(), 0.5);
        assert_eq!(f.potential(&raw, &[0.0, 3.0]).unwrap(), 0.0);
        // Boundary counts as inside.
        assert_eq!(f.potential(&raw, &[2.0, 0.0]).unwrap(), 0.5);
        assert_eq!(f.overlap_count(&[2.0, 0.0]).unwrap(), 1);
    }

    #[test]
    fn out_of_window_is_an_error() {
        let f = TrapField::empty(params(0.2), Window::centered(2, 1.0).unwrap()).unwrap();
        assert!(matches!(f.potential(&PotentialSpec::Raw, &[1.5, 0.0]), Err(Error::OutsideWindow(_))));
        assert!(f.potential(&PotentialSpec::Raw, &[1.0]).is_err());
        assert_eq!(f.overlap_count(&[0.0, 0.0]).unwrap(), 0);
    }

    #[test]
    fn concentric_overlap() {
        let w = Window::centered(2, 5.0).unwrap();
        let traps = vec![Trap::new(vec![0.5, 0.5], 1.5), Trap::new(vec![0.5, 0.5], 3.0)];
        let f = TrapField::from_traps(params(0.2), w, 4.0, 0, traps).unwrap();
        assert_eq!(f.overlap_count(&[0.5, 0.5]).unwrap(), 2);
        assert_eq!(f.overlap_count_scan(&[0.5, 0.5]).unwrap(), 2);
    }

    #[test]
    fn band_clip_is_exact() {
        // k concentric traps in band n; their band sum exceeds the clip.
        let p = params(0.5);
        let scale = 64.0;
        let spec = PotentialSpec::modified(&p, scale, 0.8).unwrap();
        let PotentialSpec::Modified(m) = &spec else { unreachable!() };
        let n = 1u32;
        let clip = powf(2.0, -(n as f64) * p.gamma) * ln(scale);
        assert_eq!(clip, m.clips[n as usize]);
        // Each band-n trap contributes more than 2^{-(n+1) gamma}.
        let k = ceil(clip / powf(2.0, -((n + 1) as f64) * p.gamma)) as usize + 1;
        let r = 2.5;
        let traps = vec![Trap::new(vec![0.0, 0.0], r); k];
        let w = Window::centered(2, 8.0).unwrap();
        let f = TrapField::from_traps(p, w, 4.0, 0, traps).unwrap();
        let brute: f64 = (0..k).map(|_| powf(r, -p.gamma)).sum();
        assert!(brute > clip);
        assert_eq!(f.potential(&spec, &[0.0, 0.0]).unwrap(), clip);
        assert!(f.potential(&PotentialSpec::Raw, &[0.0, 0.0]).unwrap() > clip);
    }

    #[test]
    fn modified_ignores_bands_above_cutoff() {
        let p = params(0.2);
        let spec = PotentialSpec::modified(&p, 16.0, 0.75).unwrap();
        let PotentialSpec::Modified(m) = &spec else { unreachable!() };
        assert_eq!(m.n_max, 3);
        let big = powf(2.0, m.n_max as f64 + 1.0);
        let w = Window::centered(2, 4.0).unwrap();
        let f = TrapField::from_traps(p, w, 64.0, 0, vec![Trap::new(vec![0.0, 0.0], big)]).unwrap();
        assert_eq!(f.potential(&spec, &[0.0, 0.0]).unwrap(), 0.0);
        assert!(f.potential(&PotentialSpec::Raw, &[0.0, 0.0]).unwrap() > 0.0);
    }

    #[test]
    fn rejects_bad_traps() {
        let w = Window::centered(2, 1.0).unwrap();
        assert!(TrapField::from_traps(params(0.2), w.clone(), 2.0, 0, vec![Trap::new(vec![0.0, 0.0], 0.5)]).is_err());
        assert!(TrapField::from_traps(params(0.2), w.clone(), 2.0, 0, vec![Trap::new(vec![0.0, 0.0], 3.0)]).is_err());
        assert!(TrapField::from_traps(params(0.2), w.clone(), 2.0, 0, vec![Trap::new(vec![5.0, 0.0], 1.5)]).is_err());
        assert!(TrapField::from_traps(params(0.2), w, 0.5, 0, vec![]).is_err());
    }
}
