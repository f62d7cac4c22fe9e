use alloc::{format, vec::Vec};

use crate::{Error, Result};

/// Closed axis-aligned box in `R^d`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Window {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Window {
    /// Zero extent along an axis is allowed; inverted or non-finite bounds are not.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::invalid("window bounds must have equal, non-zero dimension"));
        }
        for (j, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !a.is_finite() || !b.is_finite() || b < a {
                return Err(Error::invalid(format!("window axis {j}: invalid bounds [{a}, {b}]")));
            }
        }
        Ok(Window { lo, hi })
    }

    /// Cube `[-half, half]^d`.
    pub fn centered(d: usize, half: f64) -> Result<Self> {
        Window::new(alloc::vec![-half; d], alloc::vec![half; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.extent(j)).product()
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    pub fn padded(&self, pad: f64) -> Window {
        Window {
            lo: self.lo.iter().map(|v| v - pad).collect(),
            hi: self.hi.iter().map(|v| v + pad).collect(),
        }
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|j| other.lo[j] >= self.lo[j] && other.hi[j] <= self.hi[j])
    }

    /// Squared distance from `x` to the box (zero inside).
    #[inline]
    pub fn dist2_to(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..x.len() {
            let t = if x[j] < self.lo[j] {
                self.lo[j] - x[j]
            } else if x[j] > self.hi[j] {
                x[j] - self.hi[j]
            } else {
                0.0
            };
            s += t * t;
        }
        s
    }

    /// Whether the closed ball `B(center, radius)` meets the box.
    pub fn meets_ball(&self, center: &[f64], radius: f64) -> bool {
        self.dist2_to(center) <= radius * radius
    }
}
