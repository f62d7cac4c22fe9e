//! Targets (hyperplane or unit ball) and the capsule-shaped tube around the
//! straight segment from the start to the target.

use alloc::{format, vec, vec::Vec};

use crate::math::{powf, sqrt};
use crate::{Error, Result, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum GeometryKind {
    Hyperplane,
    Ball,
}

/// Start point, target and tube axis.
///
/// `Hyperplane`: target `{x_1 = plane}`, axis from `start` to its projection
/// on the plane, `L = plane - start_1`. `Ball`: target `B(center, 1)`, axis
/// from `start` to `center`, `L = |center - start|`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Geometry {
    kind: GeometryKind,
    start: Vec<f64>,
    end: Vec<f64>,
    scale: f64,
    // unit axis direction
    axis: Vec<f64>,
}

impl Geometry {
    /// Point-to-plane from the origin to `{x_1 = l}`.
    pub fn hyperplane(d: usize, l: f64) -> Result<Self> {
        Geometry::hyperplane_from(vec![0.0; d], l)
    }

    pub fn hyperplane_from(start: Vec<f64>, plane: f64) -> Result<Self> {
        if start.is_empty() {
            return Err(Error::invalid("geometry needs d >= 1"));
        }
        let scale = plane - start[0];
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::invalid(format!("start must lie before the target plane (L = {scale})")));
        }
        let mut end = start.clone();
        end[0] = plane;
        let mut axis = vec![0.0; start.len()];
        axis[0] = 1.0;
        Ok(Geometry { kind: GeometryKind::Hyperplane, start, end, scale, axis })
    }

    /// Point-to-point from the origin to `B(l e_1, 1)`.
    pub fn ball(d: usize, l: f64) -> Result<Self> {
        let mut y = vec![0.0; d];
        y[0] = l;
        Geometry::ball_from(vec![0.0; d], y)
    }

    pub fn ball_from(start: Vec<f64>, center: Vec<f64>) -> Result<Self> {
        if start.len() != center.len() || start.is_empty() {
            return Err(Error::Dimension { expected: start.len(), got: center.len() });
        }
        let scale = sqrt(crate::math::dist2(&start, &center));
        if !(scale > 1.0) {
            return Err(Error::invalid(format!("start must lie outside the target ball (|y - x| = {scale})")));
        }
        let axis = center.iter().zip(&start).map(|(c, s)| (c - s) / scale).collect();
        Ok(Geometry { kind: GeometryKind::Ball, start, end: center, scale, axis })
    }

    pub fn kind(&self) -> GeometryKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    /// Far end of the tube axis (the ball centre, or the start's projection
    /// on the plane).
    pub fn end(&self) -> &[f64] {
        &self.end
    }

    /// Distance scale `L`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Tube radius `L^xi`.
    pub fn tube_radius(&self, xi: f64) -> f64 {
        powf(self.scale, xi)
    }

    /// Squared distance to the axis segment (capsule distance).
    #[inline]
    pub fn axis_dist2(&self, x: &[f64]) -> f64 {
        let mut proj = 0.0;
        for j in 0..x.len() {
            proj += (x[j] - self.start[j]) * self.axis[j];
        }
        let t = proj.clamp(0.0, self.scale);
        let mut s = 0.0;
        for j in 0..x.len() {
            let v = x[j] - self.start[j] - t * self.axis[j];
            s += v * v;
        }
        s
    }

    /// Distance to the target set (zero inside).
    #[inline]
    pub fn target_distance(&self, x: &[f64]) -> f64 {
        match self.kind {
            GeometryKind::Hyperplane => (self.end[0] - x[0]).max(0.0),
            GeometryKind::Ball => (sqrt(crate::math::dist2(x, &self.end)) - 1.0).max(0.0),
        }
    }

    /// Bounding box of the tube of radius `L^xi` plus `slack`.
    pub fn tube_window(&self, xi: f64, slack: f64) -> Window {
        let pad = self.tube_radius(xi) + slack;
        let extra = if self.kind == GeometryKind::Ball { 1.0 } else { 0.0 };
        let lo = self.start.iter().zip(&self.end).map(|(a, b)| a.min(*b) - pad - extra).collect();
        let hi = self.start.iter().zip(&self.end).map(|(a, b)| a.max(*b) + pad + extra).collect();
        Window::new(lo, hi).expect("finite tube window")
    }

    /// The window a run needs: the tube at `xi` with `5 sqrt(L)` slack.
    pub fn required_window(&self, xi_max: f64) -> Window {
        self.tube_window(xi_max, 5.0 * sqrt(self.scale))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capsule_distance() {
        let g = Geometry::hyperplane(2, 10.0).unwrap();
        assert_eq!(g.axis_dist2(&[5.0, 3.0]), 9.0);
        assert_eq!(g.axis_dist2(&[-3.0, 4.0]), 25.0);
        assert_eq!(g.axis_dist2(&[13.0, 4.0]), 25.0);
        assert_eq!(g.target_distance(&[4.0, 100.0]), 6.0);
        let b = Geometry::ball(2, 10.0).unwrap();
        assert_eq!(b.target_distance(&[10.0, 3.0]), 2.0);
        assert_eq!(b.axis_dist2(&[12.0, 0.0]), 4.0);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Geometry::hyperplane(2, 0.0).is_err());
        assert!(Geometry::ball(2, 0.5).is_err());
    }

    #[test]
    fn tube_window_contains_tube() {
        let g = Geometry::ball(2, 16.0).unwrap();
        let w = g.required_window(0.9);
        let r = g.tube_radius(0.9);
        assert!(w.contains(&[-r, r]));
        assert!(w.contains(&[16.0 + r, -r]));
    }
}
