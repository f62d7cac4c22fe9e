//! Small numerical helpers shared by the sampler and the experiment layer.

use alloc::vec::Vec;

use crate::math::{exp, ln, sqrt};

/// `ln sum exp(x_i)`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ln(xs.iter().map(|x| exp(x - m)).sum::<f64>())
}

/// Effective sample size `(sum w)^2 / sum w^2` of log-weights.
pub fn ess(log_w: &[f64]) -> f64 {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return 0.0;
    }
    let (s, s2) = log_w.iter().fold((0.0, 0.0), |(s, s2), x| {
        let w = exp(x - m);
        (s + w, s2 + w * w)
    });
    s * s / s2
}

/// Smallest value whose cumulative normalized weight reaches `q`.
///
/// `items` are `(value, weight)`; weights need not be normalized.
pub fn weighted_quantile(items: &[(f64, f64)], q: f64) -> Option<f64> {
    let total: f64 = items.iter().map(|p| p.1).sum();
    if items.is_empty() || !(total > 0.0) {
        return None;
    }
    let mut sorted: Vec<(f64, f64)> = items.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let target = q * total;
    let mut acc = 0.0;
    for &(v, w) in &sorted {
        acc += w;
        if acc >= target {
            return Some(v);
        }
    }
    sorted.last().map(|p| p.0)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n - 1` denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    sqrt(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ordinary least squares of `y` on `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub r_squared: f64,
}

pub fn ols(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| {
        let r = b - (intercept + slope * a);
        r * r
    }).sum();
    let stderr = if n > 2 { sqrt(sse / (n - 2) as f64 / sxx) } else { f64::NAN };
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Some(LineFit { slope, intercept, stderr, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn lse_and_ess() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 0.0]) - ln(2.0)).abs() < 1e-15);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + ln(2.0))).abs() < 1e-12);
        assert_eq!(ess(&[0.0; 10]), 10.0);
        assert!((ess(&[0.0, f64::NEG_INFINITY]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quantiles() {
        let items = vec![(3.0, 1.0), (1.0, 1.0), (2.0, 2.0)];
        assert_eq!(weighted_quantile(&items, 0.25), Some(1.0));
        assert_eq!(weighted_quantile(&items, 0.5), Some(2.0));
        assert_eq!(weighted_quantile(&items, 0.76), Some(3.0));
        assert_eq!(weighted_quantile(&[], 0.5), None);
    }

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let f = ols(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
        assert!((std_dev(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
