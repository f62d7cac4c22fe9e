//! Visited-cube registry: cubes `C_x = l x + [0, l]^d` whose `l`-enlargement
//! was touched by a path.

use alloc::{collections::BTreeSet, vec, vec::Vec};

use crate::math::floor;
use crate::{Error, Result};

/// Cube bookkeeping is packed into 32 bits per axis.
pub const MAX_CUBE_DIM: usize = 4;

pub fn check_cube_args(d: usize, side: f64) -> Result<()> {
    if !(side >= 1.0) || !side.is_finite() {
        return Err(Error::invalid("cube side l must be at least 1"));
    }
    if d > MAX_CUBE_DIM {
        return Err(Error::invalid("visited-cube tracking supports d <= 4"));
    }
    Ok(())
}

#[inline]
fn pack(idx: &[i64]) -> u128 {
    let mut k = 0u128;
    for &v in idx {
        k = (k << 32) | ((v as i32 as u32) as u128);
    }
    k
}

/// Calls `f` with the packed key of every cube within distance `side` of `p`.
#[inline]
pub fn for_each_touched(p: &[f64], side: f64, mut f: impl FnMut(u128)) {
    let d = p.len();
    // Along each axis the candidate cube indices are base-2 ..= base+1.
    let mut base = [0i64; MAX_CUBE_DIM];
    let mut off = [0i64; MAX_CUBE_DIM];
    let mut idx = [0i64; MAX_CUBE_DIM];
    for j in 0..d {
        base[j] = floor(p[j] / side) as i64;
        off[j] = -2;
    }
    let lim = side * side;
    loop {
        let mut dist2 = 0.0;
        for j in 0..d {
            idx[j] = base[j] + off[j];
            let a = idx[j] as f64 * side;
            let b = a + side;
            let t = if p[j] < a {
                a - p[j]
            } else if p[j] > b {
                p[j] - b
            } else {
                0.0
            };
            dist2 += t * t;
        }
        if dist2 <= lim {
            f(pack(&idx[..d]));
        }
        let mut j = d;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            if off[j] < 1 {
                off[j] += 1;
                break;
            }
            off[j] = -2;
        }
    }
}

/// Per-path registry of touched cubes.
#[derive(Debug, Clone, Default)]
pub struct CubeSet {
    keys: BTreeSet<u128>,
}

impl CubeSet {
    pub fn visit(&mut self, p: &[f64], side: f64) {
        for_each_touched(p, side, |k| {
            self.keys.insert(k);
        });
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// Number of cubes touched by a discretely sampled path (`points` is
/// row-major with `d` coordinates per point).
pub fn count_visited_cubes(points: &[f64], d: usize, side: f64) -> Result<usize> {
    check_cube_args(d, side)?;
    let mut set = CubeSet::default();
    for p in points.chunks_exact(d) {
        set.visit(p, side);
    }
    Ok(set.len())
}

/// Weighted tail `P(A >= n)` at each distinct count `n`, increasing in `n`.
pub fn weighted_tail(samples: &[(u64, f64)]) -> Vec<(u64, f64)> {
    let total: f64 = samples.iter().map(|s| s.1).sum();
    if !(total > 0.0) {
        return vec![];
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by_key(|s| s.0);
    let mut out = Vec::new();
    let mut remaining = total;
    let mut i = 0;
    while i < sorted.len() {
        let n = sorted[i].0;
        out.push((n, (remaining / total).clamp(0.0, 1.0)));
        while i < sorted.len() && sorted[i].0 == n {
            remaining -= sorted[i].1;
            i += 1;
        }
    }
    out
}
