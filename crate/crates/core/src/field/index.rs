//! Per-band uniform grids over the field window.
//!
//! Each dyadic band gets its own grid. A trap is registered in every cell
//! its ball can touch, so a query reads exactly one cell per band. Cell lists
//! hold trap indices in increasing order, which keeps indexed sums in the
//! same order as a linear scan.

use alloc::{vec, vec::Vec};

use crate::math::{ceil, floor};
use crate::Window;

/// Upper limit on cells per band grid; coarser cells are used beyond it.
const MAX_CELLS: usize = 1 << 22;

#[derive(Debug, Clone)]
pub(crate) struct BandGrid {
    cell: f64,
    dims: Vec<usize>,
    offsets: Vec<u32>,
    entries: Vec<u32>,
}

impl BandGrid {
    /// `members` are trap indices of this band in increasing order.
    pub(crate) fn build(
        window: &Window,
        target_cell: f64,
        members: core::ops::Range<usize>,
        centers: &[f64],
        radii: &[f64],
    ) -> BandGrid {
        let d = window.dim();
        let mut cell = target_cell;
        let mut dims = cell_dims(window, cell);
        while dims.iter().product::<usize>() > MAX_CELLS {
            cell *= 2.0;
            dims = cell_dims(window, cell);
        }
        let ncells: usize = dims.iter().product();
        let mut counts = vec![0u32; ncells + 1];

        let mut lo_idx = vec![0usize; d];
        let mut hi_idx = vec![0usize; d];
        let mut cur = vec![0usize; d];
        let mut cell_lo = vec![0.0; d];

        let mut visit = |i: usize, f: &mut dyn FnMut(usize)| {
            let c = &centers[i * d..(i + 1) * d];
            // Slightly inflated so rounding in the query's cell lookup never
            // loses a trap; the exact containment test happens at query time.
            let r = radii[i] * (1.0 + 1e-9) + 1e-9;
            for j in 0..d {
                lo_idx[j] = clamp_idx((c[j] - r - window.lo()[j]) / cell, dims[j]);
                hi_idx[j] = clamp_idx((c[j] + r - window.lo()[j]) / cell, dims[j]);
                cur[j] = lo_idx[j];
            }
            loop {
                let mut dist2 = 0.0;
                let mut flat = 0usize;
                for j in 0..d {
                    cell_lo[j] = window.lo()[j] + cur[j] as f64 * cell;
                    let a = cell_lo[j];
                    let b = a + cell;
                    let t = if c[j] < a {
                        a - c[j]
                    } else if c[j] > b {
                        c[j] - b
                    } else {
                        0.0
                    };
                    dist2 += t * t;
                    flat = flat * dims[j] + cur[j];
                }
                if dist2 <= r * r {
                    f(flat);
                }
                // odometer
                let mut j = d;
                loop {
                    if j == 0 {
                        return;
                    }
                    j -= 1;
                    if cur[j] < hi_idx[j] {
                        cur[j] += 1;
                        break;
                    }
                    cur[j] = lo_idx[j];
                }
            }
        };

        for i in members.clone() {
            visit(i, &mut |flat| counts[flat + 1] += 1);
        }
        for k in 0..ncells {
            counts[k + 1] += counts[k];
        }
        let mut fill = counts.clone();
        let mut entries = vec![0u32; counts[ncells] as usize];
        for i in members {
            visit(i, &mut |flat| {
                entries[fill[flat] as usize] = i as u32;
                fill[flat] += 1;
            });
        }
        BandGrid { cell, dims, offsets: counts, entries }
    }

    /// Candidate trap indices for a point inside the window.
    #[inline]
    pub(crate) fn candidates(&self, window_lo: &[f64], x: &[f64]) -> &[u32] {
        let mut flat = 0usize;
        for j in 0..x.len() {
            let k = clamp_idx((x[j] - window_lo[j]) / self.cell, self.dims[j]);
            flat = flat * self.dims[j] + k;
        }
        let a = self.offsets[flat] as usize;
        let b = self.offsets[flat + 1] as usize;
        &self.entries[a..b]
    }

    pub(crate) fn entry_count(&self) -> usize {
        self.entries.len()
    }
}

fn cell_dims(window: &Window, cell: f64) -> Vec<usize> {
    (0..window.dim())
        .map(|j| (ceil(window.extent(j) / cell) as usize).max(1))
        .collect()
}

#[inline]
fn clamp_idx(v: f64, n: usize) -> usize {
    let f = floor(v);
    if f <= 0.0 {
        0
    } else if f >= (n - 1) as f64 {
        n - 1
    } else {
        f as usize
    }
}
