//! Seed splitting and the counter-mode stream used for particle proposals.
//!
//! Every random draw in the toolchain descends from one master seed through
//! [`derive_seed`]. Particle noise is keyed by `(run seed, step, particle)`
//! so a step can be propagated in any order with identical results.

use rand_core::{impls, RngCore, SeedableRng};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; a bijection on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and an index path.
///
/// Each path element is absorbed with its position so `[1, 2]` and `[2, 1]`
/// give different streams, and the path length is folded in so `[]` and `[0]`
/// differ too.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut h = mix64(master ^ 0x5be0_cd19_137e_2179);
    for (pos, &p) in path.iter().enumerate() {
        let lane = (pos as u64 + 1).wrapping_mul(GOLDEN);
        h = mix64(h ^ mix64(p.wrapping_add(lane)));
    }
    mix64(h ^ (path.len() as u64).wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Small SplitMix64 generator. Cheap to create, which is what the
/// per-(step, particle) streams need.
#[derive(Debug, Clone)]
pub struct StreamRng {
    state: u64,
}

impl StreamRng {
    #[inline]
    pub fn new(seed: u64) -> Self {
        StreamRng { state: seed }
    }

    /// Stream for particle slot `particle` at time step `step` of run `seed`.
    #[inline]
    pub fn for_particle(seed: u64, step: u64, particle: u64) -> Self {
        let k = mix64(seed ^ step.wrapping_mul(0xa076_1d64_78bd_642f));
        StreamRng::new(mix64(k ^ particle.wrapping_mul(GOLDEN)))
    }
}

impl RngCore for StreamRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        impls::fill_bytes_via_next(self, dest)
    }
}

impl SeedableRng for StreamRng {
    type Seed = [u8; 8];

    fn from_seed(seed: Self::Seed) -> Self {
        StreamRng::new(u64::from_le_bytes(seed))
    }

    fn seed_from_u64(state: u64) -> Self {
        StreamRng::new(state)
    }
}
