//! Brownian motion killed among Poissonian soft traps with heavy-tailed radii.
//!
//! The crate is `no_std` (with `alloc`). It holds the quenched trap field and
//! its spatial index, the raw and band-clipped potentials, a Feynman-Kac
//! particle sampler for the point-to-plane and point-to-point polymer
//! measures, closed-form exponent bounds, and the experiment kernels built on
//! top of them. File formats, configuration and parallel drivers live in the
//! `trapwalk` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bounds;
pub mod cubes;
mod error;
pub mod field;
pub mod fit;
pub mod geometry;
pub mod lab;
mod math;
pub mod params;
pub mod potential;
pub mod rng;
pub mod smc;
pub mod stats;
pub mod window;

pub use bounds::{theoretical_bounds, BoundSet};
pub use error::{Error, Result};
pub use field::{Trap, TrapField};
pub use fit::{fit_exponent, ExponentFit, Observable};
pub use geometry::{Geometry, GeometryKind};
pub use params::ModelParams;
pub use potential::PotentialSpec;
pub use rng::derive_seed;
pub use smc::{mu_event_estimates, smc_run, Guide, SmcConfig, SmcResult};
pub use window::Window;

/// Version of every on-disk format emitted by the toolchain.
pub const FORMAT_VERSION: u32 = 1;

/// Default grid of tube exponents for the tube-confinement estimates.
pub const DEFAULT_XI_GRID: [f64; 9] = [0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];
