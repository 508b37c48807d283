//! Numerical laboratory for the equidistribution of zeros of random
//! holomorphic sections on complex projective space.
//!
//! The crate builds L2-Bergman spaces of sections of `O(p)` over `P^1` and
//! `P^2` under smooth and log-singular Hermitian weights, samples random
//! section tuples from Fubini-Study and perturbed (moderate) measures,
//! extracts common zero sets, and measures how fast the normalized zero
//! currents converge to the wedge of curvature currents.
//!
//! Everything here is deterministic given a master seed: random streams are
//! split per purpose/sample with [`rng::substream`] so results do not depend
//! on scheduling. The crate is `no_std`-compatible (alloc required); file
//! formats, caching, the CLI and parallel drivers live in the companion
//! `equidist-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bergman;
pub mod charts;
pub mod current_approx;
pub mod equidistribution;
pub mod forms;
pub mod metrics;
pub mod measures;
pub mod num;
pub mod polynomials;
pub mod projective;
pub mod rng;

pub use num::Complex64;
