//! Numerical laboratory for intermittent interval maps.
//!
//! The crate simulates the LSV family `T(x) = x(1 + (2x)^α)` on `[0,1/2]`,
//! `2x - 1` on `(1/2,1]`, and checks limit theorems for its Birkhoff sums:
//! Gaussian behaviour for square-integrable induced observables and stable
//! laws with explicit parameters when the neutral fixed point dominates.
//!
//! Layers, bottom up:
//! - [`maps`]: the maps, orbits and the Markov ladder of preimages of 1;
//! - [`invariant`]: Ulam discretisations, invariant densities and
//!   perturbed eigenvalues of induced transfer operators;
//! - [`induction`]: first-return systems on `Y = (1/2,1]` and truncated towers;
//! - [`stable`]: stable laws, tail constants and normalising sequences;
//! - [`renewal`]: renewal recursions for scalar and operator power series;
//! - [`montecarlo`]: observables, orbit sampling and goodness of fit.

// NaN must fail range checks, so `!(x > 0.0)` is the intended form.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the matrix formulas.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod export;
pub mod induction;
pub mod invariant;
pub mod maps;
pub mod montecarlo;
pub mod renewal;
pub mod rng;
pub mod stable;

pub use error::{Error, Result};
pub use maps::{MapSpec, MapVariant, MarkovLadder};
pub use montecarlo::observable::{Centering, Observable, ObservableFamily};
pub use stable::StableLaw;
