//! Ulam discretisations of transfer operators, invariant densities and
//! perturbed spectral data of first-return operators.

mod density;
mod grid;
mod induced;
mod sparse;
mod spectral;
mod ulam;

pub use density::{invariant_density, InvariantDensity, MAX_SWEEPS};
pub use grid::{Grid, Refinement};
pub use induced::{
    induced_operator, tower_grid, DeepBlock, EdgeOperator, InducedConfig, Piece, RowMoments,
};
pub use sparse::{Csr, Scalar};
pub use spectral::{
    exponent_fit, log_grid, perturbed_eigenvalue, quadratic_fit, sigma2_operator, EigenReport,
    ExponentFit, PowerOptions, QuadraticFit, Sigma2Report,
};
pub use ulam::{assemble_ulam, Assembly, UlamOperator};
