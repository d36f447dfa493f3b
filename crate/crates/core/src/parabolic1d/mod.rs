//! Deterministic one-dimensional parabolic machinery: grids, the operators
//! `A` and `B`, Crank-Nicolson stepping, the semigroup and the `h`-equation.

mod coeffs;
mod grid;
pub(crate) mod operator;
mod solve;
mod spectral;

pub use coeffs::{constant_fn, CoefficientFn, CoefficientSet, CoefficientValues, Forcing, Operator, Regularity};
pub use grid::{GridMode, SpatialField, SpatialGrid, SpatialNorm, Trajectory};
pub use operator::{apply_operator, step};
pub use solve::{check_regime, semigroup_apply, solve_h, Recording, SolveOptions};

pub(crate) use grid::norm_sq_values;
pub(crate) use spectral::plans as fft_plans;
