//! Periodic grids, discrete operators and spectral solvers.

mod garding;
mod grid;
mod ops;
mod solve;

pub use garding::{garding_probe, GardingEstimate, GardingRow, LAMBDA_MARGIN, SYMMETRY_TOL};
pub use grid::{TorusGrid, TorusGridFn};
pub(crate) use grid::fft_nd;
pub use ops::{
    apply_pdo, bilinear_form, composition_symbol, sobolev_norm, DiscreteOperator, TABLE_LIMIT,
};
pub use solve::{
    default_max_iter, exact_multiplier_evolve, regularity_probe, resolvent_solve,
    resolvent_solve_checked, semigroup_evolve, RegularityRow, RegularityTable, Resolvent, Scheme, SemigroupRun,
    Solve, StepDiagnostics, DEFAULT_TOL,
};
