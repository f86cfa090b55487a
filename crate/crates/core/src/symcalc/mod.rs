//! Symbol construction and symbol-class verification.

mod compose;
mod reference;
mod symbol;
mod verify;

pub use compose::{compose_symbols_leading, Composition, COMPOSE_LIMIT};
pub use reference::{reference_functions, reference_pair, sigma_refinement, ReferenceFunctions};
pub use symbol::{
    hoh_power_symbol, inverse_symbol, subordinate_symbol, variable_order_example_symbol,
    ComplexSymbol, PhaseFunction, Symbol, SymbolClass, SINGULAR_TOL,
};
pub use verify::{
    fit_budget, verify_ellipticity, verify_symbol_class, BudgetFit, ClassCheck, Ellipticity,
    DEFAULT_EPSILON, ORDER_LATTICE, TAU_MAX,
};
