//! Loss of regularity for weakly hyperbolic systems and higher order
//! equations with `t^{l*}` degeneracy. The bound `delta` comes from
//! symmetrizers; a spectral Cauchy solver measures the actual loss.

pub mod builtins;
mod jet;
pub mod linalg;
pub mod reduction;
pub mod solver;
pub mod symbolcalc;
pub mod systems;
pub mod weights;

pub use linalg::CMatrix;
pub use reduction::{
    companion_system, cross_validate, delta_bound_scalar, reduced_symbols, CrossValidation,
    ReducedSymbols, ReductionError, ScalarOperator,
};
pub use solver::{
    empirical_loss, solve_cauchy, LossMeasurement, LossOptions, LossProblem, PeriodicGrid,
    SolverError, SpectralState, SpectralSystem, SpectralTrajectory,
};
pub use symbolcalc::{
    estimate_constants, EstimateReport, StructuredSymbol, SymbolError, SymbolGrid, SymbolOrders,
};
pub use systems::{
    delta_bound_system, symmetrizer_from_roots, DeltaBound, DeltaRow, FirstOrderSystem,
    SymmetrizerPair, SystemError,
};
pub use weights::{Cutoff, DegeneracySpec, WeightsError};
