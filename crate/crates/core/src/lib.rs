//! Numerical core for singular fully nonlinear elliptic operators of the form
//! `|Du|^a (F(x, D^2u) + h(x).Du) + c(x)|u|^a u` on structured 1D/2D grids.
//!
//! The crate is `no_std` and needs only `alloc`. It covers domain
//! construction, monotone wide-stencil discretizations, a regularized
//! fixed-point Dirichlet solver, principal eigenvalue computation, an
//! independent shooting oracle and a set of numerical property checks.

#![no_std]
#![forbid(unsafe_code)]
// NaN must fail the parameter checks, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dirichlet;
pub mod eigen;
mod error;
pub mod grid;
mod linalg;
pub(crate) mod math;
pub mod operators;
pub mod oracle;
pub mod verify;

pub use dirichlet::{apply_t, solve_dirichlet, InnerMethod, SolveConfig, SolveReport};
pub use eigen::{
    bisect_lambda, cw_bounds_with, cw_lower_bound, cw_upper_bound, default_bracket, initial_field, power_iterate,
    power_iterate_from, power_iterate_minus, reflect_spec, EigConfig, EigMethod, EigResult, PowerMode,
};
pub use error::{Error, Result};
pub use grid::{build_domain, distance_field, DomainSpec, Grid, MaskSpec, NodeClass, ScalarField, Shape};
pub use operators::{
    discretize_residual, evaluate_f, pucci_eval, Coefficients, Drift, OperatorKind, OperatorSpec,
    PucciSign, SymMat2, Zeroth,
};
pub use verify::{
    barrier_constant, check_barrier_supersolution, check_comparison, check_distance_comparability,
    check_distance_refinement, check_domain_monotonicity, check_hopf, check_hopf_refinement, check_no_positive_solution,
    check_simplicity, check_simplicity_refinement, distance_ratios, estimate_holder, estimate_holder_band,
    inward_quotient, isolation_scan, random_forcing_pair, scan_run, scan_starts, BarrierSpec, CheckReport, HolderFit,
    ScanOutcome, Verdict, HOLDER_BAND,
};
