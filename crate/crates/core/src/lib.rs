//! Solvers for discounted and ergodic Hamilton-Jacobi-Bellman equations on
//! the 1- and 2-torus, with occupation-measure linear programs for discrete
//! Mather measures, duality-gap certification, and vanishing-discount
//! experiments.
//!
//! The pieces fit together as follows: a [`problem::EllipticProblem`]
//! tabulates Bellman data (a, b, L) over a finite control set on a
//! [`grid::TorusGrid`]; [`generator::build_generator`] discretizes the
//! per-control drift-diffusion operators with a monotone upwind stencil;
//! [`hjb`] solves the discounted and ergodic equations by policy iteration;
//! [`mather`] solves the dual occupation-measure LPs with the self-contained
//! simplex in [`lp`] and certifies that both routes agree; [`vanish`] drives
//! discount schedules toward the selected ergodic limit.

pub mod error;
pub mod generator;
pub mod grid;
pub mod hjb;
pub mod lp;
pub mod mather;
pub mod problem;
pub mod vanish;

pub use error::{Error, Result};
pub use generator::{apply_f, build_generator, validate_monotone, DiscreteGenerator};
pub use grid::{GridFunction, TorusGrid};
pub use hjb::{
    comparison_probe, policy_evaluate, residual_discounted, solve_discounted,
    solve_ergodic_howard, DiscountedSolution, ErgodicSolution,
};
pub use lp::{check_certificate, simplex_solve, LpSolution, LpStatus, StandardFormLp};
pub use mather::{
    build_discounted_lp, build_ergodic_lp, closing_residual, ergodic_lp_value, pair_grid,
    pair_table, solve_mather, DualityCertificate, MatherContext, OccupationMeasure,
};
pub use problem::{
    build_gallery, check_condition_l, legendre_power, parse_spec, to_spec_string, ControlSet,
    EllipticProblem, GalleryId,
};
pub use vanish::{
    geometric_schedule, run_schedule, selection_check, subsequence_probe, CSource, ScheduleReport,
};
