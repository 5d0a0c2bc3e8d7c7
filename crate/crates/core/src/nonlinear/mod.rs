//! Semilinear problems solved by fixed-point iteration on the dichotomy.

mod nonlinearity;
mod outer;
mod picard;
mod trajectory;

pub use nonlinearity::{evaluate_nonlinearity, NonlinearEvaluator, Nonlinearity, PointNonlinearity};
pub use outer::{
    match_whole_space, match_whole_space_from, solve_boundary_condition, solve_boundary_condition_from,
    BoundaryCondition, OuterOptions,
};
pub use picard::{picard_bounded_ball, picard_with_options, uniform_grid, NonlinearProblem, PicardOptions};
pub use trajectory::{write_states_csv, IterationRecord, SolutionTrajectory};
