//! Greedy outer loops: Frank-Wolfe with fixed or line-search steps, and the
//! norm- and fully-corrective variants that re-fit all weights each round.

mod config;
mod gram;
mod qp;
mod run;
mod steps;
mod trace;
mod workspace;

pub use config::{Algorithm, Init, LmoChoice, SolverConfig};
pub use gram::{inner_product, log_inner_product, GramCache};
pub use qp::{project_simplex, solve_simplex_qp, QpSolution, SimplexQpProblem};
pub use run::{run, run_estimator, RunOutput, SolverFailure};
pub use steps::{
    fixed_step_size, fully_corrective_step, fw_step_fixed, fw_step_linesearch, linesearch_step_size,
    norm_corrective_step, CorrectiveSpec, CorrectiveStep,
};
pub use trace::{ConvergenceTrace, EventKind, IterationRecord, TraceEvent, TRACE_HEADER};
