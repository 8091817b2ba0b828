//! Optimization machinery: linear programs, a dense bounded-variable
//! simplex, branch-and-bound for mixed-integer problems, interval bound
//! propagation through networks, exact big-M ReLU encodings, and a dense
//! SQP solver for the multiple-shooting control problems.

pub mod linprog;
pub mod simplex;

pub mod bounds;
pub mod branch_bound;
pub mod qp;
pub mod relu_encode;
pub mod sqp;

pub use branch_bound::{solve_milp, MilpConfig, MilpSolution, MilpStatus};
pub use linprog::{LinProgram, LpError, MilpProblem, Row, Sense};
pub use simplex::{simplex_solve, LpSolution, LpStatus, SimplexCore};
