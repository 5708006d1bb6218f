//! Exact MILP solving for desk-scale scheduling models.
//!
//! [`MipModel`] is a sparse, minimization-only model with continuous and
//! binary variables. [`solve_lp`] solves its relaxation, [`branch_and_bound`]
//! searches the binaries, and [`export_lp_file`] writes it in LP text format
//! for external solvers.

mod bnb;
mod error;
mod lp;
pub mod lpfile;
mod model;
mod solve;

pub use bnb::branch_and_bound;
pub use error::{ModelError, SolverError};
pub use lp::solve_lp;
pub use lpfile::{export_lp_file, read_lp_dimensions, write_lp_string, LpDimensions};
pub use model::{MipModel, Row, RowSense, VarId, Variable};
pub use solve::{relative_gap, SolveOptions, SolveResult, SolveStatus};
