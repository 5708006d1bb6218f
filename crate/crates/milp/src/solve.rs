use std::fmt;

use crate::error::SolverError;

/// Tolerances and limits shared by [`solve_lp`](crate::solve_lp) and
/// [`branch_and_bound`](crate::branch_and_bound).
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    /// Relative gap `|incumbent - bound| / max(1, |incumbent|)` at which the
    /// search may stop.
    pub rel_gap: f64,
    pub node_limit: Option<u64>,
    pub time_limit_seconds: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            integrality_tol: 1e-6,
            rel_gap: 1e-6,
            node_limit: None,
            time_limit_seconds: None,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        let check = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(SolverError::InvalidOptions(format!("{name} must be positive, got {v}")))
            }
        };
        check("feasibility_tol", self.feasibility_tol)?;
        check("integrality_tol", self.integrality_tol)?;
        check("rel_gap", self.rel_gap)?;
        if self.integrality_tol >= 0.5 {
            return Err(SolverError::InvalidOptions("integrality_tol must be < 0.5".into()));
        }
        if let Some(t) = self.time_limit_seconds {
            check("time_limit_seconds", t)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Search exhausted (or LP solved); objective is proven optimal.
    Optimal,
    /// Stopped early with `gap <= rel_gap`.
    GapReached,
    Infeasible,
    Unbounded,
    /// Node or time limit hit before the gap closed.
    Limit,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::GapReached => "gap_reached",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Limit => "limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// One value per model variable; empty when no feasible point is known.
    pub assignment: Vec<f64>,
    /// Objective including the model's constant offset (`NaN` without an
    /// assignment).
    pub objective: f64,
    pub best_bound: f64,
    pub nodes: u64,
}

impl SolveResult {
    pub(crate) fn without_point(status: SolveStatus, nodes: u64) -> Self {
        let bound = match status {
            SolveStatus::Infeasible => f64::INFINITY,
            SolveStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::NAN,
        };
        Self { status, assignment: Vec::new(), objective: f64::NAN, best_bound: bound, nodes }
    }

    pub fn has_point(&self) -> bool {
        !self.assignment.is_empty()
    }

    /// `|objective - best_bound| / max(1, |objective|)`.
    pub fn gap(&self) -> f64 {
        relative_gap(self.objective, self.best_bound)
    }
}

pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    if incumbent == bound {
        return 0.0;
    }
    (incumbent - bound).abs() / incumbent.abs().max(1.0)
}
