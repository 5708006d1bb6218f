//! LP relaxations.
//!
//! The simplex itself is microlp's bounded dual/primal revised simplex with
//! sparse LU; this module owns the translation from [`MipModel`] and the
//! post-solve feasibility audit.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::SolverError;
use crate::model::{MipModel, RowSense};
use crate::solve::{SolveOptions, SolveResult, SolveStatus};

pub(crate) enum LpOutcome {
    Optimal(microlp::Solution),
    Infeasible,
    Unbounded,
}

/// A model translated once into solver form, with binaries relaxed to
/// `[lower, upper]`.
pub(crate) struct Relaxation<'m> {
    model: &'m MipModel,
    vars: Vec<microlp::Variable>,
    problem: Problem,
}

impl<'m> Relaxation<'m> {
    pub fn new(model: &'m MipModel) -> Self {
        Self::with_fixings(model, &[])
    }

    /// Same as [`Relaxation::new`] but with some variables pinned to values.
    pub fn with_fixings(model: &'m MipModel, fixings: &[(usize, f64)]) -> Self {
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let mut bounds: Vec<(f64, f64)> = model.vars().iter().map(|v| (v.lower, v.upper)).collect();
        for &(j, val) in fixings {
            bounds[j] = (val, val);
        }
        let vars: Vec<_> = model
            .vars()
            .iter()
            .zip(&bounds)
            .map(|(v, &b)| problem.add_var(v.cost, b))
            .collect();
        for row in model.rows() {
            let op = match row.sense {
                RowSense::Le => ComparisonOp::Le,
                RowSense::Eq => ComparisonOp::Eq,
                RowSense::Ge => ComparisonOp::Ge,
            };
            let expr: Vec<(microlp::Variable, f64)> =
                row.coeffs.iter().map(|&(v, a)| (vars[v.0], a)).collect();
            problem.add_constraint(expr, op, row.rhs);
        }
        Self { model, vars, problem }
    }

    pub fn solve(&self) -> Result<LpOutcome, SolverError> {
        map_outcome(self.problem.solve())
    }

    pub fn values(&self, sol: &microlp::Solution) -> Vec<f64> {
        self.vars.iter().map(|&v| sol.var_value_raw(v)).collect()
    }

    pub fn objective(&self, sol: &microlp::Solution) -> f64 {
        sol.objective() + self.model.objective_offset()
    }

    /// Re-solves `parent` with one more variable fixed (warm start).
    pub fn fix(&self, parent: microlp::Solution, var: usize, val: f64) -> Result<LpOutcome, SolverError> {
        map_outcome(parent.fix_var(self.vars[var], val))
    }
}

fn map_outcome(res: Result<microlp::SolveOutcome, microlp::Error>) -> Result<LpOutcome, SolverError> {
    match res {
        Ok(outcome) => match outcome.into_solution() {
            Ok(sol) => Ok(LpOutcome::Optimal(sol)),
            Err(_) => Err(SolverError::NumericalBreakdown("LP solve interrupted".into())),
        },
        Err(microlp::Error::Infeasible) => Ok(LpOutcome::Infeasible),
        Err(microlp::Error::Unbounded) => Ok(LpOutcome::Unbounded),
        Err(e) => Err(SolverError::NumericalBreakdown(e.to_string())),
    }
}

/// Checks rows and bounds of `x` against `tol`, scaled by the magnitude of
/// the row's right-hand side.
pub(crate) fn audit(model: &MipModel, x: &[f64], tol: f64) -> Result<(), SolverError> {
    for (j, v) in model.vars().iter().enumerate() {
        let viol = (v.lower - x[j]).max(x[j] - v.upper);
        if viol > tol * v.lower.abs().max(v.upper.abs()).clamp(1.0, 1e6) {
            return Err(SolverError::NumericalBreakdown(format!(
                "x{j} = {} outside [{}, {}]",
                x[j], v.lower, v.upper
            )));
        }
    }
    for (r, row) in model.rows().iter().enumerate() {
        let viol = row.violation(row.activity(x));
        if viol > tol * row.rhs.abs().max(1.0) {
            return Err(SolverError::NumericalBreakdown(format!(
                "row {r} ({}) violated by {viol:e}",
                row.tag
            )));
        }
    }
    Ok(())
}

/// Solves the LP relaxation of `model` (binary flags ignored).
pub fn solve_lp(model: &MipModel, opts: &SolveOptions) -> Result<SolveResult, SolverError> {
    model.validate()?;
    opts.validate()?;
    let relax = Relaxation::new(model);
    match relax.solve()? {
        LpOutcome::Infeasible => Ok(SolveResult::without_point(SolveStatus::Infeasible, 1)),
        LpOutcome::Unbounded => Ok(SolveResult::without_point(SolveStatus::Unbounded, 1)),
        LpOutcome::Optimal(sol) => {
            let x = relax.values(&sol);
            audit(model, &x, opts.feasibility_tol)?;
            let objective = relax.objective(&sol);
            Ok(SolveResult {
                status: SolveStatus::Optimal,
                assignment: x,
                objective,
                best_bound: objective,
                nodes: 1,
            })
        }
    }
}
