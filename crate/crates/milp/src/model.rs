//! Solver-agnostic mixed-integer linear model.
//!
//! Rows are stored sparsely, each carrying a short tag that names the family
//! of constraints it belongs to. Objectives are always minimized.

use std::fmt;

use crate::error::ModelError;

/// Index of a variable inside a [`MipModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

impl RowSense {
    pub fn symbol(self) -> &'static str {
        match self {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
    pub cost: f64,
}

/// One linear constraint `Σ a_j x_j (sense) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
    pub tag: String,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * x[v.0]).sum()
    }

    /// Amount by which `activity` violates the row (0 when satisfied).
    pub fn violation(&self, activity: f64) -> f64 {
        match self.sense {
            RowSense::Le => (activity - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - activity).max(0.0),
            RowSense::Eq => (activity - self.rhs).abs(),
        }
    }
}

/// A minimization MILP with bounded continuous and binary variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MipModel {
    vars: Vec<Variable>,
    rows: Vec<Row>,
    objective_offset: f64,
}

impl MipModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> VarId {
        self.vars.push(Variable { lower, upper, binary: false, cost });
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, cost: f64) -> VarId {
        self.vars.push(Variable { lower: 0.0, upper: 1.0, binary: true, cost });
        VarId(self.vars.len() - 1)
    }

    /// Adds a row, merging repeated variables and dropping exact zeros.
    pub fn add_row(
        &mut self,
        coeffs: impl IntoIterator<Item = (VarId, f64)>,
        sense: RowSense,
        rhs: f64,
        tag: impl Into<String>,
    ) -> usize {
        let mut merged: Vec<(VarId, f64)> = coeffs.into_iter().collect();
        merged.sort_by_key(|&(v, _)| v);
        merged.dedup_by(|next, kept| {
            if next.0 == kept.0 {
                kept.1 += next.1;
                true
            } else {
                false
            }
        });
        merged.retain(|&(_, a)| a != 0.0);
        self.rows.push(Row { coeffs: merged, sense, rhs, tag: tag.into() });
        self.rows.len() - 1
    }

    pub fn add_cost(&mut self, var: VarId, cost: f64) {
        self.vars[var.0].cost += cost;
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.vars[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn add_objective_offset(&mut self, offset: f64) {
        self.objective_offset += offset;
    }

    pub fn objective_offset(&self) -> f64 {
        self.objective_offset
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars.iter().enumerate().filter(|(_, v)| v.binary).map(|(i, _)| VarId(i))
    }

    pub fn n_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.binary).count()
    }

    /// Objective value of `x`, including the constant offset.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.vars.iter().zip(x).map(|(v, xi)| v.cost * xi).sum::<f64>()
    }

    /// Largest row or bound violation of `x`, with the offending row index
    /// (`None` when the worst violation is a variable bound).
    pub fn max_violation(&self, x: &[f64]) -> (f64, Option<usize>) {
        let mut worst = (0.0, None);
        for (v, &xi) in self.vars.iter().zip(x) {
            let viol = (v.lower - xi).max(xi - v.upper).max(0.0);
            if viol > worst.0 {
                worst = (viol, None);
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            let viol = row.violation(row.activity(x));
            if viol > worst.0 {
                worst = (viol, Some(r));
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, v) in self.vars.iter().enumerate() {
            if !v.cost.is_finite() || v.lower.is_nan() || v.upper.is_nan() {
                return Err(ModelError::NonFinite { what: format!("variable x{i}") });
            }
            if v.lower > v.upper {
                return Err(ModelError::EmptyDomain { var: i, lower: v.lower, upper: v.upper });
            }
            if v.binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(ModelError::BinaryBounds { var: i });
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(ModelError::NonFinite { what: format!("rhs of row {r}") });
            }
            for &(v, a) in &row.coeffs {
                if v.0 >= self.vars.len() {
                    return Err(ModelError::UnknownVariable { row: r, var: v.0 });
                }
                if !a.is_finite() {
                    return Err(ModelError::NonFinite { what: format!("coefficient in row {r}") });
                }
            }
        }
        if !self.objective_offset.is_finite() {
            return Err(ModelError::NonFinite { what: "objective offset".into() });
        }
        Ok(())
    }

    /// Copy of the model keeping only rows for which `keep` returns true.
    pub fn filter_rows(&self, mut keep: impl FnMut(&Row) -> bool) -> MipModel {
        MipModel {
            vars: self.vars.clone(),
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
            objective_offset: self.objective_offset,
        }
    }

    /// Column-wise view: for each variable, the rows it appears in.
    pub(crate) fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.vars.len()];
        for (r, row) in self.rows.iter().enumerate() {
            for &(v, a) in &row.coeffs {
                cols[v.0].push((r, a));
            }
        }
        cols
    }
}
