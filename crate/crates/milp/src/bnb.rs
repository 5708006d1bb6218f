//! Best-first branch-and-bound over binary variables.
//!
//! Nodes are ordered by LP bound with ties broken by creation id, so the
//! search is reproducible. After branching, the child on the rounding side of
//! the fractional value is processed immediately (a depth-first dive) and its
//! sibling is queued. Children are evaluated lazily from a shared, already
//! factorized parent LP.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::Instant;

use log::debug;

use crate::error::SolverError;
use crate::lp::{audit, LpOutcome, Relaxation};
use crate::model::MipModel;
use crate::solve::{relative_gap, SolveOptions, SolveResult, SolveStatus};

/// Binaries changed by a rounding beyond this count are polished with a fresh
/// LP instead of a chain of warm-started fixes.
const MAX_WARM_FIXES: usize = 8;
/// Run the rounding heuristic at the root and then every this many nodes.
const HEURISTIC_PERIOD: u64 = 16;

enum NodeLp {
    Solved(microlp::Solution),
    Pending { parent: Arc<microlp::Solution>, var: usize, val: f64 },
}

struct Node {
    id: u64,
    bound: f64,
    lp: NodeLp,
}

struct Queued(Node);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // BinaryHeap is a max-heap: reverse so the smallest (bound, id) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.bound.total_cmp(&self.0.bound).then_with(|| other.0.id.cmp(&self.0.id))
    }
}

struct Incumbent {
    objective: f64,
    x: Vec<f64>,
}

struct Search<'m> {
    model: &'m MipModel,
    opts: &'m SolveOptions,
    relax: Relaxation<'m>,
    columns: Vec<Vec<(usize, f64)>>,
    binaries: Vec<usize>,
    incumbent: Option<Incumbent>,
}

impl<'m> Search<'m> {
    fn prune_cutoff(&self) -> f64 {
        match &self.incumbent {
            Some(inc) => inc.objective - 1e-9 * inc.objective.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    fn most_fractional(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.binaries {
            let frac = (x[j] - x[j].round()).abs();
            if frac > self.opts.integrality_tol && best.is_none_or(|(_, f)| frac > f) {
                best = Some((j, frac));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Moves fractional binaries to 0/1 one at a time, keeping every row
    /// that touches them feasible with the continuous values left unchanged.
    fn simple_rounding(&self, x: &[f64]) -> Option<Vec<(usize, f64)>> {
        let rows = self.model.rows();
        let mut activity: Vec<f64> = rows.iter().map(|r| r.activity(x)).collect();
        let tol = self.opts.feasibility_tol;
        let mut fixes = Vec::new();
        for &j in &self.binaries {
            let nearest = x[j].round().clamp(0.0, 1.0);
            if (x[j] - nearest).abs() <= self.opts.integrality_tol {
                fixes.push((j, nearest));
                continue;
            }
            let chosen = [nearest, 1.0 - nearest].into_iter().find(|&v| {
                let delta = v - x[j];
                self.columns[j].iter().all(|&(r, a)| {
                    let row = &rows[r];
                    let before = row.violation(activity[r]);
                    row.violation(activity[r] + a * delta) <= before.max(tol * row.rhs.abs().max(1.0))
                })
            })?;
            for &(r, a) in &self.columns[j] {
                activity[r] += a * (chosen - x[j]);
            }
            fixes.push((j, chosen));
        }
        Some(fixes)
    }

    /// Solves the LP with every binary pinned and offers the result as an
    /// incumbent.
    fn polish(&mut self, warm: Option<&microlp::Solution>, x: &[f64], fixes: &[(usize, f64)]) -> Result<(), SolverError> {
        let changed: Vec<(usize, f64)> = fixes.iter().copied().filter(|&(j, v)| x[j] != v).collect();
        let mut point = None;
        if let Some(sol) = warm.filter(|_| changed.len() <= MAX_WARM_FIXES) {
            let mut cur = Some(sol.clone());
            for &(j, v) in &changed {
                cur = match self.relax.fix(cur.take().expect("chain"), j, v)? {
                    LpOutcome::Optimal(next) => Some(next),
                    _ => None,
                };
                if cur.is_none() {
                    break;
                }
            }
            if let Some(cur) = cur {
                let xs = self.relax.values(&cur);
                // unfixed binaries may drift during the re-solve
                if fixes.iter().all(|&(j, v)| (xs[j] - v).abs() <= self.opts.integrality_tol) {
                    let mut xs = xs;
                    for &(j, v) in fixes {
                        xs[j] = v;
                    }
                    point = Some(xs);
                }
            }
        }
        let point = match point {
            Some(p) => p,
            None => {
                let fixed = Relaxation::with_fixings(self.model, fixes);
                match fixed.solve()? {
                    LpOutcome::Optimal(sol) => fixed.values(&sol),
                    _ => return Ok(()),
                }
            }
        };
        if audit(self.model, &point, self.opts.feasibility_tol).is_err() {
            debug!("discarding polished point that fails the feasibility audit");
            return Ok(());
        }
        let objective = self.model.objective_value(&point);
        if self.incumbent.as_ref().is_none_or(|inc| objective < inc.objective) {
            debug!("new incumbent {objective}");
            self.incumbent = Some(Incumbent { objective, x: point });
        }
        Ok(())
    }
}

/// Solves `model` to `opts.rel_gap` by branching on its binary variables.
pub fn branch_and_bound(model: &MipModel, opts: &SolveOptions) -> Result<SolveResult, SolverError> {
    model.validate()?;
    opts.validate()?;
    let started = Instant::now();
    let relax = Relaxation::new(model);
    let root = match relax.solve()? {
        LpOutcome::Optimal(sol) => sol,
        LpOutcome::Infeasible => return Ok(SolveResult::without_point(SolveStatus::Infeasible, 1)),
        LpOutcome::Unbounded => return Ok(SolveResult::without_point(SolveStatus::Unbounded, 1)),
    };
    let mut search = Search {
        model,
        opts,
        columns: model.columns(),
        binaries: model.binaries().map(|v| v.0).collect(),
        relax,
        incumbent: None,
    };

    let mut heap: BinaryHeap<Queued> = BinaryHeap::new();
    let mut next_id = 1u64;
    let root_bound = search.relax.objective(&root);
    let mut current = Some(Node { id: 0, bound: root_bound, lp: NodeLp::Solved(root) });
    let mut explored = 0u64;
    let mut hit_limit = false;
    let mut gap_stop = false;

    loop {
        let node = match current.take() {
            Some(n) => n,
            None => match heap.pop() {
                Some(Queued(n)) => n,
                None => break,
            },
        };
        if node.bound >= search.prune_cutoff() {
            continue;
        }
        if let Some(inc) = &search.incumbent {
            let open = heap.peek().map_or(node.bound, |q| q.0.bound.min(node.bound));
            if relative_gap(inc.objective, open) <= opts.rel_gap {
                heap.push(Queued(node));
                gap_stop = true;
                break;
            }
        }
        let over_nodes = opts.node_limit.is_some_and(|lim| explored >= lim);
        let over_time = opts.time_limit_seconds.is_some_and(|t| started.elapsed().as_secs_f64() >= t);
        if over_nodes || over_time {
            heap.push(Queued(node));
            hit_limit = true;
            break;
        }

        let sol = match node.lp {
            NodeLp::Solved(sol) => sol,
            NodeLp::Pending { parent, var, val } => {
                let parent = Arc::try_unwrap(parent).unwrap_or_else(|shared| (*shared).clone());
                match search.relax.fix(parent, var, val)? {
                    LpOutcome::Optimal(sol) => sol,
                    LpOutcome::Infeasible => continue,
                    LpOutcome::Unbounded => {
                        return Ok(SolveResult::without_point(SolveStatus::Unbounded, explored + 1));
                    }
                }
            }
        };
        explored += 1;
        let bound = search.relax.objective(&sol);
        if bound >= search.prune_cutoff() {
            continue;
        }
        let x = search.relax.values(&sol);

        let Some(branch_var) = search.most_fractional(&x) else {
            let fixes: Vec<(usize, f64)> =
                search.binaries.iter().map(|&j| (j, x[j].round().clamp(0.0, 1.0))).collect();
            search.polish(Some(&sol), &x, &fixes)?;
            continue;
        };

        if explored == 1 || explored.is_multiple_of(HEURISTIC_PERIOD) {
            if let Some(fixes) = search.simple_rounding(&x) {
                search.polish(Some(&sol), &x, &fixes)?;
                if bound >= search.prune_cutoff() {
                    continue;
                }
            }
        }

        let preferred = if x[branch_var] >= 0.5 { 1.0 } else { 0.0 };
        let parent = Arc::new(sol);
        let sibling = Node {
            id: next_id,
            bound,
            lp: NodeLp::Pending { parent: Arc::clone(&parent), var: branch_var, val: 1.0 - preferred },
        };
        let dive = Node {
            id: next_id + 1,
            bound,
            lp: NodeLp::Pending { parent, var: branch_var, val: preferred },
        };
        next_id += 2;
        heap.push(Queued(sibling));
        current = Some(dive);
    }

    let open_bound = heap.peek().map(|q| q.0.bound);
    debug!("branch-and-bound explored {explored} nodes");
    match search.incumbent {
        Some(inc) => {
            let best_bound = open_bound.map_or(inc.objective, |b| b.min(inc.objective));
            let status = if hit_limit {
                SolveStatus::Limit
            } else if gap_stop {
                SolveStatus::GapReached
            } else {
                SolveStatus::Optimal
            };
            let result = SolveResult {
                status,
                assignment: inc.x,
                objective: inc.objective,
                best_bound,
                nodes: explored,
            };
            if hit_limit {
                Err(SolverError::LimitReached { incumbent: Some(Box::new(result)) })
            } else {
                Ok(result)
            }
        }
        None if hit_limit => Err(SolverError::LimitReached { incumbent: None }),
        None => Ok(SolveResult::without_point(SolveStatus::Infeasible, explored)),
    }
}
