//! Translation of buildings, EV requests and tariffs into a MILP, and of the
//! solver's assignment back into power profiles and costs.
//!
//! Per EV and parked step there is a charging and (when allowed) a
//! discharging power. Per building and step there are grid import/export
//! powers and, in community mode, community export/import powers tied to one
//! direction binary through big-M rows.

use evflex_milp::{branch_and_bound, MipModel, RowSense, SolveOptions, SolveResult, SolveStatus, SolverError, VarId};
use log::{debug, warn};
use thiserror::Error;

use crate::cost::{electricity_cost, ev_cost};
use crate::model::{
    residual_series, validate_request, BuildingFlows, BuildingSeries, CostBreakdown, EvRequest, EvSchedule,
    ModelError, ScheduleSolution, ScheduleStatus, TimeGrid,
};
use crate::tariff::{CommunityTariffs, TariffBook, TariffError};

/// Constraint row tags.
pub mod tags {
    /// Charging energy balance including recharge of discharged energy.
    pub const EQ6: &str = "eq6";
    /// Total discharge within the owner's allowance.
    pub const EQ7A: &str = "eq7a";
    /// Cumulative discharge never ahead of cumulative charge.
    pub const EQ7B: &str = "eq7b";
    pub const EQ8: &str = "eq8";
    pub const EQ9: &str = "eq9";
    /// One community direction per building and step.
    pub const EQ10: &str = "eq10";
    /// Community flow capped by the building's own imbalance.
    pub const EQ11: &str = "eq11";
    /// Community exports and imports cancel.
    pub const EQ12: &str = "eq12";
    pub const BALANCE: &str = "balance";
    /// Grid import/export exclusivity in steps where export pays at least
    /// as much as import costs.
    pub const BIGM_LINK: &str = "bigM-link";

    pub const ALL: [&str; 10] = [EQ6, EQ7A, EQ7B, EQ8, EQ9, EQ10, EQ11, EQ12, BALANCE, BIGM_LINK];
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tariff(#[from] TariffError),
    #[error("big-M {big_m} kW is below the required {required} kW")]
    BadBigM { big_m: f64, required: f64 },
    #[error("no building with index {0}")]
    UnknownBuilding(usize),
    #[error("building {0} already coupled")]
    AlreadyCoupled(String),
    #[error("inconsistent solution: {0}")]
    InconsistentSolution(String),
    #[error("schedule infeasible{}", .tag.as_ref().map(|t| format!(" (constraint family {t})")).unwrap_or_default())]
    Infeasible { tag: Option<String> },
    #[error("schedule objective is unbounded")]
    Unbounded,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Variables of one EV; `charge[k]` and `discharge[k]` belong to step
/// `request.arrival_step + k`.
#[derive(Debug, Clone)]
pub struct EvVars {
    pub building: usize,
    pub request: EvRequest,
    pub charge: Vec<VarId>,
    pub discharge: Vec<VarId>,
}

impl EvVars {
    fn at(&self, vars: &[VarId], step: usize) -> Option<VarId> {
        step.checked_sub(self.request.arrival_step).and_then(|k| vars.get(k).copied())
    }

    pub fn charge_at(&self, step: usize) -> Option<VarId> {
        self.at(&self.charge, step)
    }

    pub fn discharge_at(&self, step: usize) -> Option<VarId> {
        self.at(&self.discharge, step)
    }
}

#[derive(Debug, Clone)]
pub struct CommVars {
    pub export: Vec<VarId>,
    pub import: Vec<VarId>,
    /// 1 = export allowed, 0 = import allowed.
    pub direction: Vec<VarId>,
}

#[derive(Debug, Clone)]
pub struct BuildingVars {
    pub grid_import: Vec<VarId>,
    pub grid_export: Vec<VarId>,
    pub grid_direction: Vec<Option<VarId>>,
    pub comm: Option<CommVars>,
}

#[derive(Debug, Clone, Default)]
pub struct VariableLayout {
    pub evs: Vec<EvVars>,
    /// Indexed like the builder's buildings; `None` until coupled.
    pub buildings: Vec<Option<BuildingVars>>,
}

impl VariableLayout {
    pub fn evs_of(&self, building: usize) -> impl Iterator<Item = &EvVars> + '_ {
        self.evs.iter().filter(move |e| e.building == building)
    }
}

/// A finished model plus everything needed to read its solutions.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub model: MipModel,
    pub layout: VariableLayout,
    pub grid: TimeGrid,
    pub tariffs: TariffBook,
    pub community: Option<CommunityTariffs>,
    pub buildings: Vec<BuildingSeries>,
}

/// Smallest admissible big-M for a building with `n_evs` EVs of at most
/// `p_max` kW each.
pub fn required_big_m(series: &BuildingSeries, n_evs: usize, p_max: f64) -> f64 {
    series.max_abs() + n_evs as f64 * p_max
}

/// Incrementally assembles the scheduling MILP.
pub struct ScheduleBuilder {
    grid: TimeGrid,
    tariffs: TariffBook,
    community: Option<CommunityTariffs>,
    model: MipModel,
    layout: VariableLayout,
    buildings: Vec<BuildingSeries>,
}

impl ScheduleBuilder {
    /// `community = None` builds the individual-management model (no
    /// community variables at all).
    pub fn new(grid: TimeGrid, tariffs: TariffBook, community: Option<CommunityTariffs>) -> Result<Self, ScheduleError> {
        tariffs.validate(&grid)?;
        Ok(Self { grid, tariffs, community, model: MipModel::new(), layout: VariableLayout::default(), buildings: Vec::new() })
    }

    pub fn add_building(&mut self, series: BuildingSeries) -> Result<usize, ScheduleError> {
        self.grid.check_len(&format!("net load of {}", series.building_id), series.net_load.len())?;
        self.buildings.push(series);
        self.layout.buildings.push(None);
        Ok(self.buildings.len() - 1)
    }

    /// Adds the power variables and period constraints of one EV parked at
    /// `building`.
    pub fn add_ev_block(&mut self, building: usize, req: &EvRequest) -> Result<&EvVars, ScheduleError> {
        if building >= self.buildings.len() {
            return Err(ScheduleError::UnknownBuilding(building));
        }
        let req = validate_request(req, &self.grid)?;
        let dt = self.grid.dt();
        let mut vars = EvVars { building, request: req.clone(), charge: Vec::new(), discharge: Vec::new() };
        if !req.is_parking_only() {
            for _ in req.window() {
                vars.charge.push(self.model.add_var(0.0, req.p_charge_max, 0.0));
            }
            if req.can_discharge() {
                for _ in req.window() {
                    vars.discharge.push(self.model.add_var(0.0, req.p_discharge_max, 0.0));
                }
            }

            // Σ charge·dt = t_R+·P+ + Σ discharge·dt / η
            let balance = vars
                .charge
                .iter()
                .map(|&c| (c, dt))
                .chain(vars.discharge.iter().map(|&d| (d, -dt / req.efficiency)));
            self.model.add_row(balance, RowSense::Eq, req.t_charge_req * req.p_charge_max, tags::EQ6);

            if !vars.discharge.is_empty() {
                let total = vars.discharge.iter().map(|&d| (d, dt));
                self.model.add_row(total, RowSense::Le, req.t_discharge_allow * req.p_discharge_max, tags::EQ7A);
                // prefix rows in charge-power units: Σ (P+/P-)·discharge - Σ charge <= 0
                let ratio = req.p_charge_max / req.p_discharge_max;
                for x in 0..vars.charge.len() {
                    let prefix = (0..=x).flat_map(|k| [(vars.discharge[k], ratio), (vars.charge[k], -1.0)]);
                    self.model.add_row(prefix, RowSense::Le, 0.0, tags::EQ7B);
                }
            }
        }
        self.layout.evs.push(vars);
        Ok(self.layout.evs.last().expect("just pushed"))
    }

    /// `max_h |L(h)| + N·max(P) + 1` for the building's current EVs.
    pub fn default_big_m(&self, building: usize) -> f64 {
        let (n, p) = self.ev_power_envelope(building);
        required_big_m(&self.buildings[building], n, p) + 1.0
    }

    fn ev_power_envelope(&self, building: usize) -> (usize, f64) {
        let evs: Vec<_> = self.layout.evs_of(building).collect();
        let p = evs
            .iter()
            .map(|e| e.request.p_charge_max.max(e.request.p_discharge_max))
            .fold(0.0, f64::max);
        (evs.len(), p)
    }

    fn ev_terms(&self, building: usize, step: usize, sign: f64) -> Vec<(VarId, f64)> {
        let mut terms = Vec::new();
        for ev in self.layout.evs_of(building) {
            if let Some(c) = ev.charge_at(step) {
                terms.push((c, sign));
            }
            if let Some(d) = ev.discharge_at(step) {
                terms.push((d, -sign));
            }
        }
        terms
    }

    /// Adds grid and (in community mode) community flows for a building
    /// whose EV blocks are already in place.
    pub fn add_building_coupling(&mut self, building: usize, big_m: f64) -> Result<(), ScheduleError> {
        if building >= self.buildings.len() {
            return Err(ScheduleError::UnknownBuilding(building));
        }
        if self.layout.buildings[building].is_some() {
            return Err(ScheduleError::AlreadyCoupled(self.buildings[building].building_id.clone()));
        }
        let (n, p) = self.ev_power_envelope(building);
        let required = required_big_m(&self.buildings[building], n, p);
        if !(big_m >= required) || !big_m.is_finite() {
            return Err(ScheduleError::BadBigM { big_m, required });
        }

        let steps = self.grid.steps();
        let mut vars = BuildingVars {
            grid_import: Vec::with_capacity(steps),
            grid_export: Vec::with_capacity(steps),
            grid_direction: Vec::with_capacity(steps),
            comm: self.community.map(|_| CommVars { export: Vec::new(), import: Vec::new(), direction: Vec::new() }),
        };
        for h in 0..steps {
            let load = self.buildings[building].net_load[h];
            let gi = self.model.add_var(0.0, f64::INFINITY, 0.0);
            let ge = self.model.add_var(0.0, f64::INFINITY, 0.0);
            vars.grid_import.push(gi);
            vars.grid_export.push(ge);

            // EV − grid_import + grid_export + comm_export − comm_import = −L
            let mut balance = self.ev_terms(building, h, 1.0);
            balance.extend([(gi, -1.0), (ge, 1.0)]);

            if let Some(comm) = vars.comm.as_mut() {
                let ce = self.model.add_var(0.0, big_m, 0.0);
                let ci = self.model.add_var(0.0, big_m, 0.0);
                let d = self.model.add_binary(0.0);
                comm.export.push(ce);
                comm.import.push(ci);
                comm.direction.push(d);
                balance.extend([(ce, 1.0), (ci, -1.0)]);

                self.model.add_row([(ce, 1.0), (d, -big_m)], RowSense::Le, 0.0, tags::EQ10);
                self.model.add_row([(ci, 1.0), (d, big_m)], RowSense::Le, big_m, tags::EQ10);
                // export only out of a surplus: ce <= -(L + EV) + M(1 - d)
                let mut cap = self.ev_terms(building, h, 1.0);
                cap.extend([(ce, 1.0), (d, big_m)]);
                self.model.add_row(cap, RowSense::Le, big_m - load, tags::EQ11);
                // import only into a deficit: ci <= (L + EV) + M d
                let mut cap = self.ev_terms(building, h, -1.0);
                cap.extend([(ci, 1.0), (d, -big_m)]);
                self.model.add_row(cap, RowSense::Le, load, tags::EQ11);
            }
            self.model.add_row(balance, RowSense::Eq, -load, tags::BALANCE);

            if self.tariffs.grid_import[h] <= self.tariffs.grid_export_comp {
                // exporting pays at least as much as importing costs, so
                // simultaneous import and export must be ruled out explicitly
                let grid_m = self.grid_big_m(big_m);
                let z = self.model.add_binary(0.0);
                self.model.add_row([(gi, 1.0), (z, -grid_m)], RowSense::Le, 0.0, tags::BIGM_LINK);
                self.model.add_row([(ge, 1.0), (z, grid_m)], RowSense::Le, grid_m, tags::BIGM_LINK);
                vars.grid_direction.push(Some(z));
            } else {
                vars.grid_direction.push(None);
            }
        }
        self.layout.buildings[building] = Some(vars);
        Ok(())
    }

    /// Bound on any grid flow: own imbalance plus whatever the community
    /// could route through the building.
    fn grid_big_m(&self, own_m: f64) -> f64 {
        let community_m: f64 = if self.community.is_some() {
            (0..self.buildings.len()).map(|b| self.default_big_m(b)).sum()
        } else {
            0.0
        };
        own_m + community_m
    }

    /// Community exports and imports cancel at every step.
    pub fn add_community_balance(&mut self) -> Result<(), ScheduleError> {
        if self.community.is_none() {
            return Ok(());
        }
        for h in 0..self.grid.steps() {
            let mut terms = Vec::new();
            for (b, vars) in self.layout.buildings.iter().enumerate() {
                let vars = vars.as_ref().ok_or(ScheduleError::UnknownBuilding(b))?;
                let comm = vars.comm.as_ref().expect("community mode");
                terms.push((comm.export[h], 1.0));
                terms.push((comm.import[h], -1.0));
            }
            self.model.add_row(terms, RowSense::Eq, 0.0, tags::EQ12);
        }
        Ok(())
    }

    /// Sets the objective: electricity cost of every building minus the
    /// revenue collected from every EV.
    pub fn build_objective(&mut self) -> Result<(), ScheduleError> {
        let dt = self.grid.dt();
        let t = &self.tariffs;
        for (b, vars) in self.layout.buildings.iter().enumerate() {
            let vars = vars.as_ref().ok_or(ScheduleError::UnknownBuilding(b))?;
            for h in 0..self.grid.steps() {
                self.model.add_cost(vars.grid_import[h], dt * t.grid_import[h]);
                self.model.add_cost(vars.grid_export[h], -dt * t.grid_export_comp);
                if let (Some(comm), Some(prices)) = (&vars.comm, &self.community) {
                    self.model.add_cost(comm.import[h], dt * prices.import_price);
                    self.model.add_cost(comm.export[h], -dt * prices.export_comp);
                }
            }
        }
        for ev in &self.layout.evs {
            let req = &ev.request;
            // revenue = t_P (C_P - |C_F|) + Σ_h (dt/P+)(|C_F| + C_C(h)) charge
            //         + Σ_h (dt/P-)(|C_F| - |C_D|) discharge
            self.model.add_objective_offset(-req.t_park * (t.parking - t.flexibility_reward));
            for (k, &c) in ev.charge.iter().enumerate() {
                let h = req.arrival_step + k;
                self.model.add_cost(c, -(dt / req.p_charge_max) * (t.flexibility_reward + t.charging[h]));
            }
            for &d in &ev.discharge {
                self.model.add_cost(d, -(dt / req.p_discharge_max) * (t.flexibility_reward - t.discharging_reward));
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<BuiltModel, ScheduleError> {
        if let Some(b) = self.layout.buildings.iter().position(Option::is_none) {
            return Err(ScheduleError::UnknownBuilding(b));
        }
        Ok(BuiltModel {
            model: self.model,
            layout: self.layout,
            grid: self.grid,
            tariffs: self.tariffs,
            community: self.community,
            buildings: self.buildings,
        })
    }
}

/// Builds the complete model for `buildings[b]` hosting `evs[b]`.
pub fn build_schedule_model(
    grid: TimeGrid,
    tariffs: TariffBook,
    community: Option<CommunityTariffs>,
    buildings: &[BuildingSeries],
    evs: &[Vec<EvRequest>],
) -> Result<BuiltModel, ScheduleError> {
    if buildings.len() != evs.len() {
        return Err(ModelError::DimensionMismatch(format!(
            "{} buildings but {} EV lists",
            buildings.len(),
            evs.len()
        ))
        .into());
    }
    let mut builder = ScheduleBuilder::new(grid, tariffs, community)?;
    for (series, fleet) in buildings.iter().zip(evs) {
        let b = builder.add_building(series.clone())?;
        for req in fleet {
            builder.add_ev_block(b, req)?;
        }
        let m = builder.default_big_m(b);
        builder.add_building_coupling(b, m)?;
    }
    builder.add_community_balance()?;
    builder.build_objective()?;
    builder.finish()
}

/// Feasibility tolerance for reading back assignments.
const READ_TOL: f64 = 1e-6;
/// Relative agreement required between recomputed and solver objective.
const COST_AGREEMENT: f64 = 1e-6;

fn clean(v: f64) -> f64 {
    if v.abs() < 1e-9 {
        0.0
    } else {
        v
    }
}

/// Reads an assignment back into a [`ScheduleSolution`], recomputing every
/// cost from the power profiles and checking it against the solver's
/// objective.
pub fn extract_solution(built: &BuiltModel, raw: &SolveResult) -> Result<ScheduleSolution, ScheduleError> {
    let x = &raw.assignment;
    if x.len() != built.model.n_vars() {
        return Err(ScheduleError::InconsistentSolution(format!(
            "assignment has {} values, model has {} variables",
            x.len(),
            built.model.n_vars()
        )));
    }
    for row in built.model.rows() {
        let viol = row.violation(row.activity(x));
        if viol > READ_TOL * row.rhs.abs().max(1.0) {
            return Err(ScheduleError::InconsistentSolution(format!("{} row violated by {viol:.3e}", row.tag)));
        }
    }
    for (j, v) in built.model.vars().iter().enumerate() {
        if x[j] < v.lower - READ_TOL || x[j] > v.upper + READ_TOL {
            return Err(ScheduleError::InconsistentSolution(format!("x{j} = {} outside its bounds", x[j])));
        }
    }

    let grid = built.grid;
    let steps = grid.steps();
    let value = |v: VarId| clean(x[v.0]);

    let mut evs = Vec::with_capacity(built.layout.evs.len());
    for ev in &built.layout.evs {
        let req = &ev.request;
        let mut charge = vec![0.0; steps];
        let mut discharge = vec![0.0; steps];
        for h in req.window() {
            if let Some(c) = ev.charge_at(h) {
                charge[h] = value(c).clamp(0.0, req.p_charge_max);
            }
            if let Some(d) = ev.discharge_at(h) {
                discharge[h] = value(d).clamp(0.0, req.p_discharge_max);
            }
        }
        evs.push(EvSchedule {
            ev_id: req.ev_id.clone(),
            building_id: built.buildings[ev.building].building_id.clone(),
            request: req.clone(),
            charge,
            discharge,
        });
    }

    let mut flows = Vec::with_capacity(built.buildings.len());
    for (b, vars) in built.layout.buildings.iter().enumerate() {
        let vars = vars.as_ref().ok_or(ScheduleError::UnknownBuilding(b))?;
        let (export, import) = match &vars.comm {
            // the direction binary decides which side may be non-zero; the
            // other side only carries LP noise of order M times the
            // integrality tolerance and is dropped
            Some(c) => c
                .direction
                .iter()
                .enumerate()
                .map(|(h, &d)| {
                    if x[d.0] >= 0.5 {
                        (value(c.export[h]).max(0.0), 0.0)
                    } else {
                        (0.0, value(c.import[h]).max(0.0))
                    }
                })
                .unzip(),
            None => (vec![0.0; steps], vec![0.0; steps]),
        };
        flows.push(BuildingFlows {
            building_id: built.buildings[b].building_id.clone(),
            comm_export: export,
            comm_import: import,
            grid_residual: Vec::new(),
        });
    }

    let status = match raw.status {
        SolveStatus::Optimal | SolveStatus::GapReached => ScheduleStatus::Optimal,
        SolveStatus::Limit => ScheduleStatus::FeasibleWithGap,
        SolveStatus::Infeasible | SolveStatus::Unbounded => ScheduleStatus::Infeasible,
    };
    let mut sol = ScheduleSolution { grid, evs, buildings: flows, costs: Vec::new(), status };

    for (b, series) in built.buildings.iter().enumerate() {
        let residual = residual_series(series, &sol)?;
        let flows = &sol.buildings[b];
        let electricity = electricity_cost(
            &residual,
            &flows.comm_export,
            &flows.comm_import,
            &built.tariffs,
            built.community.as_ref(),
            grid.dt(),
        );
        let per_ev = sol
            .evs_of(&series.building_id)
            .map(|e| ev_cost(&e.ev_id, &e.request, &e.charge, &e.discharge, &built.tariffs, &grid))
            .collect::<Result<Vec<_>, _>>()?;
        sol.costs.push(CostBreakdown::new(electricity, per_ev));
        sol.buildings[b].grid_residual = residual;
    }

    let recomputed = sol.total_objective();
    if (recomputed - raw.objective).abs() > COST_AGREEMENT * raw.objective.abs().max(1.0) {
        return Err(ScheduleError::InconsistentSolution(format!(
            "recomputed objective {recomputed} disagrees with solver objective {}",
            raw.objective
        )));
    }
    Ok(sol)
}

/// Names the first constraint family whose removal makes the LP relaxation
/// feasible, if any.
pub fn diagnose_infeasibility(built: &BuiltModel) -> Option<String> {
    let opts = SolveOptions::default();
    tags::ALL.iter().find_map(|&tag| {
        let relaxed = built.model.filter_rows(|r| r.tag != tag);
        match evflex_milp::solve_lp(&relaxed, &opts) {
            Ok(r) if r.status == SolveStatus::Optimal || r.status == SolveStatus::Unbounded => Some(tag.to_string()),
            _ => None,
        }
    })
}

/// Solves a built model with branch-and-bound and extracts the schedule.
pub fn solve_schedule(built: &BuiltModel, opts: &SolveOptions) -> Result<(ScheduleSolution, SolveResult), ScheduleError> {
    debug!(
        "solving schedule: {} vars, {} rows, {} binaries",
        built.model.n_vars(),
        built.model.n_rows(),
        built.model.n_binaries()
    );
    let raw = match branch_and_bound(&built.model, opts) {
        Ok(r) => r,
        Err(SolverError::LimitReached { incumbent: Some(inc) }) => {
            warn!("search limit reached, keeping incumbent with gap {:.3e}", inc.gap());
            *inc
        }
        Err(e) => return Err(e.into()),
    };
    match raw.status {
        SolveStatus::Infeasible => return Err(ScheduleError::Infeasible { tag: diagnose_infeasibility(built) }),
        SolveStatus::Unbounded => return Err(ScheduleError::Unbounded),
        _ => {}
    }
    let sol = extract_solution(built, &raw)?;
    Ok((sol, raw))
}
