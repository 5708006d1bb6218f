//! Independent feasibility audit of a returned schedule.
//!
//! Works on the read-back power profiles only, never on the solver model, so
//! it catches both modelling and read-back mistakes.

use std::fmt;

use crate::model::{BuildingSeries, ScheduleSolution};

/// Energy balance tolerance, kWh.
pub const ENERGY_TOL: f64 = 1e-6;
/// Slack on cumulative discharge versus cumulative charge, kW-steps.
pub const PREFIX_SLACK: f64 = 1e-9;
/// Largest admissible product of community export and import in a step.
pub const EXCLUSIVITY_TOL: f64 = 1e-9;
/// Tolerance on flows and community cancellation, kW.
pub const FLOW_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    EnergyBalance,
    DischargeAllowance,
    PrefixDominance,
    PowerBounds,
    DirectionExclusivity,
    Cancellation,
    FlowCap,
    Residual,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::EnergyBalance => "energy-balance",
            Check::DischargeAllowance => "discharge-allowance",
            Check::PrefixDominance => "prefix-dominance",
            Check::PowerBounds => "power-bounds",
            Check::DirectionExclusivity => "direction-exclusivity",
            Check::Cancellation => "cancellation",
            Check::FlowCap => "flow-cap",
            Check::Residual => "residual",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub check: Check,
    /// EV or building id, or `community`.
    pub subject: String,
    pub step: Option<usize>,
    /// How far past the tolerance the value is.
    pub excess: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violated by {} ({:.3e})", self.check.name(), self.subject, self.excess)?;
        if let Some(h) = self.step {
            write!(f, " at step {h}")?;
        }
        Ok(())
    }
}

/// Runs every check and returns all violations found.
pub fn audit_solution(sol: &ScheduleSolution, buildings: &[BuildingSeries]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut flag = |check, subject: &str, step, excess: f64| {
        if excess > 0.0 {
            out.push(Violation { check, subject: subject.to_string(), step, excess });
        }
    };
    let dt = sol.grid.dt();
    let steps = sol.grid.steps();

    for ev in &sol.evs {
        let r = &ev.request;
        for h in 0..steps {
            let (c, d) = (ev.charge[h], ev.discharge[h]);
            let cap_d = if r.can_discharge() { r.p_discharge_max } else { 0.0 };
            let cap_c = if r.is_parked(h) && !r.is_parking_only() { r.p_charge_max } else { 0.0 };
            let cap_d = if r.is_parked(h) { cap_d } else { 0.0 };
            let excess = (-c).max(c - cap_c).max(-d).max(d - cap_d);
            flag(Check::PowerBounds, &ev.ev_id, Some(h), excess);
        }
        let charged: f64 = ev.charge.iter().sum::<f64>() * dt;
        let discharged: f64 = ev.discharge.iter().sum::<f64>() * dt;
        let target = r.t_charge_req * r.p_charge_max;
        flag(Check::EnergyBalance, &ev.ev_id, None, (charged - discharged / r.efficiency - target).abs() - ENERGY_TOL);
        if r.can_discharge() {
            let allowance = r.t_discharge_allow * r.p_discharge_max;
            flag(Check::DischargeAllowance, &ev.ev_id, None, discharged - allowance - ENERGY_TOL);
            let ratio = r.p_charge_max / r.p_discharge_max;
            let mut lead = 0.0;
            let mut scale: f64 = 1.0;
            for h in r.window() {
                lead += ratio * ev.discharge[h] - ev.charge[h];
                scale = scale.max(ev.charge[h]);
                flag(Check::PrefixDominance, &ev.ev_id, Some(h), lead - PREFIX_SLACK * scale);
            }
        }
    }

    for flows in &sol.buildings {
        let Some(series) = buildings.iter().find(|s| s.building_id == flows.building_id) else {
            flag(Check::Residual, &flows.building_id, None, f64::INFINITY);
            continue;
        };
        let ev = sol.ev_power(&flows.building_id);
        for h in 0..steps {
            let (ce, ci) = (flows.comm_export[h], flows.comm_import[h]);
            let own = series.net_load[h] + ev[h];
            flag(Check::DirectionExclusivity, &flows.building_id, Some(h), ce * ci - EXCLUSIVITY_TOL);
            flag(Check::FlowCap, &flows.building_id, Some(h), (-ce).max(-ci) - FLOW_TOL);
            flag(Check::FlowCap, &flows.building_id, Some(h), ce - (-own).max(0.0) - FLOW_TOL);
            flag(Check::FlowCap, &flows.building_id, Some(h), ci - own.max(0.0) - FLOW_TOL);
            if let Some(r) = flows.grid_residual.get(h) {
                flag(Check::Residual, &flows.building_id, Some(h), (r - (own + ce - ci)).abs() - FLOW_TOL);
            } else {
                flag(Check::Residual, &flows.building_id, Some(h), f64::INFINITY);
            }
        }
    }

    for h in 0..steps {
        let net: f64 = sol.buildings.iter().map(|f| f.comm_export[h] - f.comm_import[h]).sum();
        flag(Check::Cancellation, "community", Some(h), net.abs() - FLOW_TOL);
    }
    out
}
