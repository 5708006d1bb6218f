//! Domain types shared by the tariff, scheduling and scenario modules.
//!
//! Sign conventions used throughout the crate:
//! - net load is positive when demand exceeds on-site generation;
//! - EV and community powers are non-negative, direction is given by which
//!   variable carries the flow;
//! - the grid residual is signed: positive imports, negative exports.

use std::fmt;

use thiserror::Error;

/// Slack allowed when comparing derived hours to the grid.
const HOURS_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("{field} must not be negative (got {value})")]
    NegativePeriod { field: &'static str, value: f64 },
    #[error("invalid parameter {field}: {value}")]
    InvalidParameter { field: &'static str, value: f64 },
    #[error("parking window [{arrival}, {departure}) does not fit a grid of {steps} steps")]
    WindowOutOfRange { arrival: usize, departure: usize, steps: usize },
    #[error("t_park = {t_park} h disagrees with the window length {window} h")]
    ParkingMismatch { t_park: f64, window: f64 },
    #[error("request {ev_id} needs {needed:.4} h but is parked only {t_park} h")]
    InfeasibleRequest { ev_id: String, needed: f64, t_park: f64 },
    #[error("power {power} kW outside [0, {p_max}] kW")]
    DomainError { power: f64, p_max: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("net load of {building} has a non-finite value at step {step}")]
    NonFiniteLoad { building: String, step: usize },
}

/// Uniform discretization of a single-day horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    start_hour: f64,
    steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(start_hour: f64, steps: usize, dt: f64) -> Result<Self, ModelError> {
        if steps == 0 {
            return Err(ModelError::InvalidGrid("at least one step is required".into()));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(ModelError::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if steps as f64 * dt > 24.0 + HOURS_EPS {
            return Err(ModelError::InvalidGrid(format!("{steps} x {dt} h exceeds one day")));
        }
        if !start_hour.is_finite() {
            return Err(ModelError::InvalidGrid("start hour must be finite".into()));
        }
        Ok(Self { start_hour, steps, dt })
    }

    /// A full day starting at midnight.
    pub fn daily(dt: f64) -> Result<Self, ModelError> {
        let steps = (24.0 / dt).round();
        if (steps * dt - 24.0).abs() > HOURS_EPS {
            return Err(ModelError::InvalidGrid(format!("dt = {dt} h does not divide 24 h")));
        }
        Self::new(0.0, steps as usize, dt)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn start_hour(&self) -> f64 {
        self.start_hour
    }

    /// Wall-clock hour at the beginning of `step`.
    pub fn hour_of(&self, step: usize) -> f64 {
        self.start_hour + step as f64 * self.dt
    }

    /// Index of the step starting exactly at `hour`, if any.
    pub fn step_at(&self, hour: f64) -> Option<usize> {
        let k = (hour - self.start_hour) / self.dt;
        let r = k.round();
        ((k - r).abs() < 1e-9 && r >= 0.0 && r as usize <= self.steps).then_some(r as usize)
    }

    /// Nearest multiple of `dt`, halves rounded up.
    pub fn snap_hours(&self, hours: f64) -> f64 {
        (hours / self.dt + 0.5 + HOURS_EPS).floor() * self.dt
    }

    pub fn check_len(&self, what: &str, len: usize) -> Result<(), ModelError> {
        if len == self.steps {
            Ok(())
        } else {
            Err(ModelError::DimensionMismatch(format!("{what} has {len} entries, grid has {}", self.steps)))
        }
    }
}

/// One EV owner's submission for a single parking stay.
#[derive(Debug, Clone, PartialEq)]
pub struct EvRequest {
    pub ev_id: String,
    pub arrival_step: usize,
    /// Exclusive.
    pub departure_step: usize,
    /// Parking period in hours.
    pub t_park: f64,
    /// Requested charging period in hours at maximum charging power.
    pub t_charge_req: f64,
    /// Allowed discharging period in hours at maximum discharging power.
    pub t_discharge_allow: f64,
    pub p_charge_max: f64,
    pub p_discharge_max: f64,
    pub efficiency: f64,
}

impl EvRequest {
    /// Hours needed at full power to charge the request, discharge the full
    /// allowance and recharge what was discharged.
    pub fn hours_needed(&self) -> f64 {
        self.t_charge_req + self.t_discharge_allow * (1.0 + 1.0 / self.efficiency)
    }

    /// No charging requested: the stay earns parking only.
    pub fn is_parking_only(&self) -> bool {
        self.t_charge_req == 0.0
    }

    pub fn can_discharge(&self) -> bool {
        !self.is_parking_only() && self.t_discharge_allow > 0.0 && self.p_discharge_max > 0.0
    }

    pub fn window(&self) -> std::ops::Range<usize> {
        self.arrival_step..self.departure_step
    }

    pub fn is_parked(&self, step: usize) -> bool {
        self.window().contains(&step)
    }
}

/// Checks every request invariant and returns a copy whose requested
/// periods are snapped to the grid.
pub fn validate_request(req: &EvRequest, grid: &TimeGrid) -> Result<EvRequest, ModelError> {
    for (field, value) in [
        ("t_charge_req", req.t_charge_req),
        ("t_discharge_allow", req.t_discharge_allow),
    ] {
        if value.is_nan() {
            return Err(ModelError::InvalidParameter { field, value });
        }
        if value < 0.0 {
            return Err(ModelError::NegativePeriod { field, value });
        }
    }
    if !(req.t_park > 0.0) {
        return Err(ModelError::NegativePeriod { field: "t_park", value: req.t_park });
    }
    if !(req.efficiency > 0.0 && req.efficiency <= 1.0) {
        return Err(ModelError::InvalidParameter { field: "efficiency", value: req.efficiency });
    }
    if !(req.p_charge_max > 0.0 && req.p_charge_max.is_finite()) {
        return Err(ModelError::InvalidParameter { field: "p_charge_max", value: req.p_charge_max });
    }
    if !(req.p_discharge_max >= 0.0 && req.p_discharge_max.is_finite()) {
        return Err(ModelError::InvalidParameter { field: "p_discharge_max", value: req.p_discharge_max });
    }
    if req.arrival_step >= req.departure_step || req.departure_step > grid.steps() {
        return Err(ModelError::WindowOutOfRange {
            arrival: req.arrival_step,
            departure: req.departure_step,
            steps: grid.steps(),
        });
    }
    let window = (req.departure_step - req.arrival_step) as f64 * grid.dt();
    if (window - req.t_park).abs() > HOURS_EPS {
        return Err(ModelError::ParkingMismatch { t_park: req.t_park, window });
    }

    let snapped = EvRequest {
        t_charge_req: grid.snap_hours(req.t_charge_req),
        t_discharge_allow: grid.snap_hours(req.t_discharge_allow),
        ..req.clone()
    };
    let needed = snapped.hours_needed();
    if needed > snapped.t_park + HOURS_EPS {
        return Err(ModelError::InfeasibleRequest { ev_id: req.ev_id.clone(), needed, t_park: req.t_park });
    }
    Ok(snapped)
}

/// Max-power-equivalent hours used in one step at `power`.
///
/// Values within `1e-9 * max(1, p_max)` outside `[0, p_max]` are treated as
/// solver noise and clamped.
pub fn used_period(power: f64, p_max: f64, dt: f64) -> Result<f64, ModelError> {
    let slack = 1e-9 * p_max.max(1.0);
    if !(p_max > 0.0) || !(power >= -slack && power <= p_max + slack) {
        return Err(ModelError::DomainError { power, p_max });
    }
    Ok(power.clamp(0.0, p_max) * dt / p_max)
}

/// A building's net load (kW per step), EVs excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingSeries {
    pub building_id: String,
    pub net_load: Vec<f64>,
}

impl BuildingSeries {
    pub fn new(building_id: impl Into<String>, net_load: Vec<f64>, grid: &TimeGrid) -> Result<Self, ModelError> {
        let building_id = building_id.into();
        grid.check_len(&format!("net load of {building_id}"), net_load.len())?;
        if let Some(step) = net_load.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteLoad { building: building_id, step });
        }
        Ok(Self { building_id, net_load })
    }

    pub fn max_abs(&self) -> f64 {
        self.net_load.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// EV revenue components from the building's point of view (positive means
/// the building receives money).
#[derive(Debug, Clone, PartialEq)]
pub struct EvCost {
    pub ev_id: String,
    pub parking: f64,
    pub flexibility: f64,
    pub charging: f64,
    pub discharging: f64,
}

impl EvCost {
    pub fn total(&self) -> f64 {
        self.parking + self.flexibility + self.charging + self.discharging
    }
}

/// Per-building cost summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBreakdown {
    pub electricity_cost: f64,
    pub ev_revenue: f64,
    pub objective: f64,
    pub per_ev: Vec<EvCost>,
}

impl CostBreakdown {
    pub fn new(electricity_cost: f64, per_ev: Vec<EvCost>) -> Self {
        let ev_revenue = per_ev.iter().map(EvCost::total).sum();
        Self { electricity_cost, ev_revenue, objective: electricity_cost - ev_revenue, per_ev }
    }

    pub fn electricity_only(electricity_cost: f64) -> Self {
        Self::new(electricity_cost, Vec::new())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleStatus {
    Optimal,
    FeasibleWithGap,
    Infeasible,
}

impl fmt::Display for ScheduleStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleStatus::Optimal => "optimal",
            ScheduleStatus::FeasibleWithGap => "feasible-with-gap",
            ScheduleStatus::Infeasible => "infeasible",
        })
    }
}

/// Power profile of one EV over the whole grid (zero outside its window).
#[derive(Debug, Clone, PartialEq)]
pub struct EvSchedule {
    pub ev_id: String,
    pub building_id: String,
    pub request: EvRequest,
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
}

impl EvSchedule {
    /// Total charging period t_T+ in hours.
    pub fn charged_hours(&self, dt: f64) -> f64 {
        self.charge.iter().map(|p| p * dt / self.request.p_charge_max).sum()
    }

    /// Total discharging period t_T- in hours.
    pub fn discharged_hours(&self, dt: f64) -> f64 {
        if self.request.p_discharge_max == 0.0 {
            return 0.0;
        }
        self.discharge.iter().map(|p| p * dt / self.request.p_discharge_max).sum()
    }
}

/// Community and grid flows of one building.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingFlows {
    pub building_id: String,
    pub comm_export: Vec<f64>,
    pub comm_import: Vec<f64>,
    pub grid_residual: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSolution {
    pub grid: TimeGrid,
    pub evs: Vec<EvSchedule>,
    pub buildings: Vec<BuildingFlows>,
    pub costs: Vec<CostBreakdown>,
    pub status: ScheduleStatus,
}

impl ScheduleSolution {
    pub fn building(&self, building_id: &str) -> Option<&BuildingFlows> {
        self.buildings.iter().find(|b| b.building_id == building_id)
    }

    pub fn evs_of<'a>(&'a self, building_id: &'a str) -> impl Iterator<Item = &'a EvSchedule> + 'a {
        self.evs.iter().filter(move |e| e.building_id == building_id)
    }

    /// Net EV power (charge minus discharge) drawn inside a building.
    pub fn ev_power(&self, building_id: &str) -> Vec<f64> {
        let mut p = vec![0.0; self.grid.steps()];
        for ev in self.evs_of(building_id) {
            for (h, slot) in p.iter_mut().enumerate() {
                *slot += ev.charge[h] - ev.discharge[h];
            }
        }
        p
    }

    pub fn total_objective(&self) -> f64 {
        self.costs.iter().map(|c| c.objective).sum()
    }

    /// Concatenates independently solved parts (same grid) into one solution.
    pub fn merge(parts: Vec<ScheduleSolution>) -> Option<ScheduleSolution> {
        let mut iter = parts.into_iter();
        let mut acc = iter.next()?;
        for part in iter {
            acc.evs.extend(part.evs);
            acc.buildings.extend(part.buildings);
            acc.costs.extend(part.costs);
            if part.status != ScheduleStatus::Optimal {
                acc.status = part.status;
            }
        }
        Some(acc)
    }
}

/// Signed grid residual of a building: net load plus EV charging, minus EV
/// discharging, plus community export, minus community import.
pub fn residual_series(b: &BuildingSeries, sol: &ScheduleSolution) -> Result<Vec<f64>, ModelError> {
    let steps = sol.grid.steps();
    sol.grid.check_len(&format!("net load of {}", b.building_id), b.net_load.len())?;
    let flows = sol
        .building(&b.building_id)
        .ok_or_else(|| ModelError::DimensionMismatch(format!("solution has no building {}", b.building_id)))?;
    for (what, len) in [("comm_export", flows.comm_export.len()), ("comm_import", flows.comm_import.len())] {
        sol.grid.check_len(what, len)?;
    }
    for ev in sol.evs_of(&b.building_id) {
        sol.grid.check_len(&format!("charge of {}", ev.ev_id), ev.charge.len())?;
        sol.grid.check_len(&format!("discharge of {}", ev.ev_id), ev.discharge.len())?;
    }
    let ev = sol.ev_power(&b.building_id);
    Ok((0..steps)
        .map(|h| b.net_load[h] + ev[h] + flows.comm_export[h] - flows.comm_import[h])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::daily(0.25).unwrap()
    }

    fn request(t_park: f64, t_charge: f64, t_dis: f64) -> EvRequest {
        let g = grid();
        let arrival = g.step_at(8.0).unwrap();
        EvRequest {
            ev_id: "ev".into(),
            arrival_step: arrival,
            departure_step: arrival + (t_park / g.dt()).round() as usize,
            t_park,
            t_charge_req: t_charge,
            t_discharge_allow: t_dis,
            p_charge_max: 10.0,
            p_discharge_max: 10.0,
            efficiency: 0.93,
        }
    }

    #[test]
    fn grid_invariants() {
        assert!(TimeGrid::new(0.0, 0, 1.0).is_err());
        assert!(TimeGrid::new(0.0, 25, 1.0).is_err());
        assert!(TimeGrid::new(0.0, 4, 0.0).is_err());
        assert!(TimeGrid::daily(0.7).is_err());
        let g = grid();
        assert_eq!(g.steps(), 96);
        assert_eq!(g.step_at(8.0), Some(32));
        assert_eq!(g.step_at(8.1), None);
        assert_eq!(g.hour_of(33), 8.25);
    }

    #[test]
    fn snapping_rounds_half_up() {
        let g = grid();
        assert_eq!(g.snap_hours(0.75), 0.75);
        assert_eq!(g.snap_hours(0.375), 0.5);
        assert_eq!(g.snap_hours(0.37), 0.25);
        assert_eq!(g.snap_hours(2.1), 2.0);
        assert_eq!(g.snap_hours(0.1), 0.0);
    }

    #[test]
    fn typical_request_is_valid() {
        let r = validate_request(&request(8.0, 2.0, 0.75), &grid()).unwrap();
        assert_eq!(r.t_charge_req, 2.0);
        assert_eq!(r.t_discharge_allow, 0.75);
    }

    #[test]
    fn negative_discharge_allowance_rejected() {
        let err = validate_request(&request(8.0, 2.0, -0.1), &grid()).unwrap_err();
        assert!(matches!(err, ModelError::NegativePeriod { field: "t_discharge_allow", .. }));
    }

    #[test]
    fn oversubscribed_request_is_infeasible() {
        // 1.5 + 0.5 * (1 + 1/0.93) = 2.5376 > 2
        let err = validate_request(&request(2.0, 1.5, 0.5), &grid()).unwrap_err();
        match err {
            ModelError::InfeasibleRequest { needed, .. } => assert!((needed - 2.537634).abs() < 1e-6),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn window_errors() {
        let mut r = request(8.0, 2.0, 0.0);
        r.departure_step = 97;
        assert!(matches!(validate_request(&r, &grid()), Err(ModelError::WindowOutOfRange { .. })));
        let mut r = request(8.0, 2.0, 0.0);
        r.t_park = 7.0;
        assert!(matches!(validate_request(&r, &grid()), Err(ModelError::ParkingMismatch { .. })));
    }

    #[test]
    fn parking_only_request_is_accepted() {
        let r = validate_request(&request(4.0, 0.0, 0.0), &grid()).unwrap();
        assert!(r.is_parking_only());
        assert!(!r.can_discharge());
    }

    #[test]
    fn used_period_examples() {
        assert_eq!(used_period(10.0, 10.0, 0.25).unwrap(), 0.25);
        assert_eq!(used_period(0.0, 10.0, 0.25).unwrap(), 0.0);
        assert_eq!(used_period(5.0, 10.0, 0.25).unwrap(), 0.125);
        assert!(used_period(10.5, 10.0, 0.25).is_err());
        assert!(used_period(-1.0, 10.0, 0.25).is_err());
        assert_eq!(used_period(-1e-12, 10.0, 0.25).unwrap(), 0.0);
    }

    fn one_step_solution(charge: f64, discharge: f64, export: f64, import: f64) -> (BuildingSeries, ScheduleSolution) {
        let g = TimeGrid::new(0.0, 1, 1.0).unwrap();
        let b = BuildingSeries::new("b1", vec![0.0], &g).unwrap();
        let req = EvRequest {
            ev_id: "e".into(),
            arrival_step: 0,
            departure_step: 1,
            t_park: 1.0,
            t_charge_req: 1.0,
            t_discharge_allow: 0.0,
            p_charge_max: 10.0,
            p_discharge_max: 10.0,
            efficiency: 1.0,
        };
        let sol = ScheduleSolution {
            grid: g,
            evs: vec![EvSchedule {
                ev_id: "e".into(),
                building_id: "b1".into(),
                request: req,
                charge: vec![charge],
                discharge: vec![discharge],
            }],
            buildings: vec![BuildingFlows {
                building_id: "b1".into(),
                comm_export: vec![export],
                comm_import: vec![import],
                grid_residual: vec![0.0],
            }],
            costs: vec![],
            status: ScheduleStatus::Optimal,
        };
        (b, sol)
    }

    #[test]
    fn residual_examples() {
        let (mut b, sol) = one_step_solution(0.0, 0.0, 0.0, 0.0);
        b.net_load = vec![10.0];
        assert_eq!(residual_series(&b, &sol).unwrap(), vec![10.0]);

        // surplus of 20 kW, 10 kW absorbed by an EV, 10 kW sold to the community
        let (mut b, sol) = one_step_solution(10.0, 0.0, 10.0, 0.0);
        b.net_load = vec![-20.0];
        assert_eq!(residual_series(&b, &sol).unwrap(), vec![0.0]);

        let (b, sol) = one_step_solution(0.0, 5.0, 0.0, 0.0);
        assert_eq!(residual_series(&b, &sol).unwrap(), vec![-5.0]);
    }

    #[test]
    fn residual_dimension_mismatch() {
        let (b, mut sol) = one_step_solution(0.0, 0.0, 0.0, 0.0);
        sol.buildings[0].comm_import = vec![0.0, 0.0];
        assert!(matches!(residual_series(&b, &sol), Err(ModelError::DimensionMismatch(_))));
    }

    #[test]
    fn cost_breakdown_objective() {
        let c = CostBreakdown::new(
            10.0,
            vec![EvCost { ev_id: "e".into(), parking: 4.0, flexibility: -3.0, charging: 4.0, discharging: 0.0 }],
        );
        assert_eq!(c.ev_revenue, 5.0);
        assert_eq!(c.objective, 5.0);
    }
}
