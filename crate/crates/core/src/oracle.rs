//! Brute-force reference optimum for tiny scenarios.
//!
//! Every EV decides per parked step between idle, full-power charging,
//! full-power discharging, or both at once (the model does not forbid it).
//! Schedules violating the period constraints are dropped, community trade
//! is matched greedily per step, and the cheapest combination wins.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cost::{electricity_cost, ev_cost};
use crate::model::{BuildingSeries, EvRequest, ModelError, TimeGrid};
use crate::schedule::{build_schedule_model, BuiltModel, ScheduleError};
use crate::tariff::{CommunityTariffs, TariffBook};

pub const MAX_BUILDINGS: usize = 2;
pub const MAX_STEPS: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("micro scenario too large: {0}")]
    TooLarge(String),
    #[error("EV {ev_id} is not aligned for enumeration: {reason}")]
    Misaligned { ev_id: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// At most two buildings with at most one EV each.
#[derive(Debug, Clone)]
pub struct MicroScenario {
    pub name: String,
    pub grid: TimeGrid,
    pub tariffs: TariffBook,
    pub community: Option<CommunityTariffs>,
    pub buildings: Vec<BuildingSeries>,
    pub evs: Vec<Option<EvRequest>>,
}

impl MicroScenario {
    pub fn build_model(&self) -> Result<BuiltModel, ScheduleError> {
        let evs: Vec<Vec<EvRequest>> = self.evs.iter().map(|e| e.iter().cloned().collect()).collect();
        build_schedule_model(self.grid, self.tariffs.clone(), self.community, &self.buildings, &evs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub objective: f64,
    /// Number of distinct net-power combinations attaining the optimum.
    pub optima: usize,
    /// Net EV power per building at one optimum.
    pub ev_power: Vec<Vec<f64>>,
}

/// One building's feasible EV behaviours, keyed by net power in units of
/// `p_max`, each with the best EV revenue reaching it.
fn building_options(
    req: Option<&EvRequest>,
    grid: &TimeGrid,
    tariffs: &TariffBook,
) -> Result<BTreeMap<Vec<i8>, f64>, OracleError> {
    let steps = grid.steps();
    let mut out = BTreeMap::new();
    let Some(req) = req else {
        out.insert(vec![0; steps], 0.0);
        return Ok(out);
    };
    let dt = grid.dt();
    let misaligned = |reason: &str| OracleError::Misaligned { ev_id: req.ev_id.clone(), reason: reason.into() };
    let as_steps = |hours: f64| {
        let k = (hours / dt).round();
        ((hours / dt - k).abs() < 1e-9).then_some(k as i64)
    };
    let need = as_steps(req.t_charge_req).ok_or_else(|| misaligned("charging request is not a whole number of steps"))?;
    let allow = as_steps(req.t_discharge_allow).ok_or_else(|| misaligned("discharge allowance is not a whole number of steps"))?;
    let discharge = req.can_discharge();
    if discharge && req.efficiency != 1.0 {
        return Err(misaligned("full-power recharge needs efficiency 1"));
    }
    if discharge && req.p_charge_max != req.p_discharge_max {
        return Err(misaligned("charge and discharge limits differ"));
    }

    let window: Vec<usize> = req.window().collect();
    let choices: u32 = if req.is_parking_only() {
        1
    } else if discharge {
        4
    } else {
        2
    };
    let combos = (choices as u64).pow(window.len() as u32);
    for code in 0..combos {
        let mut rest = code;
        let mut charge = vec![0.0; steps];
        let mut disch = vec![0.0; steps];
        let mut net = vec![0i8; steps];
        let (mut n_c, mut n_d, mut lead) = (0i64, 0i64, 0i64);
        let mut ok = true;
        for &h in &window {
            let pick = rest % choices as u64;
            rest /= choices as u64;
            let (c, d) = (pick & 1 == 1, pick & 2 == 2);
            if c {
                charge[h] = req.p_charge_max;
                n_c += 1;
                lead -= 1;
                net[h] += 1;
            }
            if d {
                disch[h] = req.p_discharge_max;
                n_d += 1;
                lead += 1;
                net[h] -= 1;
            }
            if lead > 0 {
                ok = false;
                break;
            }
        }
        if !ok || n_c - n_d != need || n_d > allow {
            continue;
        }
        let revenue = ev_cost(&req.ev_id, req, &charge, &disch, tariffs, grid)?.total();
        let best = out.entry(net).or_insert(f64::NEG_INFINITY);
        if revenue > *best {
            *best = revenue;
        }
    }
    Ok(out)
}

/// Electricity cost of a set of buildings given their own residuals, with
/// community trade matched greedily per step.
fn community_cost(residuals: &[Vec<f64>], tariffs: &TariffBook, community: Option<&CommunityTariffs>, grid: &TimeGrid) -> f64 {
    let steps = grid.steps();
    let mut exports: Vec<Vec<f64>> = vec![vec![0.0; steps]; residuals.len()];
    let mut imports = exports.clone();
    if let Some(c) = community {
        for h in 0..steps {
            let gain = (tariffs.grid_import[h] - c.import_price) + (c.export_comp - tariffs.grid_export_comp);
            if gain <= 0.0 {
                continue;
            }
            let surplus: f64 = residuals.iter().map(|r| (-r[h]).max(0.0)).sum();
            let deficit: f64 = residuals.iter().map(|r| r[h].max(0.0)).sum();
            let matched = surplus.min(deficit);
            if matched <= 0.0 {
                continue;
            }
            // with building-uniform prices any split of the matched amount
            // costs the same; split pro rata
            for (b, r) in residuals.iter().enumerate() {
                if r[h] < 0.0 {
                    exports[b][h] = matched * (-r[h]) / surplus;
                } else if r[h] > 0.0 {
                    imports[b][h] = matched * r[h] / deficit;
                }
            }
        }
    }
    residuals
        .iter()
        .enumerate()
        .map(|(b, r)| {
            let after: Vec<f64> = (0..steps).map(|h| r[h] + exports[b][h] - imports[b][h]).collect();
            electricity_cost(&after, &exports[b], &imports[b], tariffs, community, grid.dt())
        })
        .sum()
}

/// Exhaustive minimum of the scheduling objective over full-power
/// schedules.
pub fn oracle_enumerate(s: &MicroScenario) -> Result<OracleResult, OracleError> {
    if s.buildings.len() > MAX_BUILDINGS || s.buildings.is_empty() {
        return Err(OracleError::TooLarge(format!("{} buildings (1 to {MAX_BUILDINGS} allowed)", s.buildings.len())));
    }
    if s.grid.steps() > MAX_STEPS {
        return Err(OracleError::TooLarge(format!("{} steps (at most {MAX_STEPS})", s.grid.steps())));
    }
    if s.evs.len() != s.buildings.len() {
        return Err(OracleError::TooLarge("one EV slot per building expected".into()));
    }
    let options: Vec<BTreeMap<Vec<i8>, f64>> =
        s.evs.iter().map(|e| building_options(e.as_ref(), &s.grid, &s.tariffs)).collect::<Result<_, _>>()?;
    let p: Vec<f64> = s.evs.iter().map(|e| e.as_ref().map_or(0.0, |e| e.p_charge_max)).collect();

    let mut best = OracleResult { objective: f64::INFINITY, optima: 0, ev_power: Vec::new() };
    let mut current: Vec<(&Vec<i8>, f64)> = Vec::with_capacity(options.len());
    visit(&options, &mut current, &mut |picked| {
        let powers: Vec<Vec<f64>> = picked.iter().enumerate().map(|(b, (net, _))| net.iter().map(|&k| k as f64 * p[b]).collect()).collect();
        let residuals: Vec<Vec<f64>> = s
            .buildings
            .iter()
            .zip(&powers)
            .map(|(b, ev)| b.net_load.iter().zip(ev).map(|(l, e)| l + e).collect())
            .collect();
        let revenue: f64 = picked.iter().map(|(_, r)| r).sum();
        let objective = community_cost(&residuals, &s.tariffs, s.community.as_ref(), &s.grid) - revenue;
        let tol = 1e-9 * objective.abs().max(1.0);
        if objective < best.objective - tol {
            best = OracleResult { objective, optima: 1, ev_power: powers };
        } else if (objective - best.objective).abs() <= tol {
            best.optima += 1;
        }
    });
    Ok(best)
}

fn visit<'a>(
    options: &'a [BTreeMap<Vec<i8>, f64>],
    current: &mut Vec<(&'a Vec<i8>, f64)>,
    f: &mut dyn FnMut(&[(&'a Vec<i8>, f64)]),
) {
    if current.len() == options.len() {
        f(current);
        return;
    }
    for (net, &rev) in &options[current.len()] {
        current.push((net, rev));
        visit(options, current, f);
        current.pop();
    }
}

fn micro_book(import: Vec<f64>, charging: Vec<f64>) -> TariffBook {
    TariffBook {
        grid_import: import,
        grid_export_comp: 0.0358,
        grid_use_fee: 0.05,
        parking: 0.5,
        flexibility_reward: 0.5,
        charging,
        discharging_reward: 3.0,
    }
}

fn micro_ev(id: &str, arrival: usize, departure: usize, dt: f64, charge_steps: usize, discharge_steps: usize) -> EvRequest {
    EvRequest {
        ev_id: id.into(),
        arrival_step: arrival,
        departure_step: departure,
        t_park: (departure - arrival) as f64 * dt,
        t_charge_req: charge_steps as f64 * dt,
        t_discharge_allow: discharge_steps as f64 * dt,
        p_charge_max: 10.0,
        p_discharge_max: 10.0,
        efficiency: 1.0,
    }
}

const COMMUNITY: CommunityTariffs = CommunityTariffs { export_comp: 0.0358, import_price: 0.0858 };

/// Fixed set of aligned micro scenarios: hand-written cases first, then
/// seeded random ones. Loads are multiples of the 10 kW charger power so
/// that full-power schedules are optimal among all continuous ones.
pub fn micro_battery() -> Vec<MicroScenario> {
    let mut out = Vec::new();
    let grid4 = TimeGrid::new(8.0, 4, 1.0).expect("valid grid");
    let flat = || micro_book(vec![0.12; 4], vec![2.0; 4]);
    let series = |id: &str, load: Vec<f64>, grid: &TimeGrid| BuildingSeries::new(id, load, grid).expect("valid load");

    out.push(MicroScenario {
        name: "no-ev".into(),
        grid: grid4,
        tariffs: flat(),
        community: Some(COMMUNITY),
        buildings: vec![series("a", vec![10.0, -20.0, 0.0, 30.0], &grid4), series("b", vec![20.0, 10.0, -10.0, 0.0], &grid4)],
        evs: vec![None, None],
    });
    out.push(MicroScenario {
        name: "flat-placement".into(),
        grid: grid4,
        tariffs: flat(),
        community: None,
        buildings: vec![series("a", vec![20.0; 4], &grid4)],
        evs: vec![Some(micro_ev("a1", 0, 4, 1.0, 2, 0))],
    });
    out.push(MicroScenario {
        name: "surplus-first-step".into(),
        grid: grid4,
        tariffs: flat(),
        community: None,
        buildings: vec![series("a", vec![-10.0, 10.0, 10.0, 10.0], &grid4)],
        evs: vec![Some(micro_ev("a1", 0, 4, 1.0, 1, 0))],
    });
    out.push(MicroScenario {
        name: "opposite-flows".into(),
        grid: grid4,
        tariffs: micro_book(vec![0.15, 0.2, 0.15, 0.1], vec![2.0; 4]),
        community: Some(COMMUNITY),
        buildings: vec![series("a", vec![-30.0, -20.0, -20.0, -10.0], &grid4), series("b", vec![20.0, 30.0, 10.0, 20.0], &grid4)],
        evs: vec![None, Some(micro_ev("b1", 1, 4, 1.0, 1, 1))],
    });
    out.push(MicroScenario {
        name: "v2b-peak".into(),
        grid: grid4,
        tariffs: micro_book(vec![0.1, 0.1, 0.3, 0.3], vec![1.5, 1.5, 2.5, 2.5]),
        community: None,
        buildings: vec![series("a", vec![0.0, 0.0, 20.0, 20.0], &grid4)],
        evs: vec![Some(micro_ev("a1", 0, 4, 1.0, 1, 1))],
    });
    out.push(MicroScenario {
        name: "parking-only".into(),
        grid: grid4,
        tariffs: flat(),
        community: Some(COMMUNITY),
        buildings: vec![series("a", vec![10.0; 4], &grid4), series("b", vec![-10.0; 4], &grid4)],
        evs: vec![Some(micro_ev("a1", 1, 3, 1.0, 0, 0)), None],
    });

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut k = 0;
    while out.len() < 24 {
        k += 1;
        let (steps, dt) = if k % 3 == 0 { (8, 0.5) } else { (4 + k % 4, 1.0) };
        let grid = TimeGrid::new(8.0, steps, dt).expect("valid grid");
        let n_b = 1 + (k % 2);
        let import: Vec<f64> = (0..steps).map(|_| rng.random_range(0.06..0.25)).collect();
        let mean = import.iter().sum::<f64>() / steps as f64;
        let charging: Vec<f64> = import.iter().map(|c| 2.0 * c / mean).collect();
        let buildings: Vec<BuildingSeries> = (0..n_b)
            .map(|b| {
                let load = (0..steps).map(|_| 10.0 * rng.random_range(-3i32..=3) as f64).collect();
                series(&format!("m{k}b{b}"), load, &grid)
            })
            .collect();
        let evs: Vec<Option<EvRequest>> = (0..n_b)
            .map(|b| {
                if rng.random_bool(0.2) {
                    return None;
                }
                let len = rng.random_range(2..=steps.min(6));
                let arrival = rng.random_range(0..=steps - len);
                let charge = rng.random_range(1..=len.div_ceil(2));
                let discharge = if rng.random_bool(0.7) { rng.random_range(0..=(len - charge) / 2) } else { 0 };
                Some(micro_ev(&format!("m{k}e{b}"), arrival, arrival + len, dt, charge, discharge))
            })
            .collect();
        out.push(MicroScenario {
            name: format!("random-{k}"),
            grid,
            tariffs: micro_book(import, charging),
            community: (n_b == 2).then_some(COMMUNITY),
            buildings,
            evs,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn by_name(name: &str) -> MicroScenario {
        micro_battery().into_iter().find(|s| s.name == name).unwrap()
    }

    #[test]
    fn no_ev_equals_closed_form() {
        let s = by_name("no-ev");
        let r = oracle_enumerate(&s).unwrap();
        // step 1: a exports 20, b imports 10 -> 10 matched; step 2: b exports 10, nobody imports
        let grid_only: f64 = (0..4)
            .map(|h| {
                let own: f64 = s.buildings.iter().map(|b| b.net_load[h]).map(|l| l.max(0.0) * 0.12 - (-l).max(0.0) * 0.0358).sum();
                own
            })
            .sum();
        let trade_gain = 10.0 * (0.12 - 0.0858);
        assert!((r.objective - (grid_only - trade_gain)).abs() < 1e-12);
        assert_eq!(r.optima, 1);
    }

    #[test]
    fn flat_tariffs_leave_placement_free() {
        let r = oracle_enumerate(&by_name("flat-placement")).unwrap();
        assert!(r.optima >= 2);
    }

    #[test]
    fn charging_soaks_up_early_surplus() {
        let r = oracle_enumerate(&by_name("surplus-first-step")).unwrap();
        assert_eq!(r.ev_power[0], vec![10.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn size_and_alignment_limits() {
        let mut s = by_name("flat-placement");
        s.grid = TimeGrid::new(0.0, 9, 1.0).unwrap();
        assert!(matches!(oracle_enumerate(&s), Err(OracleError::TooLarge(_))));

        let mut s = by_name("v2b-peak");
        s.evs[0].as_mut().unwrap().efficiency = 0.93;
        assert!(matches!(oracle_enumerate(&s), Err(OracleError::Misaligned { .. })));

        let mut s = by_name("flat-placement");
        s.evs[0].as_mut().unwrap().t_charge_req = 1.5;
        assert!(matches!(oracle_enumerate(&s), Err(OracleError::Misaligned { .. })));
    }

    #[test]
    fn battery_is_large_and_within_limits() {
        let battery = micro_battery();
        assert!(battery.len() >= 20);
        for s in &battery {
            assert!(s.buildings.len() <= MAX_BUILDINGS && s.grid.steps() <= MAX_STEPS, "{}", s.name);
            assert!(oracle_enumerate(s).unwrap().objective.is_finite(), "{}", s.name);
        }
    }
}
