//! Cost assembly from power profiles. This is the only place where tariff
//! magnitudes get their cash-flow sign.

use crate::model::{used_period, EvCost, ModelError, TimeGrid};
use crate::tariff::{CommunityTariffs, TariffBook};

/// Revenue the building collects from one EV stay, split by component.
pub fn ev_cost(
    ev_id: &str,
    req: &crate::model::EvRequest,
    charge: &[f64],
    discharge: &[f64],
    tariffs: &TariffBook,
    grid: &TimeGrid,
) -> Result<EvCost, ModelError> {
    grid.check_len("charge", charge.len())?;
    grid.check_len("discharge", discharge.len())?;
    let dt = grid.dt();
    let mut charged = 0.0;
    let mut charging = 0.0;
    let mut discharged = 0.0;
    for h in 0..grid.steps() {
        let up = used_period(charge[h], req.p_charge_max, dt)?;
        charged += up;
        charging += up * tariffs.charging[h];
        if req.p_discharge_max > 0.0 {
            discharged += used_period(discharge[h], req.p_discharge_max, dt)?;
        } else if discharge[h].abs() > 1e-9 {
            return Err(ModelError::DomainError { power: discharge[h], p_max: 0.0 });
        }
    }
    Ok(EvCost {
        ev_id: ev_id.to_string(),
        parking: req.t_park * tariffs.parking,
        flexibility: -(req.t_park - charged - discharged) * tariffs.flexibility_reward,
        charging,
        discharging: -discharged * tariffs.discharging_reward,
    })
}

/// Net electricity cost of a building over the day: grid import paid at the
/// step's import tariff, grid export compensated, community flows at the
/// community prices.
pub fn electricity_cost(
    residual: &[f64],
    comm_export: &[f64],
    comm_import: &[f64],
    tariffs: &TariffBook,
    community: Option<&CommunityTariffs>,
    dt: f64,
) -> f64 {
    let mut total = 0.0;
    for (h, &r) in residual.iter().enumerate() {
        let mut step = r.max(0.0) * tariffs.grid_import[h] - (-r).max(0.0) * tariffs.grid_export_comp;
        if let Some(c) = community {
            step += comm_import[h] * c.import_price - comm_export[h] * c.export_comp;
        }
        total += dt * step;
    }
    total
}
