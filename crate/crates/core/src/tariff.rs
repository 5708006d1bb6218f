//! Tariff construction from wholesale prices and community market prices.
//!
//! Every tariff is held as a non-negative magnitude; whether it is paid or
//! received is fixed by where it is used in cost assembly.

use std::io::{Read, Write};

use thiserror::Error;

use crate::model::TimeGrid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TariffError {
    #[error("wholesale series has non-positive mean {0}")]
    ZeroMeanWholesale(f64),
    #[error("input series has non-positive mean {0}")]
    ZeroMeanInput(f64),
    #[error("{field} must be positive, got {value}")]
    NonPositiveInput { field: &'static str, value: f64 },
    #[error("invalid tariff book: {0}")]
    Invalid(String),
    /// Community import is dearer than the grid at every step. The derived
    /// prices are still returned.
    #[error("community import price {} exceeds the highest grid import price {max_grid_import}", .tariffs.import_price)]
    MarketDominatedByGrid { tariffs: CommunityTariffs, max_grid_import: f64 },
    #[error("wholesale csv: {0}")]
    Csv(String),
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Import tariff (€/kWh) following the wholesale shape, rescaled to
/// `target_avg` €/MWh on average.
pub fn build_grid_import(wholesale_eur_mwh: &[f64], target_avg_eur_mwh: f64) -> Result<Vec<f64>, TariffError> {
    let m = mean(wholesale_eur_mwh);
    if !(m > 0.0) {
        return Err(TariffError::ZeroMeanWholesale(m));
    }
    if !(target_avg_eur_mwh > 0.0) {
        return Err(TariffError::NonPositiveInput { field: "target_avg", value: target_avg_eur_mwh });
    }
    let scale = target_avg_eur_mwh / m / 1000.0;
    Ok(wholesale_eur_mwh.iter().map(|w| w * scale).collect())
}

/// Flat export compensation magnitude (€/kWh): 90 % of the monthly average
/// wholesale price.
pub fn build_grid_export(wholesale_monthly_avg_eur_mwh: f64) -> Result<f64, TariffError> {
    if !(wholesale_monthly_avg_eur_mwh > 0.0) {
        return Err(TariffError::NonPositiveInput {
            field: "wholesale_monthly_avg",
            value: wholesale_monthly_avg_eur_mwh,
        });
    }
    Ok(0.9 * wholesale_monthly_avg_eur_mwh / 1000.0)
}

/// Charging tariff (€/h) proportional to the import tariff with a daily mean
/// of `target_avg_eur_h`.
pub fn build_charging_tariff(grid_import: &[f64], target_avg_eur_h: f64) -> Result<Vec<f64>, TariffError> {
    let m = mean(grid_import);
    if !(m > 0.0) {
        return Err(TariffError::ZeroMeanInput(m));
    }
    if !(target_avg_eur_h >= 0.0) {
        return Err(TariffError::NonPositiveInput { field: "charging target", value: target_avg_eur_h });
    }
    Ok(grid_import.iter().map(|c| c * target_avg_eur_h / m).collect())
}

/// Two-peak daily wholesale shape (morning and evening peaks, midday trough)
/// with mean 1, sampled at step starts.
pub fn default_wholesale_profile(grid: &TimeGrid) -> Vec<f64> {
    let bump = |t: f64, centre: f64, width: f64| (-((t - centre) / width).powi(2)).exp();
    let raw: Vec<f64> = (0..grid.steps())
        .map(|h| {
            let t = grid.hour_of(h).rem_euclid(24.0);
            1.0 + 0.35 * bump(t, 8.5, 1.5) + 0.45 * bump(t, 20.0, 2.0) - 0.2 * bump(t, 14.0, 2.5)
                - 0.15 * bump(t, 3.5, 2.5)
        })
        .collect();
    let m = mean(&raw);
    raw.into_iter().map(|v| v / m).collect()
}

/// Flat tariff inputs in the units they are usually quoted in.
#[derive(Debug, Clone, PartialEq)]
pub struct TariffParams {
    pub import_avg_eur_mwh: f64,
    pub export_monthly_avg_eur_mwh: f64,
    pub grid_use_eur_mwh: f64,
    pub parking_eur_h: f64,
    pub flexibility_eur_h: f64,
    pub discharging_eur_h: f64,
    pub charging_avg_eur_h: f64,
}

impl Default for TariffParams {
    fn default() -> Self {
        Self {
            import_avg_eur_mwh: 122.8,
            // the monthly average whose 90 % is the 35.8 €/MWh export tariff
            export_monthly_avg_eur_mwh: 35.8 / 0.9,
            grid_use_eur_mwh: 50.0,
            parking_eur_h: 0.5,
            flexibility_eur_h: 0.5,
            discharging_eur_h: 3.0,
            charging_avg_eur_h: 2.0,
        }
    }
}

/// All fixed tariffs for one day.
#[derive(Debug, Clone, PartialEq)]
pub struct TariffBook {
    /// €/kWh per step.
    pub grid_import: Vec<f64>,
    /// €/kWh paid to the building for grid export.
    pub grid_export_comp: f64,
    /// €/kWh fee for using the grid between buildings.
    pub grid_use_fee: f64,
    /// €/h paid by the EV owner for parking.
    pub parking: f64,
    /// €/h paid to the EV owner for parked hours left idle.
    pub flexibility_reward: f64,
    /// €/h per step paid by the EV owner for charging.
    pub charging: Vec<f64>,
    /// €/h paid to the EV owner for discharging.
    pub discharging_reward: f64,
}

impl TariffBook {
    pub fn from_params(params: &TariffParams, wholesale_eur_mwh: &[f64], grid: &TimeGrid) -> Result<Self, TariffError> {
        grid.check_len("wholesale series", wholesale_eur_mwh.len())
            .map_err(|e| TariffError::Invalid(e.to_string()))?;
        let grid_import = build_grid_import(wholesale_eur_mwh, params.import_avg_eur_mwh)?;
        let charging = build_charging_tariff(&grid_import, params.charging_avg_eur_h)?;
        let book = Self {
            grid_export_comp: build_grid_export(params.export_monthly_avg_eur_mwh)?,
            grid_use_fee: params.grid_use_eur_mwh / 1000.0,
            parking: params.parking_eur_h,
            flexibility_reward: params.flexibility_eur_h,
            discharging_reward: params.discharging_eur_h,
            grid_import,
            charging,
        };
        book.validate(grid)?;
        Ok(book)
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<(), TariffError> {
        for (what, len) in [("grid_import", self.grid_import.len()), ("charging", self.charging.len())] {
            grid.check_len(what, len).map_err(|e| TariffError::Invalid(e.to_string()))?;
        }
        if let Some(h) = self.grid_import.iter().position(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(TariffError::Invalid(format!("grid import must be positive at step {h}")));
        }
        if self.charging.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(TariffError::Invalid("charging tariff must be non-negative".into()));
        }
        for (what, v) in [
            ("grid_export_comp", self.grid_export_comp),
            ("grid_use_fee", self.grid_use_fee),
            ("parking", self.parking),
            ("flexibility_reward", self.flexibility_reward),
            ("discharging_reward", self.discharging_reward),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(TariffError::Invalid(format!("{what} must be a non-negative magnitude, got {v}")));
            }
        }
        Ok(())
    }

    pub fn max_grid_import(&self) -> f64 {
        self.grid_import.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Prices of the community market, fixed before scheduling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommunityTariffs {
    /// €/kWh paid to a building exporting to the community.
    pub export_comp: f64,
    /// €/kWh paid by a building importing from the community.
    pub import_price: f64,
}

impl CommunityTariffs {
    /// Steps where buying from the community is no dearer than the grid.
    pub fn attractive_steps(&self, book: &TariffBook) -> Vec<bool> {
        book.grid_import.iter().map(|&c| self.import_price <= c).collect()
    }
}

/// Clears the community market at the boundary where community export pays
/// the same as grid export; importers pay that plus the grid-use fee.
pub fn derive_community_tariffs(book: &TariffBook) -> Result<CommunityTariffs, TariffError> {
    let export_comp = book.grid_export_comp;
    let tariffs = CommunityTariffs { export_comp, import_price: export_comp + book.grid_use_fee };
    let max_grid_import = book.max_grid_import();
    if tariffs.import_price > max_grid_import {
        return Err(TariffError::MarketDominatedByGrid { tariffs, max_grid_import });
    }
    Ok(tariffs)
}

pub fn read_wholesale_csv(reader: impl Read) -> Result<Vec<f64>, TariffError> {
    crate::csvio::read_step_column(reader, "price_eur_mwh").map_err(TariffError::Csv)
}

pub fn write_wholesale_csv(writer: impl Write, prices: &[f64]) -> std::io::Result<()> {
    crate::csvio::write_step_column(writer, "price_eur_mwh", prices)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn book_with(import: Vec<f64>, export: f64, fee: f64) -> TariffBook {
        TariffBook {
            charging: vec![2.0; import.len()],
            grid_import: import,
            grid_export_comp: export,
            grid_use_fee: fee,
            parking: 0.5,
            flexibility_reward: 0.5,
            discharging_reward: 3.0,
        }
    }

    #[test]
    fn grid_import_examples() {
        let flat = build_grid_import(&[50.0; 4], 122.8).unwrap();
        assert!(flat.iter().all(|&c| (c - 0.1228).abs() < 1e-15));
        let ident = build_grid_import(&[100.0, 200.0], 150.0).unwrap();
        assert_eq!(ident, vec![0.1, 0.2]);
        let scaled = build_grid_import(&[40.0, 60.0], 100.0).unwrap();
        assert!((scaled[0] - 0.08).abs() < 1e-15 && (scaled[1] - 0.12).abs() < 1e-15);
        assert!(matches!(build_grid_import(&[0.0, 0.0], 100.0), Err(TariffError::ZeroMeanWholesale(_))));
    }

    #[test]
    fn grid_export_examples() {
        assert_eq!(build_grid_export(35.8 / 0.9).unwrap() * 1000.0, 35.8);
        assert!((build_grid_export(0.001).unwrap() - 0.0000009).abs() < 1e-18);
        assert!((build_grid_export(100.0).unwrap() - 0.09).abs() < 1e-15);
        assert!(matches!(build_grid_export(0.0), Err(TariffError::NonPositiveInput { .. })));
    }

    #[test]
    fn charging_tariff_examples() {
        let flat = build_charging_tariff(&[0.1228; 3], 2.0).unwrap();
        assert!(flat.iter().all(|&c| (c - 2.0).abs() < 1e-12));
        assert_eq!(build_charging_tariff(&[0.1, 0.2], 0.0).unwrap(), vec![0.0, 0.0]);
        let shaped = build_charging_tariff(&[0.1, 0.3], 2.0).unwrap();
        assert!((shaped[0] - 1.0).abs() < 1e-12 && (shaped[1] - 3.0).abs() < 1e-12);
        assert!(matches!(build_charging_tariff(&[0.0], 2.0), Err(TariffError::ZeroMeanInput(_))));
    }

    #[test]
    fn community_tariff_examples() {
        let t = derive_community_tariffs(&book_with(vec![0.1228], 0.0358, 0.050)).unwrap();
        assert_eq!((t.export_comp * 1000.0, t.import_price * 1000.0), (35.8, 85.8));

        let t = derive_community_tariffs(&book_with(vec![0.1], 0.0, 0.0)).unwrap();
        assert_eq!((t.export_comp, t.import_price), (0.0, 0.0));

        match derive_community_tariffs(&book_with(vec![0.12], 0.04, 0.10)) {
            Err(TariffError::MarketDominatedByGrid { tariffs, max_grid_import }) => {
                assert!((tariffs.import_price - 0.14).abs() < 1e-15);
                assert_eq!(max_grid_import, 0.12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn default_profile_has_unit_mean_and_two_peaks() {
        let g = TimeGrid::daily(0.25).unwrap();
        let p = default_wholesale_profile(&g);
        assert!((mean(&p) - 1.0).abs() < 1e-12);
        let at = |h: f64| p[g.step_at(h).unwrap()];
        assert!(at(8.5) > at(14.0) && at(20.0) > at(14.0));
        // import must stay above the 35.8 €/MWh export compensation
        let min = p.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min * 122.8 > 35.8);
    }

    #[test]
    fn book_from_default_params() {
        let g = TimeGrid::daily(1.0).unwrap();
        let book = TariffBook::from_params(&TariffParams::default(), &default_wholesale_profile(&g), &g).unwrap();
        assert!((mean(&book.grid_import) - 0.1228).abs() < 1e-12);
        assert!((mean(&book.charging) - 2.0).abs() < 1e-12);
        assert!((book.grid_use_fee - 0.05).abs() < 1e-15);
    }

    #[test]
    fn wholesale_csv_round_trip() {
        let mut buf = Vec::new();
        write_wholesale_csv(&mut buf, &[40.5, 61.25]).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "step,price_eur_mwh\n0,40.5\n1,61.25\n");
        assert_eq!(read_wholesale_csv(&buf[..]).unwrap(), vec![40.5, 61.25]);
    }
}
