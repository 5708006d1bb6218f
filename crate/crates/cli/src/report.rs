//! Cost tables and per-step series written from scenario runs.
//!
//! Everything here is a pure function of the runs, so identical runs give
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use evflex::scenario::{Mode, Scenario, ScenarioRun};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no {0} run to report")]
    ModeMissing(Mode),
    #[error("runs cover different buildings")]
    BuildingMismatch,
    #[error("cannot write {path}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub const COST_HEADER: &str = "building,base_ce,ind_ce,ind_cev,ind_obj,com_ce,com_cev,com_obj";
pub const SERIES_HEADER: &str = "step,net_load_baseline_kw,net_load_with_evs_kw,comm_flow_kw";

/// One line of the cost table. EV columns hold the revenue with the sign
/// used in cost tables: money flowing to the building is negative.
#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub building: String,
    pub base_ce: f64,
    pub ind_ce: f64,
    pub ind_cev: f64,
    pub ind_obj: f64,
    pub com_ce: f64,
    pub com_cev: f64,
    pub com_obj: f64,
}

impl CostRow {
    fn values(&self) -> [f64; 7] {
        [self.base_ce, self.ind_ce, self.ind_cev, self.ind_obj, self.com_ce, self.com_cev, self.com_obj]
    }
}

fn find(runs: &[ScenarioRun], mode: Mode) -> Result<&ScenarioRun, ReportError> {
    runs.iter().find(|r| r.mode == mode).ok_or(ReportError::ModeMissing(mode))
}

/// Building rows followed by a `total` row of column sums.
pub fn cost_table(runs: &[ScenarioRun]) -> Result<Vec<CostRow>, ReportError> {
    let base = find(runs, Mode::Baseline)?;
    let ind = find(runs, Mode::Individual)?;
    let com = find(runs, Mode::Community)?;
    if base.building_ids != ind.building_ids || base.building_ids != com.building_ids {
        return Err(ReportError::BuildingMismatch);
    }
    let mut rows: Vec<CostRow> = base
        .building_ids
        .iter()
        .enumerate()
        .map(|(b, id)| CostRow {
            building: id.clone(),
            base_ce: base.costs[b].electricity_cost,
            ind_ce: ind.costs[b].electricity_cost,
            ind_cev: -ind.costs[b].ev_revenue,
            ind_obj: ind.costs[b].objective,
            com_ce: com.costs[b].electricity_cost,
            com_cev: -com.costs[b].ev_revenue,
            com_obj: com.costs[b].objective,
        })
        .collect();
    let mut total = [0.0; 7];
    for row in &rows {
        for (t, v) in total.iter_mut().zip(row.values()) {
            *t += v;
        }
    }
    let [base_ce, ind_ce, ind_cev, ind_obj, com_ce, com_cev, com_obj] = total;
    rows.push(CostRow { building: "total".into(), base_ce, ind_ce, ind_cev, ind_obj, com_ce, com_cev, com_obj });
    Ok(rows)
}

/// Full-precision CSV.
pub fn cost_csv(rows: &[CostRow]) -> String {
    let mut out = format!("{COST_HEADER}\n");
    for r in rows {
        let _ = write!(out, "{}", r.building);
        for v in r.values() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Aligned table with 0.1 € precision.
pub fn cost_text(rows: &[CostRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>9} | {:>9} {:>9} {:>9} | {:>9} {:>9} {:>9}",
        "", "Base.", "Indiv.", "", "", "Commun.", "", ""
    );
    let _ = writeln!(
        out,
        "{:<10} {:>9} | {:>9} {:>9} {:>9} | {:>9} {:>9} {:>9}",
        "building", "C_E", "C_E", "C_EV", "Obj", "C_E", "C_EV", "Obj"
    );
    for r in rows {
        let v = r.values().map(|x| {
            // keep "-0.0" out of the table
            let shown = (x * 10.0).round() / 10.0;
            format!("{:.1}", if shown == 0.0 { 0.0 } else { shown })
        });
        let _ = writeln!(
            out,
            "{:<10} {:>9} | {:>9} {:>9} {:>9} | {:>9} {:>9} {:>9}",
            r.building, v[0], v[1], v[2], v[3], v[4], v[5], v[6]
        );
    }
    out
}

/// Per-mode summary used when only one mode was run.
pub fn mode_csv(run: &ScenarioRun) -> String {
    let mut out = String::from("building,ce,cev,obj\n");
    for (id, c) in run.building_ids.iter().zip(&run.costs) {
        let _ = writeln!(out, "{id},{},{},{}", c.electricity_cost, -c.ev_revenue, c.objective);
    }
    let _ = writeln!(out, "total,{},{},{}", run.total_electricity_cost(), -run.total_ev_revenue(), run.total_objective());
    out
}

/// Per-step series of one building: net load without EVs, with EVs, and
/// the signed community flow (export positive).
pub fn series_csv(scenario: &Scenario, run: &ScenarioRun, building: usize) -> String {
    let series = &scenario.buildings[building];
    let flows = &run.solution.buildings[building];
    let ev = run.solution.ev_power(&series.building_id);
    let mut out = format!("{SERIES_HEADER}\n");
    for (h, load) in series.net_load.iter().enumerate() {
        let with_evs = load + ev[h];
        let flow = flows.comm_export[h] - flows.comm_import[h];
        let _ = writeln!(out, "{h},{load},{with_evs},{}", flow + 0.0);
    }
    out
}

fn write(dir: &Path, name: &str, body: &str, files: &mut Vec<PathBuf>) -> Result<(), ReportError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|source| ReportError::Io { path: path.clone(), source })?;
    files.push(path);
    Ok(())
}

/// Files written by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub rows: Option<Vec<CostRow>>,
    pub files: Vec<PathBuf>,
}

/// Writes the cost table (when all three modes are present), per-mode
/// summaries, per-building series and a manifest into `dir`.
pub fn emit_report(dir: &Path, scenario: &Scenario, runs: &[ScenarioRun]) -> Result<ReportBundle, ReportError> {
    fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.into(), source })?;
    let mut files = Vec::new();
    let rows = if Mode::ALL.iter().all(|m| runs.iter().any(|r| r.mode == *m)) {
        let rows = cost_table(runs)?;
        write(dir, "costs.csv", &cost_csv(&rows), &mut files)?;
        write(dir, "costs.txt", &cost_text(&rows), &mut files)?;
        Some(rows)
    } else {
        None
    };
    for run in runs {
        write(dir, &format!("costs_{}.csv", run.mode), &mode_csv(run), &mut files)?;
        for (b, id) in run.building_ids.iter().enumerate() {
            write(dir, &format!("series_{}_{id}.csv", run.mode), &series_csv(scenario, run, b), &mut files)?;
        }
    }

    let mut manifest = String::new();
    let _ = writeln!(manifest, "seed = {}", scenario.config.seed);
    let _ = writeln!(manifest, "dt_h = {}", scenario.grid.dt());
    let _ = writeln!(manifest, "community_export_eur_mwh = {}", scenario.community.export_comp * 1000.0);
    let _ = writeln!(manifest, "community_import_eur_mwh = {}", scenario.community.import_price * 1000.0);
    for run in runs {
        let s = &run.stats;
        let _ = writeln!(
            manifest,
            "{}: objective = {} status = {} nodes = {} gap = {:e}",
            run.mode,
            run.total_objective(),
            s.status,
            s.nodes,
            s.gap()
        );
    }
    for f in &files {
        let _ = writeln!(manifest, "file = {}", f.file_name().map(|n| n.to_string_lossy()).unwrap_or_default());
    }
    write(dir, "manifest.txt", &manifest, &mut files)?;
    Ok(ReportBundle { rows, files })
}
