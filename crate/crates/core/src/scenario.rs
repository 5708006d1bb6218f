//! Scenario generation (EV population, synthetic net loads, tariffs) and the
//! three management modes: baseline, individual and community.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use evflex_milp::{relative_gap, SolveOptions, SolveResult, SolveStatus};
use log::{info, warn};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::cost::electricity_cost;
use crate::model::{
    validate_request, BuildingFlows, BuildingSeries, CostBreakdown, EvRequest, ModelError, ScheduleSolution,
    ScheduleStatus, TimeGrid,
};
use crate::schedule::{build_schedule_model, solve_schedule, BuiltModel, ScheduleError};
use crate::tariff::{
    default_wholesale_profile, derive_community_tariffs, read_wholesale_csv, CommunityTariffs, TariffBook,
    TariffError, TariffParams,
};

/// Redraws allowed per EV profile before giving up.
pub const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("EV profile {profile}: no feasible draw in {attempts} attempts")]
    GenerationExhausted { profile: usize, attempts: usize },
    #[error("surplus window {start}-{end} h is not inside the day")]
    BadWindow { start: f64, end: f64 },
    #[error("cannot access {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tariff(#[from] TariffError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Mean and standard deviation of a period, in hours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodStats {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_buildings: usize,
    pub evs_per_building: usize,
    pub population_size: usize,
    pub parking: PeriodStats,
    pub charging: PeriodStats,
    pub discharging: PeriodStats,
    /// Availability window `[start, end]` in hours of the day.
    pub window: (f64, f64),
    pub p_max_kw: f64,
    pub efficiency: f64,
    pub seed: u64,
    pub dt: f64,
    pub tariffs: TariffParams,
    pub rel_gap: f64,
    pub time_limit_seconds: Option<f64>,
    pub node_limit: Option<u64>,
    /// One `step,net_load_kw` file per building; synthetic presets if empty.
    pub net_load_files: Vec<PathBuf>,
    /// `step,price_eur_mwh` file; the built-in two-peak shape if absent.
    pub wholesale_file: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_buildings: 4,
            evs_per_building: 6,
            population_size: 30,
            parking: PeriodStats { mean: 8.0, sd: 1.0 },
            charging: PeriodStats { mean: 2.0, sd: 0.5 },
            discharging: PeriodStats { mean: 0.75, sd: 0.25 },
            window: (8.0, 20.0),
            p_max_kw: 10.0,
            efficiency: 0.93,
            seed: 7,
            dt: 0.25,
            tariffs: TariffParams::default(),
            rel_gap: 1e-6,
            time_limit_seconds: None,
            node_limit: None,
            net_load_files: Vec::new(),
            wholesale_file: None,
        }
    }
}

fn parse_num<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ScenarioError> {
    value.parse().map_err(|_| ScenarioError::Config { line, message: format!("bad value `{value}` for {key}") })
}

fn fmt_opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

impl ScenarioConfig {
    /// Parses flat `key = value` text. Blank lines and `#` comments are
    /// ignored; keys not given keep their defaults. Relative file paths are
    /// resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ScenarioError> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| ScenarioError::Config { line, message: format!("expected key = value, got `{body}`") })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(ScenarioError::Config { line, message: format!("duplicate key {key}") });
            }
            let t = &mut cfg.tariffs;
            match key {
                "n_buildings" => cfg.n_buildings = parse_num(line, key, value)?,
                "evs_per_building" => cfg.evs_per_building = parse_num(line, key, value)?,
                "population_size" => cfg.population_size = parse_num(line, key, value)?,
                "parking_mean_h" => cfg.parking.mean = parse_num(line, key, value)?,
                "parking_sd_h" => cfg.parking.sd = parse_num(line, key, value)?,
                "charging_mean_h" => cfg.charging.mean = parse_num(line, key, value)?,
                "charging_sd_h" => cfg.charging.sd = parse_num(line, key, value)?,
                "discharging_mean_h" => cfg.discharging.mean = parse_num(line, key, value)?,
                "discharging_sd_h" => cfg.discharging.sd = parse_num(line, key, value)?,
                "window_start_h" => cfg.window.0 = parse_num(line, key, value)?,
                "window_end_h" => cfg.window.1 = parse_num(line, key, value)?,
                "p_max_kw" => cfg.p_max_kw = parse_num(line, key, value)?,
                "efficiency" => cfg.efficiency = parse_num(line, key, value)?,
                "seed" => cfg.seed = parse_num(line, key, value)?,
                "dt_h" => cfg.dt = parse_num(line, key, value)?,
                "import_avg_eur_mwh" => t.import_avg_eur_mwh = parse_num(line, key, value)?,
                "export_monthly_avg_eur_mwh" => t.export_monthly_avg_eur_mwh = parse_num(line, key, value)?,
                "grid_use_eur_mwh" => t.grid_use_eur_mwh = parse_num(line, key, value)?,
                "parking_eur_h" => t.parking_eur_h = parse_num(line, key, value)?,
                "flexibility_eur_h" => t.flexibility_eur_h = parse_num(line, key, value)?,
                "discharging_eur_h" => t.discharging_eur_h = parse_num(line, key, value)?,
                "charging_avg_eur_h" => t.charging_avg_eur_h = parse_num(line, key, value)?,
                "rel_gap" => cfg.rel_gap = parse_num(line, key, value)?,
                "time_limit_s" if value.is_empty() => cfg.time_limit_seconds = None,
                "time_limit_s" => cfg.time_limit_seconds = Some(parse_num(line, key, value)?),
                "node_limit" if value.is_empty() => cfg.node_limit = None,
                "node_limit" => cfg.node_limit = Some(parse_num(line, key, value)?),
                "net_load_files" => {
                    cfg.net_load_files = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| base_dir.join(s))
                        .collect()
                }
                "wholesale_file" if value.is_empty() => cfg.wholesale_file = None,
                "wholesale_file" => cfg.wholesale_file = Some(base_dir.join(value)),
                _ => return Err(ScenarioError::Config { line, message: format!("unknown key {key}") }),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Renders the config in the format read by [`ScenarioConfig::parse`].
    /// File paths are written as given.
    pub fn to_text(&self) -> String {
        let t = &self.tariffs;
        let files: Vec<String> = self.net_load_files.iter().map(|p| p.display().to_string()).collect();
        let pairs: Vec<(&str, String)> = vec![
            ("n_buildings", self.n_buildings.to_string()),
            ("evs_per_building", self.evs_per_building.to_string()),
            ("population_size", self.population_size.to_string()),
            ("parking_mean_h", self.parking.mean.to_string()),
            ("parking_sd_h", self.parking.sd.to_string()),
            ("charging_mean_h", self.charging.mean.to_string()),
            ("charging_sd_h", self.charging.sd.to_string()),
            ("discharging_mean_h", self.discharging.mean.to_string()),
            ("discharging_sd_h", self.discharging.sd.to_string()),
            ("window_start_h", self.window.0.to_string()),
            ("window_end_h", self.window.1.to_string()),
            ("p_max_kw", self.p_max_kw.to_string()),
            ("efficiency", self.efficiency.to_string()),
            ("seed", self.seed.to_string()),
            ("dt_h", self.dt.to_string()),
            ("import_avg_eur_mwh", t.import_avg_eur_mwh.to_string()),
            ("export_monthly_avg_eur_mwh", t.export_monthly_avg_eur_mwh.to_string()),
            ("grid_use_eur_mwh", t.grid_use_eur_mwh.to_string()),
            ("parking_eur_h", t.parking_eur_h.to_string()),
            ("flexibility_eur_h", t.flexibility_eur_h.to_string()),
            ("discharging_eur_h", t.discharging_eur_h.to_string()),
            ("charging_avg_eur_h", t.charging_avg_eur_h.to_string()),
            ("rel_gap", self.rel_gap.to_string()),
            ("time_limit_s", fmt_opt(&self.time_limit_seconds)),
            ("node_limit", fmt_opt(&self.node_limit)),
            ("net_load_files", files.join(",")),
            ("wholesale_file", self.wholesale_file.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
        ];
        pairs.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.n_buildings == 0 {
            return bad("n_buildings must be at least 1".into());
        }
        if self.evs_per_building > self.population_size {
            return bad(format!(
                "evs_per_building {} exceeds population_size {}",
                self.evs_per_building, self.population_size
            ));
        }
        for (what, s) in [("parking", self.parking), ("charging", self.charging), ("discharging", self.discharging)] {
            if !(s.mean > 0.0 && s.mean.is_finite() && s.sd >= 0.0 && s.sd.is_finite()) {
                return bad(format!("{what} needs a positive mean and a non-negative sd"));
            }
        }
        let (a, b) = self.window;
        if !(a >= 0.0 && a < b && b <= 24.0) {
            return bad(format!("availability window {a}-{b} h is not inside the day"));
        }
        if !(self.p_max_kw > 0.0 && self.p_max_kw.is_finite()) {
            return bad("p_max_kw must be positive".into());
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return bad("efficiency must lie in (0, 1]".into());
        }
        if !(self.rel_gap > 0.0) {
            return bad("rel_gap must be positive".into());
        }
        if !self.net_load_files.is_empty() && self.net_load_files.len() != self.n_buildings {
            return bad(format!(
                "{} net load files for {} buildings",
                self.net_load_files.len(),
                self.n_buildings
            ));
        }
        TimeGrid::daily(self.dt)?;
        Ok(())
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            rel_gap: self.rel_gap,
            time_limit_seconds: self.time_limit_seconds,
            node_limit: self.node_limit,
            ..SolveOptions::default()
        }
    }
}

/// One EV profile of the population, before it is assigned to a building.
#[derive(Debug, Clone, PartialEq)]
pub struct EvProfile {
    pub arrival_step: usize,
    pub park_steps: usize,
    pub t_charge_req: f64,
    pub t_discharge_allow: f64,
}

/// Draws `population_size` feasible profiles.
///
/// Periods are normal with the configured mean and sd, redrawn (not clipped)
/// until positive and feasible; the arrival is uniform over the steps that
/// keep the whole stay inside the availability window.
pub fn generate_population(cfg: &ScenarioConfig, grid: &TimeGrid) -> Result<Vec<EvProfile>, ScenarioError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = |s: PeriodStats| Normal::new(s.mean, s.sd).expect("sd validated");
    let (park, charge, discharge) = (normal(cfg.parking), normal(cfg.charging), normal(cfg.discharging));
    let dt = grid.dt();
    let first = (cfg.window.0 / dt - 1e-9).ceil() as usize;
    let last = ((cfg.window.1 / dt + 1e-9).floor() as usize).min(grid.steps());

    let mut out = Vec::with_capacity(cfg.population_size);
    for profile in 0..cfg.population_size {
        let mut drawn = None;
        for _ in 0..MAX_ATTEMPTS {
            let (p, c, d) = (park.sample(&mut rng), charge.sample(&mut rng), discharge.sample(&mut rng));
            if !(p > 0.0 && c > 0.0 && d > 0.0) {
                continue;
            }
            let park_steps = (p / dt).round() as usize;
            if park_steps == 0 || first + park_steps > last {
                continue;
            }
            let arrival_step = rng.random_range(first..=last - park_steps);
            let candidate = EvProfile { arrival_step, park_steps, t_charge_req: c, t_discharge_allow: d };
            match validate_request(&profile_request(&candidate, "probe", cfg, grid), grid) {
                Ok(r) if r.t_charge_req > 0.0 => {
                    drawn = Some(candidate);
                    break;
                }
                _ => continue,
            }
        }
        out.push(drawn.ok_or(ScenarioError::GenerationExhausted { profile, attempts: MAX_ATTEMPTS })?);
    }
    Ok(out)
}

fn profile_request(p: &EvProfile, ev_id: &str, cfg: &ScenarioConfig, grid: &TimeGrid) -> EvRequest {
    EvRequest {
        ev_id: ev_id.to_string(),
        arrival_step: p.arrival_step,
        departure_step: p.arrival_step + p.park_steps,
        t_park: p.park_steps as f64 * grid.dt(),
        t_charge_req: p.t_charge_req,
        t_discharge_allow: p.t_discharge_allow,
        p_charge_max: cfg.p_max_kw,
        p_discharge_max: cfg.p_max_kw,
        efficiency: cfg.efficiency,
    }
}

/// Draws the population and gives each building `evs_per_building`
/// distinct profiles. Periods are snapped to the grid.
pub fn generate_ev_population(
    cfg: &ScenarioConfig,
    grid: &TimeGrid,
    building_ids: &[String],
) -> Result<Vec<Vec<EvRequest>>, ScenarioError> {
    let population = generate_population(cfg, grid)?;
    // selection uses its own stream so that changing evs_per_building does
    // not reshuffle the population itself
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5e1e_c7ed_0001);
    building_ids
        .iter()
        .map(|b| {
            let mut picks = index::sample(&mut rng, population.len(), cfg.evs_per_building).into_vec();
            picks.sort_unstable();
            picks
                .into_iter()
                .map(|i| {
                    let req = profile_request(&population[i], &format!("{b}-ev{:02}", i + 1), cfg, grid);
                    Ok(validate_request(&req, grid)?)
                })
                .collect()
        })
        .collect()
}

/// Parameters of the synthetic daily net-load curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetLoadShape {
    /// Night-time demand, kW.
    pub base_kw: f64,
    /// Evening peak above base, kW (the morning peak is 60 % of it).
    pub peak_kw: f64,
    /// Net load at the bottom of the midday trough is `-surplus_depth_kw`.
    pub surplus_depth_kw: f64,
    /// Hours during which on-site generation exceeds demand; `None` for a
    /// building without generation.
    pub surplus_window: Option<(f64, f64)>,
}

impl NetLoadShape {
    /// Four presets mixing a net consumer with buildings of growing midday
    /// surplus.
    pub fn presets() -> [NetLoadShape; 4] {
        [
            NetLoadShape { base_kw: 14.0, peak_kw: 22.0, surplus_depth_kw: 0.0, surplus_window: None },
            NetLoadShape { base_kw: 12.0, peak_kw: 16.0, surplus_depth_kw: 10.0, surplus_window: Some((11.0, 15.0)) },
            NetLoadShape { base_kw: 10.0, peak_kw: 18.0, surplus_depth_kw: 35.0, surplus_window: Some((9.5, 16.5)) },
            NetLoadShape { base_kw: 8.0, peak_kw: 12.0, surplus_depth_kw: 70.0, surplus_window: Some((8.5, 17.5)) },
        ]
    }

    /// Demand without generation at hour `t`.
    fn demand(&self, t: f64) -> f64 {
        let bump = |centre: f64, width: f64| (-((t - centre) / width).powi(2)).exp();
        self.base_kw + self.peak_kw * (0.6 * bump(8.5, 1.5) + bump(19.5, 2.0))
    }
}

/// Samples `shape` at every step start. Inside the surplus window the curve
/// blends from demand down to `-surplus_depth_kw` with a sin² weight, so it
/// is continuous at the window edges.
pub fn generate_net_load(
    building_id: &str,
    shape: &NetLoadShape,
    grid: &TimeGrid,
) -> Result<BuildingSeries, ScenarioError> {
    if let Some((s, e)) = shape.surplus_window {
        if !(s >= grid.start_hour() && s < e && e <= grid.start_hour() + grid.steps() as f64 * grid.dt()) {
            return Err(ScenarioError::BadWindow { start: s, end: e });
        }
    }
    if !(shape.base_kw >= 0.0 && shape.peak_kw >= 0.0 && shape.surplus_depth_kw >= 0.0) {
        return Err(ScenarioError::Invalid("net load shape needs non-negative parameters".into()));
    }
    let load = (0..grid.steps())
        .map(|h| {
            let t = grid.hour_of(h);
            let w = match shape.surplus_window {
                Some((s, e)) if t > s && t < e => (std::f64::consts::PI * (t - s) / (e - s)).sin().powi(2),
                _ => 0.0,
            };
            shape.demand(t) * (1.0 - w) - shape.surplus_depth_kw * w
        })
        .collect();
    Ok(BuildingSeries::new(building_id, load, grid)?)
}

pub fn read_net_load_csv(path: &Path, building_id: &str, grid: &TimeGrid) -> Result<BuildingSeries, ScenarioError> {
    let file = fs::File::open(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
    let values = crate::csvio::read_step_column(file, "net_load_kw")
        .map_err(|message| ScenarioError::Input { path: path.into(), message })?;
    Ok(BuildingSeries::new(building_id, values, grid)?)
}

pub fn write_net_load_csv(writer: impl std::io::Write, series: &BuildingSeries) -> std::io::Result<()> {
    crate::csvio::write_step_column(writer, "net_load_kw", &series.net_load)
}

/// Everything a mode run needs, generated once and shared by all modes.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub grid: TimeGrid,
    pub wholesale: Vec<f64>,
    pub tariffs: TariffBook,
    pub community: CommunityTariffs,
    pub buildings: Vec<BuildingSeries>,
    pub evs: Vec<Vec<EvRequest>>,
}

pub fn building_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("b{i}")).collect()
}

/// Wholesale series used when no file is configured: the built-in daily
/// shape scaled to the monthly average.
pub fn default_wholesale(cfg: &ScenarioConfig, grid: &TimeGrid) -> Vec<f64> {
    default_wholesale_profile(grid).into_iter().map(|v| v * cfg.tariffs.export_monthly_avg_eur_mwh).collect()
}

impl Scenario {
    pub fn generate(cfg: &ScenarioConfig) -> Result<Self, ScenarioError> {
        cfg.validate()?;
        let grid = TimeGrid::daily(cfg.dt)?;
        let ids = building_ids(cfg.n_buildings);
        let buildings = if cfg.net_load_files.is_empty() {
            let presets = NetLoadShape::presets();
            ids.iter()
                .enumerate()
                .map(|(i, id)| generate_net_load(id, &presets[i % presets.len()], &grid))
                .collect::<Result<Vec<_>, _>>()?
        } else {
            ids.iter()
                .zip(&cfg.net_load_files)
                .map(|(id, path)| read_net_load_csv(path, id, &grid))
                .collect::<Result<Vec<_>, _>>()?
        };
        let wholesale = match &cfg.wholesale_file {
            Some(path) => {
                let file = fs::File::open(path).map_err(|source| ScenarioError::Io { path: path.clone(), source })?;
                read_wholesale_csv(file)?
            }
            None => default_wholesale(cfg, &grid),
        };
        let tariffs = TariffBook::from_params(&cfg.tariffs, &wholesale, &grid)?;
        let community = match derive_community_tariffs(&tariffs) {
            Ok(c) => c,
            Err(TariffError::MarketDominatedByGrid { tariffs, max_grid_import }) => {
                warn!(
                    "community import {} €/kWh is above every grid import price (max {max_grid_import}); trading will not pay off",
                    tariffs.import_price
                );
                tariffs
            }
            Err(e) => return Err(e.into()),
        };
        let evs = generate_ev_population(cfg, &grid, &ids)?;
        Ok(Self { config: cfg.clone(), grid, wholesale, tariffs, community, buildings, evs })
    }

    /// Builds the MILP for `mode` over all buildings. Individual mode returns
    /// one model per building.
    pub fn build_models(&self, mode: Mode) -> Result<Vec<BuiltModel>, ScenarioError> {
        match mode {
            Mode::Baseline => Ok(Vec::new()),
            Mode::Individual => self
                .buildings
                .iter()
                .zip(&self.evs)
                .map(|(b, evs)| {
                    build_schedule_model(self.grid, self.tariffs.clone(), None, std::slice::from_ref(b), std::slice::from_ref(evs))
                        .map_err(Into::into)
                })
                .collect(),
            Mode::Community => Ok(vec![build_schedule_model(
                self.grid,
                self.tariffs.clone(),
                Some(self.community),
                &self.buildings,
                &self.evs,
            )?]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Baseline,
    Individual,
    Community,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Baseline, Mode::Individual, Mode::Community];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Baseline => "baseline",
            Mode::Individual => "individual",
            Mode::Community => "community",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "individual" => Ok(Mode::Individual),
            "community" => Ok(Mode::Community),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// Search statistics summed over the models solved for one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverStats {
    pub models: usize,
    pub nodes: u64,
    pub objective: f64,
    pub best_bound: f64,
    pub status: SolveStatus,
}

impl SolverStats {
    pub fn gap(&self) -> f64 {
        relative_gap(self.objective, self.best_bound)
    }

    fn absorb(&mut self, r: &SolveResult) {
        self.models += 1;
        self.nodes += r.nodes;
        self.objective += r.objective;
        self.best_bound += r.best_bound;
        // the weakest status wins
        if r.status != SolveStatus::Optimal {
            self.status = r.status;
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub mode: Mode,
    pub building_ids: Vec<String>,
    /// Per building, in `building_ids` order.
    pub costs: Vec<CostBreakdown>,
    pub solution: ScheduleSolution,
    pub stats: SolverStats,
}

impl ScenarioRun {
    pub fn total_electricity_cost(&self) -> f64 {
        self.costs.iter().map(|c| c.electricity_cost).sum()
    }

    pub fn total_ev_revenue(&self) -> f64 {
        self.costs.iter().map(|c| c.ev_revenue).sum()
    }

    pub fn total_objective(&self) -> f64 {
        self.costs.iter().map(|c| c.objective).sum()
    }
}

fn baseline_run(s: &Scenario) -> ScenarioRun {
    let steps = s.grid.steps();
    let buildings: Vec<BuildingFlows> = s
        .buildings
        .iter()
        .map(|b| BuildingFlows {
            building_id: b.building_id.clone(),
            comm_export: vec![0.0; steps],
            comm_import: vec![0.0; steps],
            grid_residual: b.net_load.clone(),
        })
        .collect();
    let costs: Vec<CostBreakdown> = s
        .buildings
        .iter()
        .map(|b| {
            let zero = vec![0.0; steps];
            CostBreakdown::electricity_only(electricity_cost(&b.net_load, &zero, &zero, &s.tariffs, None, s.grid.dt()))
        })
        .collect();
    let total: f64 = costs.iter().map(|c| c.objective).sum();
    ScenarioRun {
        mode: Mode::Baseline,
        building_ids: s.buildings.iter().map(|b| b.building_id.clone()).collect(),
        solution: ScheduleSolution {
            grid: s.grid,
            evs: Vec::new(),
            buildings,
            costs: costs.clone(),
            status: ScheduleStatus::Optimal,
        },
        costs,
        stats: SolverStats { models: 0, nodes: 0, objective: total, best_bound: total, status: SolveStatus::Optimal },
    }
}

/// Runs one management mode on an already generated scenario.
pub fn run_mode(s: &Scenario, mode: Mode) -> Result<ScenarioRun, ScenarioError> {
    if mode == Mode::Baseline {
        return Ok(baseline_run(s));
    }
    let models = s.build_models(mode)?;
    let opts = s.config.solve_options();
    // each building solve is independent in individual mode; results are
    // collected in building order, so the outcome does not depend on the
    // thread count
    let solved: Vec<_> = models.par_iter().map(|m| solve_schedule(m, &opts)).collect();
    let mut parts = Vec::with_capacity(solved.len());
    let mut stats = SolverStats { models: 0, nodes: 0, objective: 0.0, best_bound: 0.0, status: SolveStatus::Optimal };
    for r in solved {
        let (sol, raw) = r?;
        stats.absorb(&raw);
        parts.push(sol);
    }
    let solution = ScheduleSolution::merge(parts).expect("at least one building");
    info!("{mode}: objective {:.4} after {} nodes (gap {:.2e})", solution.total_objective(), stats.nodes, stats.gap());
    Ok(ScenarioRun {
        mode,
        building_ids: solution.buildings.iter().map(|b| b.building_id.clone()).collect(),
        costs: solution.costs.clone(),
        solution,
        stats,
    })
}

/// Generates the scenario described by `cfg` and runs `mode` on it.
pub fn run_scenario(cfg: &ScenarioConfig, mode: Mode) -> Result<ScenarioRun, ScenarioError> {
    run_mode(&Scenario::generate(cfg)?, mode)
}
