//! `evflex` command line: run the management modes on a scenario, verify
//! the solver against the brute-force oracle, or write a default scenario.

pub mod report;

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use evflex::audit::audit_solution;
use evflex::milp::export_lp_file;
use evflex::oracle::{micro_battery, oracle_enumerate};
use evflex::scenario::{run_mode, write_net_load_csv, Mode, Scenario, ScenarioConfig, ScenarioError};
use evflex::schedule::{solve_schedule, ScheduleError};
use evflex::tariff::write_wholesale_csv;
use log::{info, warn};

/// Relative tolerance of the oracle comparison.
pub const ORACLE_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "evflex", version, about = "EV flexibility and community surplus scheduling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Baseline,
    Individual,
    Community,
    All,
}

impl ModeArg {
    fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::Baseline => vec![Mode::Baseline],
            ModeArg::Individual => vec![Mode::Individual],
            ModeArg::Community => vec![Mode::Community],
            ModeArg::All => Mode::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one or all management modes and write reports.
    Run {
        /// Scenario config (key = value); built-in defaults if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "all")]
        mode: ModeArg,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Also write the solved MILP in LP format.
        #[arg(long)]
        export_lp: Option<PathBuf>,
        /// Overrides the config's step length in hours.
        #[arg(long)]
        dt: Option<f64>,
        /// Wall-clock limit per solve, seconds.
        #[arg(long)]
        time_limit: Option<f64>,
    },
    /// Compare the solver with exhaustive enumeration on micro scenarios.
    Verify,
    /// Write the default config and its synthetic data files.
    Gen {
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// Failure classes and their exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, config or input data: exit 2.
    BadInput(anyhow::Error),
    /// Infeasible schedule, solver failure or failed verification: exit 1.
    Failed(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::BadInput(_) => 2,
            Failure::Failed(_) => 1,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::BadInput(e) | Failure::Failed(e) => e,
        }
    }
}

fn classify(e: ScenarioError) -> Failure {
    match e {
        ScenarioError::Schedule(ScheduleError::Model(_) | ScheduleError::Tariff(_)) => Failure::BadInput(e.into()),
        ScenarioError::Schedule(_) => Failure::Failed(e.into()),
        _ => Failure::BadInput(e.into()),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            f.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, mode, seed, out, export_lp, dt, time_limit } => {
            let mut cfg = match &config {
                Some(path) => ScenarioConfig::load(path).map_err(classify)?,
                None => ScenarioConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(dt) = dt {
                cfg.dt = dt;
            }
            if let Some(t) = time_limit {
                if !(t > 0.0) {
                    return Err(Failure::BadInput(anyhow!("--time-limit must be positive")));
                }
                cfg.time_limit_seconds = Some(t);
            }
            cfg.validate().map_err(classify)?;
            run(&cfg, &mode.modes(), &out, export_lp.as_deref())
        }
        Command::Verify => verify(),
        Command::Gen { out } => generate(&out).map_err(Failure::BadInput),
    }
}

fn run(cfg: &ScenarioConfig, modes: &[Mode], out: &Path, export_lp: Option<&Path>) -> Result<(), Failure> {
    let scenario = Scenario::generate(cfg).map_err(classify)?;
    if let Some(path) = export_lp {
        export_models(&scenario, modes, path)?;
    }
    let mut runs = Vec::with_capacity(modes.len());
    for &mode in modes {
        let run = run_mode(&scenario, mode).map_err(classify)?;
        let violations = audit_solution(&run.solution, &scenario.buildings);
        if let Some(v) = violations.first() {
            return Err(Failure::Failed(anyhow!("{mode} schedule failed its audit: {v}")));
        }
        runs.push(run);
    }
    let bundle = report::emit_report(out, &scenario, &runs).map_err(|e| Failure::Failed(e.into()))?;
    let mut stdout = std::io::stdout().lock();
    match &bundle.rows {
        Some(rows) => {
            let _ = write!(stdout, "{}", report::cost_text(rows));
        }
        None => {
            for r in &runs {
                let _ = writeln!(
                    stdout,
                    "{}: C_E {:.1}  C_EV {:.1}  Obj {:.1}",
                    r.mode,
                    r.total_electricity_cost(),
                    -r.total_ev_revenue(),
                    r.total_objective()
                );
            }
        }
    }
    info!("wrote {} files to {}", bundle.files.len(), out.display());
    Ok(())
}

/// Writes the most inclusive model among `modes`: the joint community model,
/// or one file per building for individual management.
fn export_models(scenario: &Scenario, modes: &[Mode], path: &Path) -> Result<(), Failure> {
    let mode = if modes.contains(&Mode::Community) {
        Mode::Community
    } else if modes.contains(&Mode::Individual) {
        Mode::Individual
    } else {
        warn!("baseline mode has no optimization model; nothing exported");
        return Ok(());
    };
    let models = scenario.build_models(mode).map_err(classify)?;
    let failed = |e: evflex::milp::SolverError| Failure::Failed(anyhow!(e).context(format!("writing {}", path.display())));
    if let [only] = models.as_slice() {
        export_lp_file(&only.model, path).map_err(failed)?;
        return Ok(());
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    for built in &models {
        let id = &built.buildings[0].building_id;
        export_lp_file(&built.model, path.with_file_name(format!("{stem}_{id}.lp"))).map_err(failed)?;
    }
    Ok(())
}

fn verify() -> Result<(), Failure> {
    let mut failures = 0;
    let battery = micro_battery();
    for s in &battery {
        let outcome = (|| -> anyhow::Result<(f64, f64, usize)> {
            let oracle = oracle_enumerate(s)?;
            let built = s.build_model()?;
            let (sol, raw) = solve_schedule(&built, &Default::default())?;
            Ok((oracle.objective, raw.objective, audit_solution(&sol, &s.buildings).len()))
        })();
        match outcome {
            Ok((oracle, milp, violations)) => {
                let diff = (milp - oracle).abs();
                let ok = diff <= ORACLE_TOL * oracle.abs().max(1.0) && violations == 0;
                failures += usize::from(!ok);
                println!(
                    "{} {:<20} oracle {oracle:>12.6}  milp {milp:>12.6}  diff {diff:.1e}  audit {violations}",
                    if ok { "ok  " } else { "FAIL" },
                    s.name
                );
            }
            Err(e) => {
                failures += 1;
                println!("FAIL {:<20} {e:#}", s.name);
            }
        }
    }
    println!("{} of {} micro scenarios agree", battery.len() - failures, battery.len());
    if failures > 0 {
        return Err(Failure::Failed(anyhow!("{failures} micro scenarios disagree with the oracle")));
    }
    Ok(())
}

/// Writes `evflex.cfg` plus the wholesale and net-load files it points to.
fn generate(out: &Path) -> anyhow::Result<()> {
    let data = out.join("data");
    fs::create_dir_all(&data).with_context(|| format!("creating {}", data.display()))?;
    let mut cfg = ScenarioConfig::default();
    let scenario = Scenario::generate(&cfg)?;

    let create = |path: &Path| fs::File::create(path).with_context(|| format!("creating {}", path.display()));
    write_wholesale_csv(create(&data.join("wholesale.csv"))?, &scenario.wholesale)?;
    for b in &scenario.buildings {
        write_net_load_csv(create(&data.join(format!("{}.csv", b.building_id)))?, b)?;
    }
    cfg.wholesale_file = Some(PathBuf::from("data/wholesale.csv"));
    cfg.net_load_files = scenario.buildings.iter().map(|b| PathBuf::from(format!("data/{}.csv", b.building_id))).collect();
    let path = out.join("evflex.cfg");
    fs::write(&path, cfg.to_text()).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}
