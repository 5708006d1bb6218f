use std::fs;
use std::path::Path;

use evflex::model::TimeGrid;
use evflex::scenario::{
    generate_population, read_net_load_csv, write_net_load_csv, Scenario, ScenarioConfig, ScenarioError,
};
use evflex::tariff::{read_wholesale_csv, write_wholesale_csv};

#[test]
fn config_text_round_trips() {
    let mut cfg = ScenarioConfig { seed: 42, dt: 0.5, time_limit_seconds: Some(12.5), ..ScenarioConfig::default() };
    cfg.tariffs.grid_use_eur_mwh = 47.0;
    let back = ScenarioConfig::parse(&cfg.to_text(), Path::new("")).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn config_errors_carry_line_numbers() {
    let err = ScenarioConfig::parse("# header\nseed = 3\nbogus = 1\n", Path::new(".")).unwrap_err();
    assert!(matches!(err, ScenarioError::Config { line: 3, .. }), "{err}");
    let err = ScenarioConfig::parse("seed = 1\nseed = 2\n", Path::new(".")).unwrap_err();
    assert!(matches!(err, ScenarioError::Config { line: 2, .. }));
    let err = ScenarioConfig::parse("dt_h = fast\n", Path::new(".")).unwrap_err();
    assert!(matches!(err, ScenarioError::Config { line: 1, .. }));
    // parses, then fails validation
    let err = ScenarioConfig::parse("window_start_h = 21\n", Path::new(".")).unwrap_err();
    assert!(matches!(err, ScenarioError::Invalid(_)));
}

#[test]
fn file_backed_scenario_matches_synthetic_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig { dt: 1.0, ..ScenarioConfig::default() };
    let synthetic = Scenario::generate(&cfg).unwrap();

    let mut text = cfg.to_text().replace("wholesale_file = \n", "wholesale_file = w.csv\n");
    text = text.replace("net_load_files = \n", "net_load_files = b1.csv, b2.csv, b3.csv, b4.csv\n");
    write_wholesale_csv(fs::File::create(dir.path().join("w.csv")).unwrap(), &synthetic.wholesale).unwrap();
    for b in &synthetic.buildings {
        write_net_load_csv(fs::File::create(dir.path().join(format!("{}.csv", b.building_id))).unwrap(), b).unwrap();
    }
    let cfg_path = dir.path().join("s.cfg");
    fs::write(&cfg_path, text).unwrap();

    let loaded = Scenario::generate(&ScenarioConfig::load(&cfg_path).unwrap()).unwrap();
    assert_eq!(loaded.buildings, synthetic.buildings);
    assert_eq!(loaded.wholesale, synthetic.wholesale);
    assert_eq!(loaded.evs, synthetic.evs);
    assert_eq!(loaded.tariffs, synthetic.tariffs);
}

#[test]
fn short_net_load_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.csv");
    fs::write(&path, "step,net_load_kw\n0,1.5\n1,2.0\n").unwrap();
    let grid = TimeGrid::daily(1.0).unwrap();
    assert!(read_net_load_csv(&path, "b1", &grid).is_err());
    assert!(matches!(
        read_net_load_csv(&dir.path().join("missing.csv"), "b1", &grid),
        Err(ScenarioError::Io { .. })
    ));
}

#[test]
fn wholesale_csv_round_trips() {
    let prices = vec![41.25, -3.5, 0.0, 120.125];
    let mut buf = Vec::new();
    write_wholesale_csv(&mut buf, &prices).unwrap();
    assert_eq!(read_wholesale_csv(buf.as_slice()).unwrap(), prices);
}

#[test]
fn population_respects_window_and_is_seeded() {
    let cfg = ScenarioConfig { population_size: 200, ..ScenarioConfig::default() };
    let grid = TimeGrid::daily(cfg.dt).unwrap();
    let pop = generate_population(&cfg, &grid).unwrap();
    assert_eq!(pop.len(), 200);
    for p in &pop {
        let start = grid.hour_of(p.arrival_step);
        let end = start + p.park_steps as f64 * grid.dt();
        assert!(start >= 8.0 - 1e-9 && end <= 20.0 + 1e-9, "{p:?}");
        assert!(p.t_charge_req > 0.0 && p.t_discharge_allow > 0.0);
    }
    assert_eq!(pop, generate_population(&cfg, &grid).unwrap());
    let other = generate_population(&ScenarioConfig { seed: 8, ..cfg }, &grid).unwrap();
    assert_ne!(pop, other);
}
