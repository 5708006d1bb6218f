use evflex_milp::{export_lp_file, read_lp_dimensions, write_lp_string, MipModel, RowSense};

#[test]
fn single_variable_golden_file() {
    let mut m = MipModel::new();
    let x = m.add_var(0.0, f64::INFINITY, 1.0);
    m.add_row([(x, 1.0)], RowSense::Ge, 3.0, "lo");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.lp");
    export_lp_file(&m, &path).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        "Minimize\n obj: 1 x0\nSubject To\n lo_0: 1 x0 >= 3\nBounds\n x0 >= 0\nEnd\n"
    );
}

#[test]
fn empty_model_has_only_sections() {
    let text = write_lp_string(&MipModel::new());
    assert!(text.starts_with("Minimize\n") && text.ends_with("End\n"));
    let dims = read_lp_dimensions(&text).unwrap();
    assert_eq!((dims.rows, dims.cols, dims.binaries), (0, 0, 0));
}

#[test]
fn wide_model_round_trips() {
    // long rows force line wrapping; tags with dashes must be sanitized
    let mut m = MipModel::new();
    let vars: Vec<_> = (0..300).map(|k| m.add_var(0.0, 10.0, (k as f64) * 0.013 - 1.7)).collect();
    let bins: Vec<_> = (0..80).map(|_| m.add_binary(0.25)).collect();
    m.add_row(vars.iter().map(|&v| (v, 1.0 / 3.0)), RowSense::Le, 100.0, "sum-all");
    for (k, &b) in bins.iter().enumerate() {
        m.add_row([(vars[k], 1.0), (b, -10.0)], RowSense::Le, 0.0, "bigM-link");
    }
    m.add_row([(vars[0], 1.0), (vars[1], -1.0)], RowSense::Eq, 0.0, "tie");
    m.add_objective_offset(-12.5);

    let text = write_lp_string(&m);
    assert!(text.lines().all(|l| l.len() <= 200 + 40));
    assert!(text.contains("bigM_link_1:"));
    assert!(text.starts_with("\\ objective offset: -12.5\n"));
    let dims = read_lp_dimensions(&text).unwrap();
    assert_eq!((dims.rows, dims.cols, dims.binaries), (m.n_rows(), m.n_vars(), m.n_binaries()));
}

#[test]
fn missing_end_is_rejected() {
    assert!(read_lp_dimensions("Minimize\n obj: 1 x0\n").is_err());
}
