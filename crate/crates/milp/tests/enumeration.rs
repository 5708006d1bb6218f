//! Branch-and-bound against exhaustive enumeration of the binaries.

use evflex_milp::{branch_and_bound, solve_lp, MipModel, RowSense, SolveOptions, SolveStatus, VarId};
use proptest::prelude::*;

fn tight() -> SolveOptions {
    SolveOptions { rel_gap: 1e-12, ..SolveOptions::default() }
}

/// Minimum over all 2^n binary assignments, each solved as an LP with the
/// binaries fixed. `None` when every assignment is infeasible.
fn enumerate(model: &MipModel) -> Option<f64> {
    let bins: Vec<VarId> = model.binaries().collect();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let mut fixed = model.clone();
        for (k, &b) in bins.iter().enumerate() {
            let v = f64::from((mask >> k) & 1);
            fixed.set_bounds(b, v, v);
        }
        let r = solve_lp(&fixed, &tight()).unwrap();
        if r.status == SolveStatus::Optimal {
            best = Some(best.map_or(r.objective, |b: f64| b.min(r.objective)));
        }
    }
    best
}

#[derive(Debug, Clone)]
struct RandomMip {
    n_bin: usize,
    n_cont: usize,
    costs: Vec<i32>,
    rows: Vec<(Vec<i32>, u8, i32)>,
}

fn random_mip() -> impl Strategy<Value = RandomMip> {
    (1usize..=8, 0usize..=3).prop_flat_map(|(n_bin, n_cont)| {
        let n = n_bin + n_cont;
        (
            prop::collection::vec(-10i32..=10, n),
            prop::collection::vec((prop::collection::vec(-4i32..=4, n), 0u8..3, -6i32..=12), 1..=5),
        )
            .prop_map(move |(costs, rows)| RandomMip { n_bin, n_cont, costs, rows })
    })
}

fn build(s: &RandomMip) -> MipModel {
    let mut m = MipModel::new();
    let mut vars = Vec::new();
    for k in 0..s.n_bin {
        vars.push(m.add_binary(f64::from(s.costs[k])));
    }
    for k in 0..s.n_cont {
        vars.push(m.add_var(0.0, 5.0, f64::from(s.costs[s.n_bin + k])));
    }
    for (coeffs, sense, rhs) in &s.rows {
        let sense = [RowSense::Le, RowSense::Ge, RowSense::Eq][*sense as usize];
        let terms = vars.iter().zip(coeffs).map(|(&v, &a)| (v, f64::from(a)));
        m.add_row(terms, sense, f64::from(*rhs), "r");
    }
    m.add_objective_offset(0.5);
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_enumeration(s in random_mip()) {
        let model = build(&s);
        let expected = enumerate(&model);
        let got = branch_and_bound(&model, &tight()).unwrap();
        match expected {
            None => prop_assert_eq!(got.status, SolveStatus::Infeasible),
            Some(best) => {
                prop_assert!(matches!(got.status, SolveStatus::Optimal | SolveStatus::GapReached));
                prop_assert!((got.objective - best).abs() <= 1e-8, "bnb {} vs enumeration {}", got.objective, best);
                let (viol, _) = model.max_violation(&got.assignment);
                prop_assert!(viol <= 1e-7);
                for b in model.binaries() {
                    let v = got.assignment[b.0];
                    prop_assert!(v == 0.0 || v == 1.0);
                }
            }
        }
    }
}

#[test]
fn twelve_binaries_match_enumeration() {
    // assignment-like structure with a fractional relaxation
    let mut m = MipModel::new();
    let x: Vec<VarId> = (0..12).map(|k| m.add_binary(-((k * 7 % 11) as f64) - 1.0)).collect();
    for chunk in x.chunks(3) {
        m.add_row(chunk.iter().map(|&v| (v, 2.0)), RowSense::Le, 3.0, "pick");
    }
    m.add_row(x.iter().enumerate().map(|(k, &v)| (v, 1.0 + (k % 4) as f64)), RowSense::Le, 13.5, "cap");
    let expected = enumerate(&m).unwrap();
    let got = branch_and_bound(&m, &tight()).unwrap();
    assert!((got.objective - expected).abs() <= 1e-8, "{} vs {expected}", got.objective);
}

#[test]
fn repeated_solves_are_identical() {
    let s = RandomMip {
        n_bin: 6,
        n_cont: 2,
        costs: vec![-3, 2, -5, 4, -1, -2, 1, -1],
        rows: vec![
            (vec![2, 3, 1, 4, 2, 1, 1, 0], 0, 7),
            (vec![1, -1, 2, 0, 1, 1, 0, 1], 1, 1),
            (vec![0, 1, 1, 1, 0, 2, -1, 1], 0, 4),
        ],
    };
    let model = build(&s);
    let a = branch_and_bound(&model, &tight()).unwrap();
    let b = branch_and_bound(&model, &tight()).unwrap();
    assert_eq!(a, b);
}
