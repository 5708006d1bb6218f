//! Classic LP text format writer.
//!
//! Layout: `Minimize` / `Subject To` / `Bounds` / `Binary` (only when the
//! model has binaries) / `End`. Variables are named `x<id>`, rows
//! `<tag>_<row index>` with characters outside `[A-Za-z0-9_]` replaced by
//! `_`. Numbers use 12 significant digits. Long expressions wrap onto
//! continuation lines that start with a space.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::SolverError;
use crate::model::{MipModel, VarId};

const WRAP_AT: usize = 200;

/// Formats like C's `%.12g`.
pub fn format_g12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let mantissa = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn row_name(tag: &str, index: usize) -> String {
    let clean: String = tag.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
    format!("{clean}_{index}")
}

fn push_terms(out: &mut String, line: &mut String, terms: &[(VarId, f64)]) {
    for (k, &(v, a)) in terms.iter().enumerate() {
        let term = if a < 0.0 {
            format!(" - {} {v}", format_g12(-a))
        } else if k == 0 {
            format!(" {} {v}", format_g12(a))
        } else {
            format!(" + {} {v}", format_g12(a))
        };
        if line.len() + term.len() > WRAP_AT {
            out.push_str(line);
            out.push('\n');
            line.clear();
        }
        line.push_str(&term);
    }
}

/// Renders `model` in LP format. The constant objective offset, which the
/// format cannot carry portably, is recorded as a comment.
pub fn write_lp_string(model: &MipModel) -> String {
    let mut out = String::new();
    if model.objective_offset() != 0.0 {
        let _ = writeln!(out, "\\ objective offset: {}", format_g12(model.objective_offset()));
    }
    out.push_str("Minimize\n");
    let objective: Vec<(VarId, f64)> = model
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.cost != 0.0)
        .map(|(i, v)| (VarId(i), v.cost))
        .collect();
    let mut line = String::from(" obj:");
    push_terms(&mut out, &mut line, &objective);
    out.push_str(&line);
    out.push('\n');

    out.push_str("Subject To\n");
    for (r, row) in model.rows().iter().enumerate() {
        let mut line = format!(" {}:", row_name(&row.tag, r));
        if row.coeffs.is_empty() {
            // keep the row so that dimensions survive a round trip
            line.push_str(" 0 x0");
        }
        push_terms(&mut out, &mut line, &row.coeffs);
        let _ = write!(line, " {} {}", row.sense.symbol(), format_g12(row.rhs));
        out.push_str(&line);
        out.push('\n');
    }

    out.push_str("Bounds\n");
    for (i, v) in model.vars().iter().enumerate() {
        let name = VarId(i);
        let lo = v.lower.is_finite();
        let hi = v.upper.is_finite();
        let _ = match (lo, hi) {
            (true, true) => writeln!(out, " {} <= {name} <= {}", format_g12(v.lower), format_g12(v.upper)),
            (true, false) => writeln!(out, " {name} >= {}", format_g12(v.lower)),
            (false, true) => writeln!(out, " -inf <= {name} <= {}", format_g12(v.upper)),
            (false, false) => writeln!(out, " {name} free"),
        };
    }

    let binaries: Vec<VarId> = model.binaries().collect();
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        let mut line = String::new();
        for b in binaries {
            let name = format!(" {b}");
            if line.len() + name.len() > WRAP_AT {
                out.push_str(&line);
                out.push('\n');
                line.clear();
            }
            line.push_str(&name);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

pub fn export_lp_file(model: &MipModel, path: impl AsRef<Path>) -> Result<(), SolverError> {
    model.validate()?;
    fs::write(path, write_lp_string(model))?;
    Ok(())
}

/// Row/column counts recovered from LP text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpDimensions {
    pub rows: usize,
    pub cols: usize,
    pub binaries: usize,
}

/// Minimal reader used to check that exported files round-trip: counts
/// constraints, distinct variable names, and binary declarations.
pub fn read_lp_dimensions(text: &str) -> Result<LpDimensions, String> {
    #[derive(PartialEq, Clone, Copy)]
    enum Section {
        Preamble,
        Objective,
        Constraints,
        Bounds,
        Binary,
        Done,
    }
    let mut section = Section::Preamble;
    let mut rows = 0;
    let mut names = std::collections::BTreeSet::new();
    let mut binaries = 0;
    for raw in text.lines() {
        let line = raw.split('\\').next().unwrap_or("");
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let header = match trimmed.to_ascii_lowercase().as_str() {
            "minimize" | "minimum" | "min" => Some(Section::Objective),
            "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
            "bounds" => Some(Section::Bounds),
            "binary" | "binaries" | "bin" => Some(Section::Binary),
            "end" => Some(Section::Done),
            _ => None,
        };
        if let Some(h) = header {
            section = h;
            continue;
        }
        let body = match trimmed.split_once(':') {
            Some((_, rest)) => rest,
            None => trimmed,
        };
        match section {
            Section::Preamble | Section::Done => return Err(format!("unexpected line: {trimmed}")),
            Section::Constraints if trimmed.contains(':') => rows += 1,
            _ => {}
        }
        for token in body.split_whitespace() {
            if is_var_name(token) {
                names.insert(token.to_string());
                if section == Section::Binary {
                    binaries += 1;
                }
            }
        }
    }
    if section != Section::Done {
        return Err("missing End".into());
    }
    Ok(LpDimensions { rows, cols: names.len(), binaries })
}

fn is_var_name(token: &str) -> bool {
    let mut chars = token.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && !matches!(token.to_ascii_lowercase().as_str(), "free" | "inf" | "infinity")
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RowSense;

    #[test]
    fn g12_matches_printf() {
        assert_eq!(format_g12(3.0), "3");
        assert_eq!(format_g12(-0.5), "-0.5");
        assert_eq!(format_g12(0.1228), "0.1228");
        assert_eq!(format_g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_g12(123456789012.0), "123456789012");
        assert_eq!(format_g12(1234567890123.0), "1.23456789012e+12");
        assert_eq!(format_g12(0.000012345), "1.2345e-05");
        assert_eq!(format_g12(0.00012345), "0.00012345");
        assert_eq!(format_g12(999999999999.5), "1e+12");
    }

    #[test]
    fn empty_model() {
        assert_eq!(write_lp_string(&MipModel::new()), "Minimize\n obj:\nSubject To\nBounds\nEnd\n");
    }

    #[test]
    fn single_variable_golden() {
        let mut m = MipModel::new();
        let x = m.add_var(0.0, f64::INFINITY, 1.0);
        m.add_row([(x, 1.0)], RowSense::Ge, 3.0, "lo");
        let expected = "Minimize\n obj: 1 x0\nSubject To\n lo_0: 1 x0 >= 3\nBounds\n x0 >= 0\nEnd\n";
        assert_eq!(write_lp_string(&m), expected);
    }

    #[test]
    fn tags_are_sanitized_and_binaries_listed() {
        let mut m = MipModel::new();
        let x = m.add_var(-1.0, 2.5, -2.0);
        let d = m.add_binary(0.0);
        m.add_row([(x, 1.0), (d, -40.0)], RowSense::Le, 0.0, "bigM-link");
        let text = write_lp_string(&m);
        assert!(text.contains(" bigM_link_0: 1 x0 - 40 x1 <= 0\n"));
        assert!(text.contains(" -1 <= x0 <= 2.5\n"));
        assert!(text.contains("Binary\n x1\nEnd\n"));
        let dims = read_lp_dimensions(&text).unwrap();
        assert_eq!(dims, LpDimensions { rows: 1, cols: 2, binaries: 1 });
    }

    #[test]
    fn wrapped_rows_count_once() {
        let mut m = MipModel::new();
        let vars: Vec<_> = (0..200).map(|_| m.add_var(0.0, 1.0, 1.0)).collect();
        m.add_row(vars.iter().map(|&v| (v, 1.5)), RowSense::Eq, 7.0, "eq12");
        m.add_row(vars.iter().take(3).map(|&v| (v, 1.0)), RowSense::Le, 1.0, "eq7b");
        let text = write_lp_string(&m);
        assert!(text.lines().all(|l| l.len() <= WRAP_AT + 40));
        let dims = read_lp_dimensions(&text).unwrap();
        assert_eq!(dims, LpDimensions { rows: 2, cols: 200, binaries: 0 });
    }
}
