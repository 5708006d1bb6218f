//! `step,<value>` column files shared by the wholesale and net-load inputs.

use std::io::{Read, Write};

pub(crate) fn read_step_column(reader: impl Read, column: &str) -> Result<Vec<f64>, String> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    if headers.len() != 2 || &headers[0] != "step" || &headers[1] != column {
        return Err(format!("expected header `step,{column}`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")));
    }
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let step: usize = rec[0].parse().map_err(|_| format!("line {}: bad step `{}`", i + 2, &rec[0]))?;
        if step != i {
            return Err(format!("line {}: expected step {i}, found {step}", i + 2));
        }
        let v: f64 = rec[1].parse().map_err(|_| format!("line {}: bad value `{}`", i + 2, &rec[1]))?;
        if !v.is_finite() {
            return Err(format!("line {}: non-finite value", i + 2));
        }
        values.push(v);
    }
    Ok(values)
}

pub(crate) fn write_step_column(mut writer: impl Write, column: &str, values: &[f64]) -> std::io::Result<()> {
    writeln!(writer, "step,{column}")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(writer, "{i},{v}")?;
    }
    Ok(())
}
