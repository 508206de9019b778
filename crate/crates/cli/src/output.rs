use std::path::{Path, PathBuf};

use serde_json::{Number, Value};

use qbound::Real;

use crate::error::CliResult;

/// Round-trip decimal text; empty for absent values.
pub fn cell(x: Option<&Real>) -> String {
    x.map(Real::to_decimal).unwrap_or_default()
}

/// JSON number carrying every round-trip digit, or null.
pub fn number(x: Option<&Real>) -> Value {
    match x {
        Some(r) if r.is_finite() => r
            .to_decimal()
            .parse::<Number>()
            .map(Value::Number)
            .unwrap_or(Value::Null),
        _ => Value::Null,
    }
}

pub fn float(x: f64) -> Value {
    Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<PathBuf> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

pub fn write_json(path: &Path, value: &Value) -> CliResult<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(path.to_path_buf())
}
