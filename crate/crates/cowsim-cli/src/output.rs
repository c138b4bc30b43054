//! Result tables and their CSV/JSON serialisation.
//!
//! Column order is fixed per subcommand. Floats are written with 17
//! significant digits so they round-trip exactly; undefined metrics are
//! empty CSV cells and JSON nulls; infinities serialise as the string
//! "inf".

use crate::config::ScenarioFile;
use anyhow::{bail, Result};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Str(String),
    Missing,
}

impl Cell {
    pub fn opt(x: Option<f64>) -> Cell {
        x.map_or(Cell::Missing, Cell::Float)
    }
}

pub fn format_float(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// A non-finite intermediate that is not a legitimate infinity is a
    /// numeric failure, reported separately from validation errors.
    pub fn check_numeric(&self) -> Result<()> {
        for row in &self.rows {
            for (cell, col) in row.iter().zip(&self.columns) {
                if let Cell::Float(x) = cell {
                    if x.is_nan() {
                        bail!("non-finite value in column '{col}'");
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .map(|cell| match cell {
                    Cell::Float(x) => format_float(*x),
                    Cell::Int(i) => i.to_string(),
                    Cell::Str(s) => s.clone(),
                    Cell::Missing => String::new(),
                })
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self, command: &str, scenario: &ScenarioFile) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = serde_json::Map::new();
                for (col, cell) in self.columns.iter().zip(row) {
                    let v = match cell {
                        Cell::Float(x) if x.is_infinite() => {
                            Value::String(format_float(*x))
                        }
                        Cell::Float(x) => serde_json::Number::from_f64(*x)
                            .map(Value::Number)
                            .unwrap_or(Value::Null),
                        Cell::Int(i) => json!(i),
                        Cell::Str(s) => Value::String(s.clone()),
                        Cell::Missing => Value::Null,
                    };
                    obj.insert((*col).to_string(), v);
                }
                Value::Object(obj)
            })
            .collect();
        json!({
            "command": command,
            "scenario": scenario,
            "columns": self.columns,
            "rows": rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for &x in &[0.1, 1.0 - (-0.1f64).exp(), 1e-300, 123456.789] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_uses_empty_cells_for_missing() {
        let mut t = Table::new(vec!["a", "b", "c"]);
        t.push(vec![Cell::Float(1.0), Cell::Missing, Cell::Int(3)]);
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "a,b,c");
        let row = lines.next().unwrap();
        assert!(row.starts_with("1.0000000000000000e0,,3"), "{row}");
    }

    #[test]
    fn nan_is_a_numeric_failure() {
        let mut t = Table::new(vec!["a"]);
        t.push(vec![Cell::Float(f64::NAN)]);
        assert!(t.check_numeric().is_err());
        let mut t = Table::new(vec!["a"]);
        t.push(vec![Cell::Float(f64::INFINITY)]);
        assert!(t.check_numeric().is_ok());
    }
}
