use std::io::{self, Write};

use serde_json::{Map, Value};

use crate::args::Format;

pub const SCHEMA: &str = "dcov/1";

/// Scalar fields plus an optional table of rows.
#[derive(Debug, Default)]
pub struct Report {
    fields: Vec<(String, Value)>,
    table: Option<Table>,
}

#[derive(Debug)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        let mut r = Self::default();
        r.put("schema", SCHEMA);
        r.put("command", command);
        r
    }

    pub fn put(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.fields.push((key.to_string(), value.into()));
        self
    }

    pub fn table(&mut self, table: Table) -> &mut Self {
        self.table = Some(table);
        self
    }

    pub fn to_json(&self) -> Value {
        let mut map: Map<String, Value> = self.fields.iter().cloned().collect();
        if let Some(t) = &self.table {
            let rows = t
                .rows
                .iter()
                .map(|row| Value::Object(t.columns.iter().cloned().zip(row.iter().cloned()).collect()))
                .collect();
            map.insert(t.name.clone(), Value::Array(rows));
        }
        Value::Object(map)
    }

    pub fn write(&self, format: Format, out: &mut impl Write) -> io::Result<()> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, &self.to_json())?;
                writeln!(out)
            }
            Format::Text => self.write_text(out),
            Format::Csv => self.write_csv(out),
        }
    }

    fn write_text(&self, out: &mut impl Write) -> io::Result<()> {
        let width = self.fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &self.fields {
            writeln!(out, "{k:<width$}  {}", cell(v))?;
        }
        if let Some(t) = &self.table {
            writeln!(out)?;
            let cells: Vec<Vec<String>> = t.rows.iter().map(|r| r.iter().map(cell).collect()).collect();
            let widths: Vec<usize> = (0..t.columns.len())
                .map(|j| cells.iter().map(|r| r[j].len()).chain([t.columns[j].len()]).max().unwrap_or(0))
                .collect();
            let line = |items: &[String]| {
                items
                    .iter()
                    .zip(&widths)
                    .map(|(s, w)| format!("{s:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            writeln!(out, "{}", line(&t.columns))?;
            for r in &cells {
                writeln!(out, "{}", line(r))?;
            }
        }
        Ok(())
    }

    /// The table when there is one, otherwise a single row of the fields.
    fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        match &self.table {
            Some(t) => {
                w.write_record(&t.columns)?;
                for r in &t.rows {
                    w.write_record(r.iter().map(cell))?;
                }
            }
            None => {
                let scalar: Vec<&(String, Value)> = self
                    .fields
                    .iter()
                    .filter(|(_, v)| !v.is_array() && !v.is_object())
                    .collect();
                w.write_record(scalar.iter().map(|(k, _)| k))?;
                w.write_record(scalar.iter().map(|(_, v)| cell(v)))?;
            }
        }
        w.flush()
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
