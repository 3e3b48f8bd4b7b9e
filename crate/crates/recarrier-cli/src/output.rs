//! Machine-readable tables: CSV with a header row and 12 significant
//! digits, or one JSON object per row. Row order is fixed by the caller,
//! so identical configs produce byte-identical files.

use std::io::Write;

use crate::config::Format;
use crate::CliError;

#[derive(Clone, Debug)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(&'static str),
    Empty,
}

pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, format: Format, writer: &mut dyn Write) -> Result<(), CliError> {
        match format {
            Format::Csv => self.write_csv(writer),
            Format::Json => self.write_json(writer),
        }
    }

    fn write_csv(&self, writer: &mut dyn Write) -> Result<(), CliError> {
        writeln!(writer, "{}", self.columns.join(",")).map_err(CliError::io)?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(csv_cell).collect();
            writeln!(writer, "{}", line.join(",")).map_err(CliError::io)?;
        }
        Ok(())
    }

    fn write_json(&self, writer: &mut dyn Write) -> Result<(), CliError> {
        for row in &self.rows {
            let mut object = serde_json::Map::new();
            for (column, cell) in self.columns.iter().zip(row) {
                object.insert(column.to_string(), json_cell(cell));
            }
            serde_json::to_writer(&mut *writer, &serde_json::Value::Object(object))
                .map_err(|e| CliError::config(format!("json: {e}")))?;
            writeln!(writer).map_err(CliError::io)?;
        }
        Ok(())
    }
}

fn csv_cell(cell: &Cell) -> String {
    match cell {
        Cell::Int(v) => v.to_string(),
        Cell::Float(v) => format_float(*v),
        Cell::Text(s) => s.to_string(),
        Cell::Empty => String::new(),
    }
}

fn json_cell(cell: &Cell) -> serde_json::Value {
    match cell {
        Cell::Int(v) => serde_json::Value::from(*v),
        Cell::Float(v) => serde_json::Value::from(*v),
        Cell::Text(s) => serde_json::Value::from(*s),
        Cell::Empty => serde_json::Value::Null,
    }
}

/// 12 significant digits, scientific notation.
pub fn format_float(v: f64) -> String {
    format!("{v:.11e}")
}
