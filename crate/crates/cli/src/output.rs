//! JSON and CSV writers. CSV uses `,` separators, `.` decimals and LF line
//! endings; floats are written in shortest round-trip form.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

/// A CSV table held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, fields: Vec<String>) {
        debug_assert_eq!(fields.len(), self.header.len());
        self.rows.push(fields);
    }

    pub fn to_bytes(&self) -> csv::Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }
}

pub fn write_json<T: Serialize>(doc: &T, out: Option<&Path>) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(doc).map_err(std::io::Error::other)?;
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

pub fn write_csv(table: &Table, path: &Path) -> std::io::Result<()> {
    let bytes = table.to_bytes().map_err(std::io::Error::other)?;
    std::fs::write(path, bytes)
}
