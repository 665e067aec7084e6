use std::io::{self, Write};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// Writes `report` to stdout in the requested format. CSV uses the column
/// names of the first row as the header; text calls `text`.
pub fn emit<T: Serialize>(
    format: Format,
    report: &T,
    rows: &[Vec<(&str, String)>],
    text: impl FnOnce() -> String,
) -> Result<(), Box<dyn std::error::Error>> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, report)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            if let Some(first) = rows.first() {
                w.write_record(first.iter().map(|(k, _)| *k))?;
            }
            for row in rows {
                w.write_record(row.iter().map(|(_, v)| v.as_str()))?;
            }
            w.flush()?;
        }
        Format::Text => writeln!(out, "{}", text())?,
    }
    Ok(())
}

/// Right-aligned fixed-width table.
pub fn text_table(rows: &[Vec<(&str, String)>]) -> String {
    let Some(first) = rows.first() else {
        return String::new();
    };
    let mut widths: Vec<usize> = first.iter().map(|(k, _)| k.len()).collect();
    for row in rows {
        for (w, (_, v)) in widths.iter_mut().zip(row) {
            *w = (*w).max(v.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut s = line(first.iter().map(|(k, _)| *k).collect());
    for row in rows {
        s.push('\n');
        s.push_str(&line(row.iter().map(|(_, v)| v.as_str()).collect()));
    }
    s
}
