use crate::{Failure, Format};
use serde::Serialize;
use std::io::Write;
use std::path::Path;

fn io(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("cannot write output: {e}"))
}

pub fn write_csv<T: Serialize>(w: impl Write, rows: &[T]) -> Result<(), Failure> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_json<T: Serialize>(mut w: impl Write, value: &T) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut w, value).map_err(io)?;
    writeln!(w).map_err(io)
}

pub fn csv_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Failure> {
    let f = std::fs::File::create(path).map_err(|e| io(format!("{}: {e}", path.display())))?;
    write_csv(std::io::BufWriter::new(f), rows)
}

pub fn json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let f = std::fs::File::create(path).map_err(|e| io(format!("{}: {e}", path.display())))?;
    write_json(std::io::BufWriter::new(f), value)
}

/// Rows as CSV, or the full report as JSON, on stdout.
pub fn emit<R: Serialize, J: Serialize>(format: Format, rows: &[R], report: &J) -> Result<(), Failure> {
    let stdout = std::io::stdout().lock();
    match format {
        Format::Csv => write_csv(stdout, rows),
        Format::Json => write_json(stdout, report),
    }
}

/// One-line JSON note on stderr; used for verdicts next to CSV data.
pub fn note<T: Serialize>(value: &T) {
    if let Ok(s) = serde_json::to_string(value) {
        eprintln!("{s}");
    }
}
