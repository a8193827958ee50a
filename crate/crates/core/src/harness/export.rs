//! CSV and JSON-lines output.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::ResultRow;

pub const CSV_HEADER: &str = "sweep_value,trial,algorithm,iterations,wsee_bits_per_hz_per_joule,overhead_scalars,wallclock_ms,converged";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            _ => Err(format!("unknown format '{s}' (expected csv or jsonl)")),
        }
    }
}

#[derive(Debug, Error)]
#[error("cannot write {path}: {source}")]
pub struct ExportError {
    pub path: String,
    #[source]
    pub source: io::Error,
}

/// 17 significant digits: enough to round-trip any `f64`.
fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(rows: &[ResultRow], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            float(r.sweep_value),
            r.trial,
            r.algorithm,
            r.iterations,
            float(r.wsee_bits_per_hz_per_joule),
            r.overhead_scalars,
            float(r.wallclock_ms),
            r.converged
        )?;
    }
    Ok(())
}

pub fn write_jsonl(rows: &[ResultRow], out: &mut impl Write) -> io::Result<()> {
    for r in rows {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes `rows` to `path` (`-` for stdout).
pub fn export(rows: &[ResultRow], format: Format, path: &Path) -> Result<(), ExportError> {
    let wrap = |source| ExportError {
        path: path.display().to_string(),
        source,
    };
    let write = |out: &mut dyn Write| -> io::Result<()> {
        let mut out = BufWriter::new(out);
        match format {
            Format::Csv => write_csv(rows, &mut out)?,
            Format::Jsonl => write_jsonl(rows, &mut out)?,
        }
        out.flush()
    };
    if path.as_os_str() == "-" {
        write(&mut io::stdout().lock()).map_err(wrap)
    } else {
        let mut file = File::create(path).map_err(wrap)?;
        write(&mut file).map_err(wrap)
    }
}
