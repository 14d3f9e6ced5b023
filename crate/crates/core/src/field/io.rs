use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{GridSpec, VisualField, MAX_DB};
use crate::error::{Error, Result};

/// Reads a field file: one field per line, comma-separated integer
/// thresholds in location-index order. Blank lines and lines starting with
/// `#` are skipped. Row and column numbers in errors are 1-based.
pub fn load_fields(path: impl AsRef<Path>, grid: &GridSpec) -> Result<Vec<VisualField>> {
    parse_fields(File::open(path)?, grid)
}

pub fn parse_fields(reader: impl Read, grid: &GridSpec) -> Result<Vec<VisualField>> {
    let mut fields = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let row = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != grid.len() {
            return Err(Error::Parse {
                row,
                col: cols.len(),
                msg: format!("expected {} values, found {}", grid.len(), cols.len()),
            });
        }
        let mut values = Vec::with_capacity(cols.len());
        for (j, raw) in cols.iter().enumerate() {
            let raw = raw.trim();
            let v: i64 = raw.parse().map_err(|_| Error::Parse {
                row,
                col: j + 1,
                msg: format!("{raw:?} is not an integer"),
            })?;
            if !(0..=MAX_DB as i64).contains(&v) {
                return Err(Error::Parse {
                    row,
                    col: j + 1,
                    msg: format!("{v} outside [0, {MAX_DB}]"),
                });
            }
            values.push(v as u8);
        }
        fields.push(VisualField::new(values, grid)?);
    }
    Ok(fields)
}

pub fn write_fields(path: impl AsRef<Path>, fields: &[VisualField]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for f in fields {
        let line: Vec<String> = f.values().iter().map(u8::to_string).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}
