//! Small delimited-text formats shared by the CLI and harness.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Parse a two-column `u64` CSV with the given header, skipping blank lines
/// and `#` comments. Returns (first, second) pairs in file order.
fn read_pairs(path: &Path, header: &str) -> Result<Vec<(u64, u64)>> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != header {
                return Err(Error::parse(
                    &display,
                    lineno,
                    format!("expected header '{header}'"),
                ));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                &display,
                lineno,
                format!("expected 2 fields, found {}", fields.len()),
            ));
        }
        let a = fields[0].parse::<u64>().map_err(|_| {
            Error::parse(&display, lineno, format!("invalid value '{}'", fields[0]))
        })?;
        let b = fields[1].parse::<u64>().map_err(|_| {
            Error::parse(&display, lineno, format!("invalid value '{}'", fields[1]))
        })?;
        rows.push((a, b));
    }
    if !header_seen {
        return Err(Error::parse(
            &display,
            1,
            format!("missing header '{header}'"),
        ));
    }
    Ok(rows)
}

/// Read a capacities file (`node_id,capacity`) into a dense vector indexed
/// by node id. Ids must form 0..n without duplicates.
pub fn read_capacities(path: impl AsRef<Path>) -> Result<Vec<u64>> {
    let path = path.as_ref();
    let rows = read_pairs(path, "node_id,capacity")?;
    dense_by_id(rows, "capacity", &path.display().to_string())
}

/// Read a levels file (`node_id,level`) into a dense vector indexed by
/// node id. Ids must form 0..n without duplicates.
pub fn read_levels(path: impl AsRef<Path>) -> Result<Vec<u64>> {
    let path = path.as_ref();
    let rows = read_pairs(path, "node_id,level")?;
    dense_by_id(rows, "level", &path.display().to_string())
}

fn dense_by_id(rows: Vec<(u64, u64)>, what: &str, display: &str) -> Result<Vec<u64>> {
    let n = rows.len();
    let mut values = vec![None; n];
    for (id, value) in rows {
        let idx = id as usize;
        if idx >= n {
            return Err(Error::data(format!(
                "{display}: node ids must form 0..{n}, found {id}"
            )));
        }
        if values[idx].replace(value).is_some() {
            return Err(Error::data(format!(
                "{display}: duplicate {what} for node {id}"
            )));
        }
    }
    Ok(values.into_iter().map(|v| v.unwrap()).collect())
}

pub fn write_capacities(path: impl AsRef<Path>, capacities: &[u64]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("node_id,capacity\n");
    for (id, c) in capacities.iter().enumerate() {
        let _ = writeln!(out, "{id},{c}");
    }
    fs::write(path, out).map_err(|e| Error::io(&path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("codiff-fileio-test");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn capacities_round_trip() {
        let path = tmp("caps.csv");
        write_capacities(&path, &[10, 20, 30]).unwrap();
        assert_eq!(read_capacities(&path).unwrap(), vec![10, 20, 30]);
    }

    #[test]
    fn rejects_bad_header_and_ids() {
        let path = tmp("bad_header.csv");
        std::fs::write(&path, "id,capacity\n0,5\n").unwrap();
        assert!(read_capacities(&path).is_err());

        let path = tmp("bad_ids.csv");
        std::fs::write(&path, "node_id,capacity\n0,5\n2,5\n").unwrap();
        assert!(read_capacities(&path).is_err());

        let path = tmp("dup_ids.csv");
        std::fs::write(&path, "node_id,capacity\n0,5\n0,6\n").unwrap();
        assert!(read_capacities(&path).is_err());
    }
}
