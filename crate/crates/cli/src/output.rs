//! Artifact writers and readers: long-format CSV maps, the trajectory
//! table, and summary.json.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use sgsim_core::core_model::{Grid, ScalarMap};

use crate::CliError;

/// Write a map as `x,z,value` rows, x-major, one header line. Values use
/// the shortest round-trip float formatting, so identical runs produce
/// byte-identical files.
pub fn write_map(path: &Path, map: &ScalarMap) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    (|| -> std::io::Result<()> {
        writeln!(w, "x,z,value")?;
        let grid = map.grid;
        for i in 0..grid.points {
            let x = grid.coord(i);
            for j in 0..grid.points {
                writeln!(w, "{},{},{}", x, grid.coord(j), map.values[(i, j)])?;
            }
        }
        w.flush()
    })()
    .map_err(|e| io_err(path, e))
}

/// Read a map written by [`write_map`] and check it against the expected
/// grid geometry.
pub fn read_map(path: &Path, expected: Grid) -> Result<ScalarMap, CliError> {
    let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(header)) if header.trim() == "x,z,value" => {}
        _ => {
            return Err(CliError::Config(format!(
                "{}: expected an `x,z,value` CSV header",
                path.display()
            )))
        }
    }
    let mut map = ScalarMap::zeros(expected);
    let mut count = 0usize;
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let parse = |f: Option<&str>| -> Result<f64, CliError> {
            f.and_then(|v| v.trim().parse::<f64>().ok()).ok_or_else(|| {
                CliError::Config(format!("{}: bad row at line {}", path.display(), lineno + 2))
            })
        };
        let x = parse(fields.next())?;
        let z = parse(fields.next())?;
        let value = parse(fields.next())?;
        let locate = |coord: f64| -> Result<usize, CliError> {
            let idx = ((coord + expected.extent) / expected.dx()).round();
            let i = idx as usize;
            if idx >= 0.0
                && i < expected.points
                && (expected.coord(i) - coord).abs() <= 1e-9 * expected.extent.max(1.0)
            {
                Ok(i)
            } else {
                Err(CliError::Config(format!(
                    "{}: coordinate {} at line {} is not on the expected grid \
                     (extent {}, {} points)",
                    path.display(),
                    coord,
                    lineno + 2,
                    expected.extent,
                    expected.points
                )))
            }
        };
        map.values[(locate(x)?, locate(z)?)] = value;
        count += 1;
    }
    if count != expected.points * expected.points {
        return Err(CliError::Config(format!(
            "{}: {} rows, expected {} for the basis grid",
            path.display(),
            count,
            expected.points * expected.points
        )));
    }
    Ok(map)
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("summary serialisation failed: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
