use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bifree::transforms::fmt_float;
use bifree::{CharTriplet, PlanarMeasure, Term};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// A measure (`{"atoms": …}`) or a triplet (`{"v": …, "A": …}`) file.
pub fn read_term(path: &Path) -> Result<Term, CliError> {
    let value: serde_json::Value = read_json(path)?;
    let schema = |e: serde_json::Error| CliError::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    if value.get("atoms").is_some() {
        Ok(Term::Measure(serde_json::from_value::<PlanarMeasure>(value).map_err(schema)?))
    } else if value.get("v").is_some() {
        Ok(Term::Triplet(serde_json::from_value::<CharTriplet>(value).map_err(schema)?))
    } else {
        Err(CliError::Schema {
            path: path.to_path_buf(),
            message: "expected a measure (\"atoms\") or a triplet (\"v\", \"A\", \"tau\")".into(),
        })
    }
}

/// Creates `path` inside the output directory and hands a buffered writer to `body`.
pub fn write_file(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let io_err = |source| CliError::Io {
        path: path.clone(),
        source,
    };
    let file = File::create(&path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    body(&mut out).and_then(|_| out.flush()).map_err(io_err)?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    write_file(dir, name, |out| writeln!(out, "{text}"))
}

/// CSV with a header row and one row of floats per record.
pub fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf, CliError> {
    write_file(dir, name, |out| {
        writeln!(out, "{}", header.join(","))?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_float(*v)).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    })
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}
