//! File helpers: JSON and CSV with exact doubles, SHA-256 digests.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes`, creating parent directories, and returns their digest.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(bytes))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("values serialize to JSON");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String> {
    write_bytes(path, to_json(value).as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// The `value` column of a CSV with a header row, or its only column.
pub fn parse_data_csv(text: &str) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| CliError::config(format!("data CSV header: {e}")))?.clone();
    let column = match headers.iter().position(|h| h.trim() == "value") {
        Some(i) => i,
        None if headers.len() == 1 => 0,
        None => return Err(CliError::config("data CSV needs a `value` column")),
    };
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::config(format!("data CSV: {e}")))?;
        let field = record.get(column).unwrap_or("").trim();
        let v: f64 = field
            .parse()
            .map_err(|_| CliError::config(format!("data CSV row {}: {field:?} is not a number", line + 2)))?;
        values.push(v);
    }
    Ok(values)
}

pub fn read_data_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_data_csv(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// CSV with an `iteration` column followed by one column per named trace.
/// Shorter traces leave empty cells. Doubles use the shortest
/// representation that parses back to the same value.
pub fn traces_csv(columns: &[(String, Vec<f64>)]) -> String {
    let len = columns.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let mut out = String::from("iteration");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..len {
        out.push_str(&(i + 1).to_string());
        for (_, v) in columns {
            out.push(',');
            if let Some(x) = v.get(i) {
                out.push_str(&format!("{x:?}"));
            }
        }
        out.push('\n');
    }
    out
}
