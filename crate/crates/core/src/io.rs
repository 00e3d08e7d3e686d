//! Dataset and JSON file I/O.
//!
//! Datasets are stored either as CSV (one row per point, no header) or in a
//! little-endian binary layout:
//!
//! ```text
//! magic "CSKD" | version u32 = 1 | N u64 | d u32 | N*d f64, row-major
//! ```
//!
//! The format is picked from the file extension: `.csv` is text, anything else
//! is binary.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"CSKD";
pub const BINARY_VERSION: u32 = 1;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    if is_csv(path) {
        load_csv(path)
    } else {
        load_binary(path)
    }
}

pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    if is_csv(path) {
        save_csv(data, path)
    } else {
        save_binary(data, path)
    }
}

pub fn save_csv(data: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for row in data.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(",")).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut values = Vec::new();
    let mut d = None;
    let mut n = 0;
    for record in reader.records() {
        let record = record.map_err(|e| format_err(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match d {
            None => d = Some(record.len()),
            Some(d) if d != record.len() => {
                return Err(Error::Csv {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("expected {d} columns, found {}", record.len()),
                })
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Csv {
                path: path.to_path_buf(),
                line,
                msg: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("non-finite value {field:?}"),
                });
            }
            values.push(v);
        }
        n += 1;
    }
    let d = d.ok_or_else(|| format_err(path, "no rows"))?;
    Dataset::new(n, d, values)
}

pub fn save_binary(data: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(io_err(path));
    put(BINARY_MAGIC)?;
    put(&BINARY_VERSION.to_le_bytes())?;
    put(&(data.len() as u64).to_le_bytes())?;
    put(&(data.dim() as u32).to_le_bytes())?;
    for v in data.as_slice() {
        put(&v.to_le_bytes())?;
    }
    w.flush().map_err(io_err(path))
}

pub fn load_binary(path: &Path) -> Result<Dataset> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    const HEADER: usize = 4 + 4 + 8 + 4;
    if bytes.len() < HEADER {
        return Err(format_err(path, "truncated header"));
    }
    if &bytes[..4] != BINARY_MAGIC {
        return Err(format_err(path, "bad magic, expected \"CSKD\""));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != BINARY_VERSION {
        return Err(format_err(path, format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| format_err(path, "header size overflow"))?;
    let body = &bytes[HEADER..];
    if body.len() != expected {
        return Err(format_err(
            path,
            format!("expected {expected} payload bytes for {n}x{d}, found {}", body.len()),
        ));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Dataset::new(n, d, values).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| format_err(path, e.to_string()))
}

/// Writes one label per line next to a generated dataset.
pub fn save_labels(labels: &[usize], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for l in labels {
        writeln!(w, "{l}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}
