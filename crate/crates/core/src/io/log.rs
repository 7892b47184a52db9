//! Trial logs: JSON lines (canonical) and CSV, same columns in the same order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::experiment::TrialRecord;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot tell log format of {0} (expected .jsonl or .csv)")]
    UnknownFormat(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Jsonl,
    Csv,
}

impl LogFormat {
    pub fn from_path(path: &Path) -> Result<Self, LogError> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("jsonl" | "ndjson" | "json") => Ok(LogFormat::Jsonl),
            Some("csv") => Ok(LogFormat::Csv),
            _ => Err(LogError::UnknownFormat(path.to_path_buf())),
        }
    }
}

/// One JSON object per line, fields in schema order, `\n` line endings.
pub fn write_log<W: Write>(mut w: W, records: &[TrialRecord]) -> Result<(), LogError> {
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// The canonical byte form of a log.
pub fn canonical_log(records: &[TrialRecord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(records.len() * 200);
    write_log(&mut out, records).expect("writing to memory");
    out
}

/// Parses a JSON-lines log. Blank lines are skipped; anything else that is
/// not a complete record fails with its 1-based line number.
pub fn read_log<R: BufRead>(r: R) -> Result<Vec<TrialRecord>, LogError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| LogError::Parse { line: i + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_csv<W: Write>(w: W, records: &[TrialRecord]) -> Result<(), LogError> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(TrialRecord::COLUMNS)?;
    for r in records {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<TrialRecord>, LogError> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rd.deserialize().enumerate() {
        // line 1 is the header
        out.push(rec.map_err(|e: csv::Error| LogError::Parse { line: i + 2, message: e.to_string() })?);
    }
    Ok(out)
}

pub fn read_log_file(path: &Path) -> Result<Vec<TrialRecord>, LogError> {
    let format = LogFormat::from_path(path)?;
    let f = BufReader::new(File::open(path)?);
    match format {
        LogFormat::Jsonl => read_log(f),
        LogFormat::Csv => read_csv(f),
    }
}

pub fn write_log_file(path: &Path, records: &[TrialRecord]) -> Result<(), LogError> {
    let format = LogFormat::from_path(path)?;
    let f = BufWriter::new(File::create(path)?);
    match format {
        LogFormat::Jsonl => write_log(f, records),
        LogFormat::Csv => write_csv(f, records),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::Method;

    fn rec(trial: usize) -> TrialRecord {
        TrialRecord {
            method: Method::ZM,
            block: 1,
            trial,
            direction: 3,
            distance: 0.1234567890123,
            width: 0.0137,
            id_value: 3.3,
            id_category: 3,
            movement_time: 0.1 + 0.2,
            misses: 1,
            hit: true,
            seed: u64::MAX,
            subject: 7,
        }
    }

    #[test]
    fn empty_round_trip() {
        let bytes = canonical_log(&[]);
        assert!(bytes.is_empty());
        assert!(read_log(&bytes[..]).unwrap().is_empty());
    }

    #[test]
    fn field_order_is_schema_order() {
        let line = String::from_utf8(canonical_log(&[rec(0)])).unwrap();
        let keys: Vec<_> = TrialRecord::COLUMNS.iter().map(|c| line.find(&format!("\"{c}\"")).unwrap()).collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]), "{line}");
    }

    #[test]
    fn truncated_line_names_its_number() {
        let mut bytes = canonical_log(&[rec(0), rec(1), rec(2)]);
        bytes.truncate(bytes.len() - 20);
        match read_log(&bytes[..]) {
            Err(LogError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let rs: Vec<_> = (0..5).map(rec).collect();
        let mut buf = Vec::new();
        write_csv(&mut buf, &rs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("method,block,trial,dir,D_m,W_m,id,id_cat,mt_s,misses,hit,seed,subject\n"));
        assert_eq!(read_csv(&buf[..]).unwrap(), rs);
    }
}
