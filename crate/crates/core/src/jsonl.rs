//! JSONL persistence helpers.
//!
//! Every stage reads and writes newline-delimited JSON. Readers parse the
//! whole file up front so schema problems surface before any work starts,
//! and report the offending line number.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Reads all records from a JSONL file, failing fast on the first bad line.
pub fn read_all<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::Stage {
        stage: "read".into(),
        detail: format!("cannot open {}: {e}", path.display()),
    })?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| Error::Stage {
            stage: "read".into(),
            detail: format!("{}:{}: {e}", path.display(), idx + 1),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Writes records as JSONL, one compact JSON object per line.
pub fn write_all<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Rec {
        id: String,
        n: u32,
    }

    #[test]
    fn round_trips_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("recs.jsonl");
        let recs = vec![
            Rec {
                id: "a".into(),
                n: 1,
            },
            Rec {
                id: "b".into(),
                n: 2,
            },
        ];
        write_all(&path, &recs).unwrap();
        let back: Vec<Rec> = read_all(&path).unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn reports_line_number_of_bad_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("recs.jsonl");
        std::fs::write(&path, "{\"id\":\"a\",\"n\":1}\n{\"id\":\"b\"}\n").unwrap();
        let err = read_all::<Rec>(&path).unwrap_err();
        assert!(err.to_string().contains(":2"), "got: {err}");
    }

    #[test]
    fn skips_blank_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("recs.jsonl");
        std::fs::write(&path, "\n{\"id\":\"a\",\"n\":1}\n\n").unwrap();
        let back: Vec<Rec> = read_all(&path).unwrap();
        assert_eq!(back.len(), 1);
    }
}
