//! Line-delimited JSON persistence for the pipeline's record types.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::Record;

/// Streams records from a JSONL file without validating them.
pub fn iter_jsonl<T: DeserializeOwned>(
    path: impl AsRef<Path>,
) -> Result<impl Iterator<Item = Result<T>>> {
    let path = path.as_ref().to_path_buf();
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let reader = BufReader::new(file);
    Ok(reader
        .lines()
        .enumerate()
        .filter_map(move |(idx, line)| {
            let line_no = idx + 1;
            match line {
                Err(e) => Some(Err(Error::io(&path, e))),
                Ok(l) if l.trim().is_empty() => None,
                Ok(l) => Some(serde_json::from_str::<T>(&l).map_err(|e| Error::Parse {
                    path: path.clone(),
                    line: line_no,
                    message: e.to_string(),
                })),
            }
        }))
}

/// Reads every record, checking each record's invariants and key uniqueness.
pub fn read_jsonl<T>(path: impl AsRef<Path>) -> Result<Vec<T>>
where
    T: DeserializeOwned + Record,
{
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in iter_jsonl::<T>(path)? {
        let rec = rec?;
        rec.check()?;
        if !seen.insert(rec.key().to_string()) {
            return Err(Error::invariant(rec.key(), "duplicate id within file"));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Writes one compact JSON object per line.
pub fn write_jsonl<'a, T, I>(path: impl AsRef<Path>, records: I) -> Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, rec)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
