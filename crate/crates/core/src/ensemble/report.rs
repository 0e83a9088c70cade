//! JSON-lines alarm records.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::vote::PointReport;
use crate::error::{Error, Result};

pub fn write_jsonl_to<'a>(points: impl IntoIterator<Item = &'a PointReport>, mut w: impl Write) -> std::io::Result<()> {
    for p in points {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_jsonl<'a>(points: impl IntoIterator<Item = &'a PointReport>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl_to(points, BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<PointReport>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: PointReport = serde_json::from_str(&line).map_err(|e| Error::Row {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(p);
    }
    Ok(out)
}
