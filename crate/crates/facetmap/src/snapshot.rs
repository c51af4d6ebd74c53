//! Line-delimited snapshot files.
//!
//! Line 1 is a header `{"format_version":1,"id":..,"bbox":{..},"created":..}`,
//! every following line one item
//! `{"id":..,"category":..,"geom":{"type":"point"|"polygon","coords":..},"facets":{..}}`.

use std::collections::HashSet;
use std::io::{self, BufRead, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use facetmap_core::{BoundingBox, GeoItem};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingestion::DatasetSnapshot;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn corrupt(line: usize, message: impl ToString) -> SnapshotError {
    SnapshotError::Corrupt {
        line,
        message: message.to_string(),
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    id: String,
    bbox: BoundingBox,
    created: DateTime<Utc>,
}

pub fn write_snapshot<W: Write>(snapshot: &DatasetSnapshot, mut out: W) -> io::Result<()> {
    let header = Header {
        format_version: FORMAT_VERSION,
        id: snapshot.id.clone(),
        bbox: snapshot.bbox,
        created: snapshot.created,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for item in &snapshot.items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn snapshot_to_bytes(snapshot: &DatasetSnapshot) -> Vec<u8> {
    let mut buf = Vec::new();
    write_snapshot(snapshot, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

/// Reads a snapshot, checking the header, every item, id uniqueness and
/// that each item lies inside the snapshot box.
pub fn read_snapshot<R: BufRead>(input: R) -> Result<DatasetSnapshot, SnapshotError> {
    let mut lines = input.lines();
    let header_line = lines.next().ok_or_else(|| corrupt(1, "missing header"))??;
    let header: Header = serde_json::from_str(&header_line).map_err(|e| corrupt(1, e))?;
    if header.format_version != FORMAT_VERSION {
        return Err(corrupt(
            1,
            format!("unsupported format_version {}", header.format_version),
        ));
    }
    let mut items = Vec::new();
    let mut ids = HashSet::new();
    for (index, line) in lines.enumerate() {
        let number = index + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: GeoItem = serde_json::from_str(&line).map_err(|e| corrupt(number, e))?;
        if !header.bbox.contains(item.representative_point()) {
            return Err(corrupt(
                number,
                format!("item {} lies outside the snapshot box", item.id),
            ));
        }
        if !ids.insert(item.id.clone()) {
            return Err(corrupt(number, format!("duplicate item id {}", item.id)));
        }
        items.push(item);
    }
    Ok(DatasetSnapshot {
        id: header.id,
        bbox: header.bbox,
        created: header.created,
        items,
    })
}

pub fn snapshot_from_bytes(bytes: &[u8]) -> Result<DatasetSnapshot, SnapshotError> {
    read_snapshot(bytes)
}

pub fn save_snapshot(snapshot: &DatasetSnapshot, path: &Path) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_snapshot(snapshot, io::BufWriter::new(file))
}

pub fn load_snapshot(path: &Path) -> Result<DatasetSnapshot, SnapshotError> {
    let file = std::fs::File::open(path)?;
    read_snapshot(io::BufReader::new(file))
}
