//! Bench CSV files. Columns, in order:
//!
//! `event_index,update_ns,update_ns_sd,query_ns,query_ns_sd,visits,mvis,structure_bytes`
//!
//! One row per sample (every 100 events and at the last event); latencies are
//! means over repeats with their standard deviations.

use std::path::Path;

use crate::harness::{BenchError, BenchRow};

pub const COLUMNS: [&str; 8] = [
    "event_index",
    "update_ns",
    "update_ns_sd",
    "query_ns",
    "query_ns_sd",
    "visits",
    "mvis",
    "structure_bytes",
];

fn output_err(path: &Path) -> impl Fn(csv::Error) -> BenchError + '_ {
    move |source| BenchError::Output {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_rows(path: &Path, rows: &[BenchRow]) -> Result<(), BenchError> {
    let err = output_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    for r in rows {
        w.serialize(r).map_err(&err)?;
    }
    w.flush().map_err(|e| err(e.into()))
}

pub fn read_rows(path: &Path) -> Result<Vec<BenchRow>, BenchError> {
    let err = output_err(path);
    let mut r = csv::Reader::from_path(path).map_err(&err)?;
    r.deserialize().collect::<Result<Vec<_>, _>>().map_err(&err)
}
