//! Append-only persistence: `narrative.ndjson` holds every accepted event,
//! `rules.ndjson` every deployed rule. Each batch is fsynced before the call
//! returns.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use ceckd::ec::{EventOccurrence, Tick};
use ceckd::pattern::RuleSpec;
use ceckd::Term;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub patient_id: String,
    #[serde(with = "crate::record::iso_serde")]
    pub timestamp: DateTime<Utc>,
    pub tick: Tick,
    pub event: Term,
}

impl LogEntry {
    pub fn occurrence(&self) -> EventOccurrence {
        EventOccurrence::new(self.event.clone(), self.tick)
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path} line {line}: {source}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
}

pub struct NarrativeLog {
    dir: PathBuf,
    events: File,
    rules: File,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> LogError + '_ {
    move |source| LogError::Io { path: path.to_path_buf(), source }
}

fn open_append(path: &Path) -> Result<File, LogError> {
    OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, LogError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| LogError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

fn append_lines<T: Serialize>(file: &mut File, path: &Path, items: &[T]) -> Result<(), LogError> {
    if items.is_empty() {
        return Ok(());
    }
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, it).expect("log entries serialize");
        buf.push(b'\n');
    }
    file.write_all(&buf).map_err(io_err(path))?;
    file.sync_data().map_err(io_err(path))
}

impl NarrativeLog {
    pub const EVENTS: &'static str = "narrative.ndjson";
    pub const RULES: &'static str = "rules.ndjson";

    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, LogError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(NarrativeLog {
            events: open_append(&dir.join(Self::EVENTS))?,
            rules: open_append(&dir.join(Self::RULES))?,
            dir,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append_events(&mut self, entries: &[LogEntry]) -> Result<(), LogError> {
        append_lines(&mut self.events, &self.dir.join(Self::EVENTS), entries)
    }

    pub fn append_rule(&mut self, spec: &RuleSpec) -> Result<(), LogError> {
        append_lines(&mut self.rules, &self.dir.join(Self::RULES), std::slice::from_ref(spec))
    }

    pub fn read_events(&self) -> Result<Vec<LogEntry>, LogError> {
        read_lines(&self.dir.join(Self::EVENTS))
    }

    pub fn read_rules(&self) -> Result<Vec<RuleSpec>, LogError> {
        read_lines(&self.dir.join(Self::RULES))
    }
}
