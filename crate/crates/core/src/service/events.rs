//! Append-only, line-delimited JSON event log.
//!
//! The first line is a header `{"format": ..., "schema_version": ...}`; every
//! following line is one [`Event`] with a dense sequence number starting at 1.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::chain::{SessionPlan, TrialRecord};
use crate::error::{Error, Result};
use crate::respondent::Choice;

pub const LOG_FORMAT: &str = "deep-mcmcp-events";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub schema_version: u32,
}

impl Default for LogHeader {
    fn default() -> Self {
        LogHeader {
            format: LOG_FORMAT.into(),
            schema_version: SCHEMA_VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventKind {
    ExperimentDefined {
        config: ExperimentConfig,
        chain_seeds: BTreeMap<String, u64>,
    },
    SessionStarted(SessionPlan),
    TrialServed(TrialRecord),
    ChoiceRecorded {
        trial_id: String,
        choice: Choice,
    },
    SessionCompleted {
        session_id: String,
        confirmation_code: String,
    },
    SessionDiscarded {
        session_id: String,
        reason: String,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::ExperimentDefined { .. } => "ExperimentDefined",
            EventKind::SessionStarted(_) => "SessionStarted",
            EventKind::TrialServed(_) => "TrialServed",
            EventKind::ChoiceRecorded { .. } => "ChoiceRecorded",
            EventKind::SessionCompleted { .. } => "SessionCompleted",
            EventKind::SessionDiscarded { .. } => "SessionDiscarded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub timestamp_ms: u64,
    pub event: EventKind,
}

/// The log writer. Events are kept in memory and, when backed by a file,
/// written and flushed before `append` returns.
#[derive(Debug)]
pub struct EventLog {
    events: Vec<Event>,
    file: Option<(PathBuf, BufWriter<File>)>,
}

impl EventLog {
    pub fn in_memory() -> Self {
        EventLog {
            events: Vec::new(),
            file: None,
        }
    }

    /// Creates a new log file; an existing file is an error.
    pub fn create(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().write(true).create_new(true).open(path)?;
        let mut writer = BufWriter::new(file);
        serde_json::to_writer(&mut writer, &LogHeader::default())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        Ok(EventLog {
            events: Vec::new(),
            file: Some((path.to_path_buf(), writer)),
        })
    }

    /// Opens an existing log for appending after validating every record.
    pub fn open(path: &Path) -> Result<Self> {
        let events = read_log(path)?;
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(EventLog {
            events,
            file: Some((path.to_path_buf(), BufWriter::new(file))),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn last_seq(&self) -> u64 {
        self.events.last().map_or(0, |e| e.seq)
    }

    pub fn append(&mut self, timestamp_ms: u64, event: EventKind) -> Result<&Event> {
        let event = Event {
            seq: self.last_seq() + 1,
            timestamp_ms,
            event,
        };
        if let Some((_, writer)) = &mut self.file {
            serde_json::to_writer(&mut *writer, &event)?;
            writer.write_all(b"\n")?;
            writer.flush()?;
        }
        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut writer = BufWriter::new(File::create(path)?);
        write_events(&mut writer, &self.events)?;
        writer.flush()?;
        Ok(())
    }
}

pub fn write_events<W: Write>(mut writer: W, events: &[Event]) -> Result<()> {
    serde_json::to_writer(&mut writer, &LogHeader::default())?;
    writer.write_all(b"\n")?;
    for e in events {
        serde_json::to_writer(&mut writer, e)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_log(path: &Path) -> Result<Vec<Event>> {
    parse_log(BufReader::new(File::open(path)?))
}

/// Parses and checks a log: header first, then sequence numbers 1, 2, 3, ...
/// The first bad line halts parsing with the last valid sequence number.
pub fn parse_log<R: BufRead>(reader: R) -> Result<Vec<Event>> {
    let mut lines = reader.lines();
    let corrupt = |last: Option<u64>, reason: String| Error::CorruptLog {
        last_valid: last,
        reason,
    };
    let header = match lines.next() {
        None => return Ok(Vec::new()),
        Some(line) => line?,
    };
    let header: LogHeader = serde_json::from_str(&header)
        .map_err(|e| corrupt(None, format!("bad header: {e}")))?;
    if header.format != LOG_FORMAT {
        return Err(corrupt(None, format!("unknown format `{}`", header.format)));
    }
    if header.schema_version != SCHEMA_VERSION {
        return Err(corrupt(
            None,
            format!("unsupported schema version {}", header.schema_version),
        ));
    }
    let mut events: Vec<Event> = Vec::new();
    for line in lines {
        let line = line?;
        let last = events.last().map(|e| e.seq);
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line)
            .map_err(|e| corrupt(last, format!("unreadable record: {e}")))?;
        let expected = last.unwrap_or(0) + 1;
        if event.seq != expected {
            return Err(corrupt(
                last,
                format!("expected sequence number {expected}, found {}", event.seq),
            ));
        }
        events.push(event);
    }
    Ok(events)
}
