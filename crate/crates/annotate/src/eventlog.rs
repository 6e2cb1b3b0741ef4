//! The append-only event log. The first line is a header; every later line is
//! one event. A line left half-written by a crash is cut off when the log is
//! reopened.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

pub const LOG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub version: u32,
    pub ban_threshold: f64,
    pub lease_timeout_secs: u64,
    pub seed: u64,
    pub targets: Vec<String>,
    pub proxies: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    /// The total number of runs requested so far.
    ControllerStarted { runs: u32 },
    RunStarted { run_id: u32 },
    TaskIssued { task_id: String, run_id: u32, left: String, right: String },
    TaskLeased { task_id: String, worker_id: String, proxy: String, question_id: u8, expires_at: u64 },
    ResponseRecorded {
        task_id: String,
        worker_id: String,
        winner: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shown_left: Option<String>,
        timestamp: u64,
    },
    WorkerBanned { worker_id: String, run_id: u32 },
    RunCompleted { run_id: u32, order: Vec<String> },
}

impl Event {
    pub fn is_lease(&self) -> bool {
        matches!(self, Event::TaskLeased { .. })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "event", rename = "header")]
struct HeaderLine {
    #[serde(flatten)]
    header: LogHeader,
}

pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    /// Opens `path`, creating it with `header` if it does not exist. Returns
    /// the header stored in the file and every complete event.
    pub fn open(path: &Path, header: &LogHeader) -> Result<(Self, LogHeader, Vec<Event>)> {
        if !path.exists() || std::fs::metadata(path)?.len() == 0 {
            let mut file = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
            let mut line = serde_json::to_vec(&HeaderLine { header: header.clone() })?;
            line.push(b'\n');
            file.write_all(&line)?;
            file.sync_all()?;
            drop(file);
            let file = OpenOptions::new().append(true).open(path)?;
            return Ok((Self { path: path.to_path_buf(), file }, header.clone(), Vec::new()));
        }

        let mut file = OpenOptions::new().read(true).write(true).open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        if complete < bytes.len() {
            log::warn!("{}: dropping {} bytes of a torn final line", path.display(), bytes.len() - complete);
            file.set_len(complete as u64)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;

        let mut lines = BufReader::new(&bytes[..complete]).lines();
        let first = lines.next().transpose()?.ok_or(ServiceError::CorruptLog { line: 1, reason: "missing header".into() })?;
        let stored: HeaderLine = serde_json::from_str(&first)
            .map_err(|e| ServiceError::CorruptLog { line: 1, reason: e.to_string() })?;
        if stored.header.version != LOG_VERSION {
            return Err(ServiceError::CorruptLog {
                line: 1,
                reason: format!("unsupported log version {}", stored.header.version),
            });
        }
        let mut events = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let ev: Event =
                serde_json::from_str(&line).map_err(|e| ServiceError::CorruptLog { line: i + 2, reason: e.to_string() })?;
            events.push(ev);
        }
        Ok((Self { path: path.to_path_buf(), file }, stored.header, events))
    }

    /// Appends and syncs. Nothing may be acknowledged before this returns.
    pub fn append(&mut self, events: &[Event]) -> Result<()> {
        if events.is_empty() {
            return Ok(());
        }
        let mut buf = Vec::new();
        for ev in events {
            serde_json::to_writer(&mut buf, ev)?;
            buf.push(b'\n');
        }
        self.file.write_all(&buf)?;
        self.file.sync_data()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Reads every event of a log without opening it for writing.
pub fn read_log(path: &Path) -> Result<(LogHeader, Vec<Event>)> {
    let text = std::fs::read_to_string(path)?;
    let complete = text.rfind('\n').map_or(0, |p| p + 1);
    let mut lines = text[..complete].lines();
    let first = lines.next().ok_or(ServiceError::CorruptLog { line: 1, reason: "missing header".into() })?;
    let header: HeaderLine =
        serde_json::from_str(first).map_err(|e| ServiceError::CorruptLog { line: 1, reason: e.to_string() })?;
    let events = lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| ServiceError::CorruptLog { line: i + 2, reason: e.to_string() }))
        .collect::<Result<_>>()?;
    Ok((header.header, events))
}
