//! Marked retweet cascades and their line-delimited JSON encoding.
//!
//! One cascade per line:
//!
//! ```text
//! {"cascade_id":"c1","events":[{"user":"a","t":0,"mark":120},{"user":"b","t":4.5,"mark":3}]}
//! ```
//!
//! Times are seconds relative to the original tweet. Events are stably sorted by
//! time on construction, so ties keep their input order.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single tweet or retweet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub user: String,
    /// Seconds since the original tweet.
    pub t: f64,
    /// Follower count of the poster at posting time.
    pub mark: f64,
}

impl Event {
    pub fn new(user: impl Into<String>, t: f64, mark: f64) -> Self {
        Self { user: user.into(), t, mark }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cascade {
    pub cascade_id: String,
    events: Vec<Event>,
}

#[derive(Deserialize)]
struct RawCascade {
    cascade_id: String,
    events: Vec<Event>,
}

impl Cascade {
    /// Validates and time-orders `events`.
    pub fn new(cascade_id: impl Into<String>, mut events: Vec<Event>) -> Result<Self> {
        let cascade_id = cascade_id.into();
        let invalid = |reason: String| Error::InvalidCascade { cascade_id: cascade_id.clone(), reason };
        if events.is_empty() {
            return Err(invalid("cascade has no events".into()));
        }
        for (i, e) in events.iter().enumerate() {
            if !e.t.is_finite() || e.t < 0.0 {
                return Err(invalid(format!("event {i} has invalid time {}", e.t)));
            }
            if !e.mark.is_finite() || e.mark < 0.0 {
                return Err(invalid(format!("event {i} has invalid mark {}", e.mark)));
            }
        }
        // stable: equal times keep input order
        events.sort_by(|a, b| a.t.total_cmp(&b.t));
        if events[0].t != 0.0 {
            return Err(invalid(format!("first event is at t = {}, expected 0", events[0].t)));
        }
        Ok(Self { cascade_id, events })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("cascade serializes")
    }
}

/// Parses one JSON line into a cascade.
pub fn parse_cascade_line(line: &str) -> std::result::Result<Cascade, String> {
    let raw: RawCascade = serde_json::from_str(line).map_err(|e| e.to_string())?;
    Cascade::new(raw.cascade_id, raw.events).map_err(|e| e.to_string())
}

/// Iterates cascades from a line-delimited reader. Blank lines are skipped;
/// malformed lines yield [`Error::Parse`] carrying the 1-based line number.
pub fn read_cascades<R: BufRead>(reader: R) -> impl Iterator<Item = Result<Cascade>> {
    reader.lines().enumerate().filter_map(|(idx, line)| {
        let line_no = idx + 1;
        match line {
            Err(e) => Some(Err(Error::Io(e))),
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(parse_cascade_line(&l).map_err(|reason| Error::Parse { line: line_no, reason })),
        }
    })
}
