//! Launch-log ingestion.
//!
//! Two encodings of the same three fields are accepted:
//!
//! * CSV with a mandatory header naming `user_id`, `timestamp_ms` and
//!   `app_name` (extra columns are ignored);
//! * JSONL, one object per line with the same keys. Blank lines are skipped.
//!
//! Events are grouped per user (users in lexicographic order) and stably
//! sorted by timestamp, so same-timestamp rows keep their file order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use serde_json::Value;
use thiserror::Error;

use crate::engine::LaunchEvent;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("I/O error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error at line {line}: {reason}")]
    Schema { line: u64, reason: String },
    #[error("parse error at line {line}: {reason}")]
    Parse { line: u64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputFormat {
    #[default]
    Csv,
    Jsonl,
}

impl InputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            InputFormat::Csv => "csv",
            InputFormat::Jsonl => "jsonl",
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(InputFormat::Csv),
            "jsonl" | "ndjson" => Ok(InputFormat::Jsonl),
            other => Err(format!("unknown input format {other:?}")),
        }
    }
}

pub const USER_COLUMN: &str = "user_id";
pub const TIMESTAMP_COLUMN: &str = "timestamp_ms";
pub const APP_COLUMN: &str = "app_name";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UserStream {
    pub user: String,
    pub events: Vec<LaunchEvent>,
}

/// Launch events grouped per user.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventStream {
    pub users: Vec<UserStream>,
}

impl EventStream {
    /// Groups `events` by user and stably sorts each group by timestamp.
    pub fn from_events(events: impl IntoIterator<Item = LaunchEvent>) -> Self {
        let mut grouped: BTreeMap<String, Vec<LaunchEvent>> = BTreeMap::new();
        for e in events {
            grouped.entry(e.user.clone()).or_default().push(e);
        }
        let users = grouped
            .into_iter()
            .map(|(user, mut events)| {
                events.sort_by_key(|e| e.timestamp_ms);
                UserStream { user, events }
            })
            .collect();
        Self { users }
    }

    pub fn is_empty(&self) -> bool {
        self.users.iter().all(|u| u.events.is_empty())
    }

    pub fn event_count(&self) -> usize {
        self.users.iter().map(|u| u.events.len()).sum()
    }

    /// All events, user by user.
    pub fn events(&self) -> impl Iterator<Item = &LaunchEvent> {
        self.users.iter().flat_map(|u| u.events.iter())
    }
}

pub fn parse_events(path: &Path, format: InputFormat) -> Result<EventStream, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_events(file, format)
}

pub fn read_events<R: Read>(reader: R, format: InputFormat) -> Result<EventStream, IngestError> {
    let events = match format {
        InputFormat::Csv => read_csv(reader)?,
        InputFormat::Jsonl => read_jsonl(reader)?,
    };
    Ok(EventStream::from_events(events))
}

fn read_csv<R: Read>(reader: R) -> Result<Vec<LaunchEvent>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::Schema {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::Schema {
                line: 1,
                reason: format!("missing column {name:?}"),
            })
    };
    let (user_col, ts_col, app_col) = (column(USER_COLUMN)?, column(TIMESTAMP_COLUMN)?, column(APP_COLUMN)?);

    let mut events = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| IngestError::Schema {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |idx: usize, name: &str| {
            row.get(idx).ok_or_else(|| IngestError::Schema {
                line,
                reason: format!("missing field {name:?}"),
            })
        };
        let user = field(user_col, USER_COLUMN)?;
        let ts = field(ts_col, TIMESTAMP_COLUMN)?;
        let app = field(app_col, APP_COLUMN)?;
        let timestamp_ms = ts.trim().parse::<u64>().map_err(|e| IngestError::Parse {
            line,
            reason: format!("timestamp {ts:?}: {e}"),
        })?;
        if app.is_empty() {
            return Err(IngestError::Schema {
                line,
                reason: "empty app_name".into(),
            });
        }
        events.push(LaunchEvent::new(user, timestamp_ms, app));
    }
    Ok(events)
}

fn read_jsonl<R: Read>(reader: R) -> Result<Vec<LaunchEvent>, IngestError> {
    let mut events = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i as u64 + 1;
        let text = line.map_err(|e| IngestError::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| IngestError::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| IngestError::Schema {
            line: line_no,
            reason: "expected a JSON object".into(),
        })?;
        let key = |name: &str| {
            obj.get(name).ok_or_else(|| IngestError::Schema {
                line: line_no,
                reason: format!("missing key {name:?}"),
            })
        };
        let as_str = |v: &Value, name: &str| match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) if name == USER_COLUMN => Ok(n.to_string()),
            _ => Err(IngestError::Schema {
                line: line_no,
                reason: format!("{name:?} must be a string"),
            }),
        };
        let user = as_str(key(USER_COLUMN)?, USER_COLUMN)?;
        let app = as_str(key(APP_COLUMN)?, APP_COLUMN)?;
        let ts = key(TIMESTAMP_COLUMN)?;
        let timestamp_ms = match ts {
            Value::Number(n) => n.as_u64(),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        }
        .ok_or_else(|| IngestError::Parse {
            line: line_no,
            reason: format!("timestamp {ts} is not a non-negative integer"),
        })?;
        if app.is_empty() {
            return Err(IngestError::Schema {
                line: line_no,
                reason: "empty app_name".into(),
            });
        }
        events.push(LaunchEvent::new(user, timestamp_ms, app));
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(text: &str) -> Result<EventStream, IngestError> {
        read_events(text.as_bytes(), InputFormat::Csv)
    }

    #[test]
    fn single_user_csv() {
        let s = csv("user_id,timestamp_ms,app_name\nu1,30,maps\nu1,10,mail\nu1,20,camera\n").unwrap();
        assert_eq!(s.users.len(), 1);
        let apps: Vec<_> = s.users[0].events.iter().map(|e| e.app.as_str()).collect();
        assert_eq!(apps, vec!["mail", "camera", "maps"]);
    }

    #[test]
    fn header_only_is_empty() {
        let s = csv("user_id,timestamp_ms,app_name\n").unwrap();
        assert!(s.is_empty());
        assert_eq!(s.event_count(), 0);
    }

    #[test]
    fn column_order_is_free() {
        let s = csv("app_name,user_id,timestamp_ms,extra\nmail,u,5,x\n").unwrap();
        assert_eq!(s.users[0].events[0], LaunchEvent::new("u", 5, "mail"));
    }

    #[test]
    fn missing_column() {
        match csv("user_id,app_name\nu,mail\n") {
            Err(IngestError::Schema { line: 1, reason }) => assert!(reason.contains("timestamp_ms")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_timestamp_reports_line() {
        match csv("user_id,timestamp_ms,app_name\nu,1,a\nu,soon,b\n") {
            Err(IngestError::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            csv("user_id,timestamp_ms,app_name\nu,-4,b\n"),
            Err(IngestError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn short_row_is_schema_error() {
        assert!(matches!(
            csv("user_id,timestamp_ms,app_name\nu,1\n"),
            Err(IngestError::Schema { line: 2, .. })
        ));
    }

    #[test]
    fn jsonl_events() {
        let text = "{\"user_id\":\"b\",\"timestamp_ms\":7,\"app_name\":\"x\"}\n\n\
                    {\"user_id\":\"a\",\"timestamp_ms\":\"3\",\"app_name\":\"y\"}\n";
        let s = read_events(text.as_bytes(), InputFormat::Jsonl).unwrap();
        assert_eq!(s.users.len(), 2);
        assert_eq!(s.users[0].user, "a");
        assert_eq!(s.users[1].events[0], LaunchEvent::new("b", 7, "x"));
    }

    #[test]
    fn jsonl_errors_carry_line_numbers() {
        let missing = "{\"user_id\":\"a\",\"timestamp_ms\":1,\"app_name\":\"x\"}\n{\"user_id\":\"a\",\"app_name\":\"x\"}\n";
        assert!(matches!(
            read_events(missing.as_bytes(), InputFormat::Jsonl),
            Err(IngestError::Schema { line: 2, .. })
        ));
        let bad = "{\"user_id\":\"a\",\"timestamp_ms\":-1,\"app_name\":\"x\"}\n";
        assert!(matches!(
            read_events(bad.as_bytes(), InputFormat::Jsonl),
            Err(IngestError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            read_events("not json\n".as_bytes(), InputFormat::Jsonl),
            Err(IngestError::Parse { line: 1, .. })
        ));
    }
}
