use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use chrono::DateTime;

use crate::error::{Error, Result};

/// One click: which session, when (epoch milliseconds), which item.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub session_id: String,
    pub timestamp: i64,
    pub item_id: String,
}

#[derive(Clone, Debug)]
pub struct IngestOptions {
    pub delimiter: u8,
    pub has_header: bool,
    pub session_col: usize,
    pub time_col: usize,
    pub item_col: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            delimiter: b',',
            has_header: false,
            session_col: 0,
            time_col: 1,
            item_col: 2,
        }
    }
}

/// Accepts integer epoch milliseconds or an RFC 3339 timestamp such as
/// `2014-04-07T10:51:09.277Z`.
fn parse_timestamp(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(ms) = raw.parse::<i64>() {
        return Some(ms);
    }
    DateTime::parse_from_rfc3339(raw).ok().map(|t| t.timestamp_millis())
}

/// Reads delimiter-separated `(session, timestamp, item)` rows. Events come
/// back grouped by session (in order of first appearance) and sorted by
/// time within a session, ties kept in file order.
pub fn ingest(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<Vec<Event>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(opts.has_header)
        .flexible(true)
        .from_reader(file);
    let shown = path.display().to_string();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: shown.clone(),
        line,
        message,
    };

    let mut sessions: Vec<Vec<Event>> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |col: usize, name: &str| -> Result<&str> {
            match record.get(col).map(str::trim) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(parse_err(line, format!("missing {name} (column {col})"))),
            }
        };
        let session_id = field(opts.session_col, "session id")?.to_string();
        let raw_time = field(opts.time_col, "timestamp")?;
        let timestamp = parse_timestamp(raw_time).ok_or_else(|| parse_err(line, format!("bad timestamp `{raw_time}`")))?;
        let item_id = field(opts.item_col, "item id")?.to_string();
        let idx = *slot.entry(session_id.clone()).or_insert_with(|| {
            sessions.push(Vec::new());
            sessions.len() - 1
        });
        sessions[idx].push(Event {
            session_id,
            timestamp,
            item_id,
        });
    }
    if sessions.is_empty() {
        return Err(Error::Ingest(format!("{shown}: no events")));
    }
    Ok(sessions
        .into_iter()
        .flat_map(|mut s| {
            s.sort_by_key(|e| e.timestamp);
            s
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn sorts_one_session_by_time() {
        let f = file("s1,30,c\ns1,10,a\ns1,20,b\n");
        let ev = ingest(f.path(), &IngestOptions::default()).unwrap();
        let items: Vec<_> = ev.iter().map(|e| e.item_id.as_str()).collect();
        assert_eq!(items, ["a", "b", "c"]);
    }

    #[test]
    fn groups_interleaved_sessions() {
        let f = file("s1,1,a\ns2,2,x\ns1,3,b\ns2,4,y\n");
        let ev = ingest(f.path(), &IngestOptions::default()).unwrap();
        let got: Vec<_> = ev.iter().map(|e| (e.session_id.as_str(), e.item_id.as_str())).collect();
        assert_eq!(got, [("s1", "a"), ("s1", "b"), ("s2", "x"), ("s2", "y")]);
    }

    #[test]
    fn missing_item_reports_its_line() {
        let f = file("s1,1,a\ns1,2,\ns1,3,c\n");
        match ingest(f.path(), &IngestOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_ingest_error() {
        let f = file("");
        assert!(matches!(ingest(f.path(), &IngestOptions::default()), Err(Error::Ingest(_))));
    }

    #[test]
    fn yoochoose_click_rows() {
        let f = file(
            "1,2014-04-07T10:54:09.868Z,214536500,0\n1,2014-04-07T10:51:09.277Z,214536502,0\n",
        );
        let ev = ingest(f.path(), &IngestOptions::default()).unwrap();
        assert_eq!(ev[0].item_id, "214536502");
        assert_eq!(ev[1].timestamp - ev[0].timestamp, 180_591);
    }

    #[test]
    fn ties_keep_file_order_and_header_is_skipped() {
        let f = file("sid;item;ts\ns;b;5\ns;a;5\n");
        let opts = IngestOptions {
            delimiter: b';',
            has_header: true,
            session_col: 0,
            time_col: 2,
            item_col: 1,
        };
        let ev = ingest(f.path(), &opts).unwrap();
        assert_eq!(ev.iter().map(|e| e.item_id.as_str()).collect::<Vec<_>>(), ["b", "a"]);
    }
}
