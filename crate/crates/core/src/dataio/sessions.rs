use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, Provenance};
use crate::catalog::VideoId;
use crate::rating::{Rating, Sample};
use crate::recommender::{RecommendationList, LIST_LEN};
use crate::simulator::{Session, SessionStep, StepAction, MAX_STEPS};

/// First line of every session log.
pub const SESSION_SCHEMA: &str = "qosrec-sessions/v1";

const COLUMNS: [&str; 13] = [
    "session_id",
    "step",
    "region",
    "watched_id",
    "watched_high_qos",
    "rec_ids",
    "rec_high_qos",
    "selected_position",
    "abandoned",
    "int",
    "qos",
    "qor",
    "qoe",
];

#[derive(Debug, Serialize, Deserialize)]
struct LogRow {
    session_id: String,
    step: i64,
    region: String,
    watched_id: u32,
    watched_high_qos: i64,
    rec_ids: String,
    rec_high_qos: String,
    selected_position: Option<i64>,
    abandoned: i64,
    int: i64,
    qos: i64,
    qor: i64,
    qoe: i64,
}

fn join<T: ToString>(items: impl Iterator<Item = T>) -> String {
    items.map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

fn to_row(session: &Session, step: &SessionStep) -> LogRow {
    let r = &step.ratings;
    LogRow {
        session_id: session.session_id.clone(),
        step: i64::from(step.step_index),
        region: session.region.clone(),
        watched_id: step.watched.0,
        watched_high_qos: i64::from(step.watched_high_qos),
        rec_ids: join(step.recs.ids()),
        rec_high_qos: join(step.recs.items().iter().map(|it| u8::from(it.high_qos))),
        selected_position: match step.action {
            StepAction::Selected { position } => Some(i64::from(position)),
            _ => None,
        },
        abandoned: i64::from(step.action == StepAction::Abandoned),
        int: i64::from(r.interest.get()),
        qos: i64::from(r.qos.get()),
        qor: i64::from(r.qor.get()),
        qoe: i64::from(r.qoe.get()),
    }
}

/// Writes the schema line, the provenance header and one row per step.
pub fn write_sessions<W: Write>(mut out: W, sessions: &[Session], provenance: &Provenance) -> Result<(), DataError> {
    writeln!(out, "# schema={SESSION_SCHEMA}")?;
    out.write_all(provenance.header().as_bytes())?;
    let mut w = csv::Writer::from_writer(out);
    for session in sessions {
        for step in &session.steps {
            w.serialize(to_row(session, step))?;
        }
    }
    if sessions.iter().all(|s| s.steps.is_empty()) {
        w.write_record(COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_sessions(path: &Path, sessions: &[Session], provenance: &Provenance) -> Result<(), DataError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_sessions(file, sessions, provenance)
}

fn row_err(line: u64, message: impl Into<String>) -> DataError {
    DataError::Row { line, message: message.into() }
}

fn rating(line: u64, name: &str, v: i64) -> Result<Rating, DataError> {
    u8::try_from(v)
        .ok()
        .and_then(|v| Rating::new(v).ok())
        .ok_or_else(|| row_err(line, format!("{name}={v} outside 1..=5")))
}

fn flag(line: u64, name: &str, v: i64) -> Result<bool, DataError> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(row_err(line, format!("{name}={v} is not 0 or 1"))),
    }
}

fn split_list(s: &str) -> Vec<&str> {
    if s.trim().is_empty() {
        Vec::new()
    } else {
        s.split(';').map(str::trim).collect()
    }
}

struct ParsedRow {
    line: u64,
    session_id: String,
    region: String,
    step: SessionStep,
}

fn parse_row(line: u64, row: LogRow) -> Result<ParsedRow, DataError> {
    let step_index = u8::try_from(row.step)
        .ok()
        .filter(|s| (1..=MAX_STEPS as u8).contains(s))
        .ok_or_else(|| row_err(line, format!("step={} outside 1..={MAX_STEPS}", row.step)))?;
    let ids = split_list(&row.rec_ids)
        .into_iter()
        .map(|s| s.parse::<VideoId>().map_err(|_| row_err(line, format!("bad video id `{s}` in rec_ids"))))
        .collect::<Result<Vec<_>, _>>()?;
    let flags = split_list(&row.rec_high_qos)
        .into_iter()
        .map(|s| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(row_err(line, format!("bad flag `{s}` in rec_high_qos"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if ids.len() != flags.len() {
        return Err(row_err(line, format!("{} rec_ids but {} rec_high_qos flags", ids.len(), flags.len())));
    }
    let recs = RecommendationList::from_entries(ids.into_iter().zip(flags), LIST_LEN)
        .map_err(|e| row_err(line, e.to_string()))?;
    let abandoned = flag(line, "abandoned", row.abandoned)?;
    let action = match (row.selected_position, abandoned) {
        (Some(_), true) => return Err(row_err(line, "row is both selected and abandoned")),
        (Some(p), false) => {
            if p < 1 || p as usize > recs.len() {
                return Err(row_err(line, format!("selected_position={p} outside 1..={}", recs.len())));
            }
            StepAction::Selected { position: p as u8 }
        }
        (None, true) => StepAction::Abandoned,
        (None, false) => StepAction::SessionEnd,
    };
    let ratings = Sample {
        interest: rating(line, "int", row.int)?,
        qos: rating(line, "qos", row.qos)?,
        qor: rating(line, "qor", row.qor)?,
        qoe: rating(line, "qoe", row.qoe)?,
    };
    Ok(ParsedRow {
        line,
        session_id: row.session_id,
        region: row.region,
        step: SessionStep {
            step_index,
            watched: VideoId(row.watched_id),
            watched_high_qos: flag(line, "watched_high_qos", row.watched_high_qos)?,
            recs,
            ratings,
            action,
        },
    })
}

fn chain_err(session: &str, message: impl Into<String>) -> DataError {
    DataError::Chain { session: session.to_owned(), message: message.into() }
}

fn check_chain(session: &Session, lines: &[u64]) -> Result<(), DataError> {
    let id = &session.session_id;
    for (i, step) in session.steps.iter().enumerate() {
        if usize::from(step.step_index) != i + 1 {
            return Err(chain_err(id, format!("line {}: expected step {}, found {}", lines[i], i + 1, step.step_index)));
        }
        let last = i + 1 == session.steps.len();
        match (step.action, last) {
            (StepAction::Selected { .. }, true) => {
                return Err(chain_err(id, format!("line {}: selection with no following step", lines[i])));
            }
            (StepAction::Selected { .. }, false) => {
                let next = session.steps[i + 1].watched;
                if step.selected_id() != Some(next) {
                    return Err(chain_err(
                        id,
                        format!("line {}: step {} watches {next}, not the selected video", lines[i + 1], i + 2),
                    ));
                }
            }
            (_, false) => {
                return Err(chain_err(id, format!("line {}: session continues after it ended", lines[i + 1])));
            }
            (_, true) => {}
        }
    }
    Ok(())
}

/// Parses and validates a session log. Rows of a session must be contiguous
/// and in step order.
pub fn read_sessions<R: Read>(mut input: R) -> Result<Vec<Session>, DataError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let first = text.lines().next().unwrap_or("").trim();
    let expected = format!("# schema={SESSION_SCHEMA}");
    if first != expected {
        return Err(DataError::Schema { expected, found: first.to_owned() });
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().ne(COLUMNS) {
        return Err(DataError::Schema { expected: COLUMNS.join(","), found: headers.iter().collect::<Vec<_>>().join(",") });
    }

    let mut sessions: Vec<Session> = Vec::new();
    let mut lines: Vec<Vec<u64>> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row: LogRow = record.deserialize(Some(&headers)).map_err(|e| row_err(line, e.to_string()))?;
        let parsed = parse_row(line, row)?;
        let continues = sessions.last().is_some_and(|s| s.session_id == parsed.session_id);
        if !continues {
            if !seen.insert(parsed.session_id.clone()) {
                return Err(chain_err(&parsed.session_id, format!("line {line}: rows are not contiguous")));
            }
            sessions.push(Session { session_id: parsed.session_id.clone(), region: parsed.region.clone(), steps: Vec::new() });
            lines.push(Vec::new());
        }
        let session = sessions.last_mut().expect("pushed above");
        if session.region != parsed.region {
            return Err(chain_err(&session.session_id, format!("line {line}: region changes within the session")));
        }
        session.steps.push(parsed.step);
        lines.last_mut().expect("pushed above").push(parsed.line);
    }
    for (session, l) in sessions.iter().zip(&lines) {
        check_chain(session, l)?;
    }
    Ok(sessions)
}

pub fn load_sessions(path: &Path) -> Result<Vec<Session>, DataError> {
    read_sessions(std::fs::File::open(path)?)
}

/// Ratings of every step, in log order.
pub fn session_samples(sessions: &[Session]) -> Vec<Sample> {
    sessions.iter().flat_map(|s| s.steps.iter().map(|st| st.ratings)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "# schema=qosrec-sessions/v1\n\
        session_id,step,region,watched_id,watched_high_qos,rec_ids,rec_high_qos,selected_position,abandoned,int,qos,qor,qoe\n";

    fn parse(body: &str) -> Result<Vec<Session>, DataError> {
        read_sessions(format!("{HEADER}{body}").as_bytes())
    }

    #[test]
    fn valid_two_step_session() {
        let s = parse("a,1,eu,7,1,1;2;3;4;5,1;0;0;0;0,2,0,4,5,3,4\na,2,eu,2,0,9;8,0;0,,1,2,2,3,2\n").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].steps.len(), 2);
        assert_eq!(s[0].steps[0].selected_id(), Some(VideoId(2)));
        assert_eq!(s[0].steps[1].action, StepAction::Abandoned);
        assert_eq!(s[0].steps[1].recs.len(), 2);
    }

    #[test]
    fn rating_out_of_range_reports_line() {
        let err = parse("a,1,eu,7,1,1;2,1;0,,0,4,5,3,6\n").unwrap_err();
        match err {
            DataError::Row { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("qoe=6"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn broken_chain_is_rejected() {
        let err = parse("a,1,eu,7,1,1;2,1;0,1,0,4,5,3,4\na,3,eu,1,1,2;3,0;0,,0,4,5,3,4\n").unwrap_err();
        assert!(matches!(err, DataError::Chain { .. }), "{err}");
        let err = parse("a,1,eu,7,1,1;2,1;0,1,0,4,5,3,4\na,2,eu,2,1,2;3,0;0,,0,4,5,3,4\n").unwrap_err();
        assert!(matches!(err, DataError::Chain { .. }), "{err}");
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(parse("a,1,eu,7,1,1;2,1,,0,4,5,3,4\n"), Err(DataError::Row { .. })));
        assert!(matches!(parse("a,1,eu,7,1,1;2,1;0,1,1,4,5,3,4\n"), Err(DataError::Row { .. })));
        assert!(matches!(parse("a,1,eu,7,1,1;2,1;0,3,0,4,5,3,4\n"), Err(DataError::Row { .. })));
        assert!(matches!(parse("a,1,eu,7,1,1;1,1;0,,0,4,5,3,4\n"), Err(DataError::Row { .. })));
        assert!(matches!(parse("a,1,eu,x,1,1;2,1;0,,0,4,5,3,4\n"), Err(DataError::Row { line: 3, .. })));
    }

    #[test]
    fn schema_line_is_required() {
        let err = read_sessions("session_id\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Schema { .. }));
        let err = read_sessions("# schema=qosrec-sessions/v0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Schema { .. }));
    }

    #[test]
    fn non_contiguous_sessions_are_rejected() {
        let body = "a,1,eu,7,1,1;2,1;0,,0,4,5,3,4\nb,1,eu,7,1,1;2,1;0,,0,4,5,3,4\na,1,eu,7,1,1;2,1;0,,0,4,5,3,4\n";
        assert!(matches!(parse(body), Err(DataError::Chain { .. })));
    }
}
