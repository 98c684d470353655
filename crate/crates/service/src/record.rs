//! Physiological readings and their CSV / JSON encodings.
//!
//! CSV is UTF-8 with the mandatory header `timestamp,signal,value`. Rows are
//! addressed by their 1-based line number, so the first data row is row 2.

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use ceckd::pattern::Signal;

pub const CSV_HEADER: [&str; 3] = ["timestamp", "signal", "value"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    #[serde(with = "iso_serde")]
    pub timestamp: DateTime<Utc>,
    pub signal: Signal,
    pub value: f64,
}

impl SignalRecord {
    pub fn new(timestamp: DateTime<Utc>, signal: Signal, value: f64) -> Self {
        SignalRecord { timestamp, signal, value }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientStream {
    pub patient_id: String,
    pub records: Vec<SignalRecord>,
}

impl PatientStream {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("row {row}: {reason}")]
    CsvSyntax { row: u64, reason: String },
    #[error("row {row}: unknown signal {signal:?}")]
    UnknownSignal { row: u64, signal: String },
    #[error("row {row}: timestamp earlier than the previous row")]
    UnsortedInput { row: u64 },
}

impl ParseError {
    pub fn row(&self) -> u64 {
        match self {
            ParseError::CsvSyntax { row, .. }
            | ParseError::UnknownSignal { row, .. }
            | ParseError::UnsortedInput { row } => *row,
        }
    }
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, chrono::ParseError> {
    DateTime::parse_from_rfc3339(s).map(|t| t.with_timezone(&Utc))
}

pub(crate) mod iso_serde {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&super::format_timestamp(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_timestamp(&s).map_err(serde::de::Error::custom)
    }
}

/// Parse a finite decimal; `inf`, `NaN` and friends are rejected.
pub fn parse_value(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parse a CSV upload. Rows must be sorted by timestamp.
pub fn parse_csv(bytes: &[u8]) -> Result<Vec<SignalRecord>, ParseError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);

    let header = rdr.headers().map_err(|e| syntax(1, &e))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(ParseError::CsvSyntax {
            row: 1,
            reason: format!("expected header {:?}", CSV_HEADER.join(",")),
        });
    }

    let mut out: Vec<SignalRecord> = Vec::new();
    let mut rec = csv::StringRecord::new();
    loop {
        let row = rdr.position().line() + 1;
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(syntax(e.position().map_or(row, |p| p.line()), &e)),
        }
        let row = rec.position().map_or(row, |p| p.line());
        let timestamp = parse_timestamp(&rec[0]).map_err(|e| ParseError::CsvSyntax {
            row,
            reason: format!("timestamp {:?}: {e}", &rec[0]),
        })?;
        let signal = Signal::from_name(&rec[1]).ok_or_else(|| ParseError::UnknownSignal {
            row,
            signal: rec[1].to_string(),
        })?;
        let value = parse_value(&rec[2]).ok_or_else(|| ParseError::CsvSyntax {
            row,
            reason: format!("value {:?} is not a finite decimal", &rec[2]),
        })?;
        if out.last().is_some_and(|p| p.timestamp > timestamp) {
            return Err(ParseError::UnsortedInput { row });
        }
        out.push(SignalRecord::new(timestamp, signal, value));
    }
    Ok(out)
}

fn syntax(row: u64, e: &csv::Error) -> ParseError {
    let reason = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        csv::ErrorKind::Utf8 { .. } => "invalid UTF-8".to_string(),
        _ => e.to_string(),
    };
    ParseError::CsvSyntax { row, reason }
}

pub fn to_csv(records: &[SignalRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in records {
        w.write_record([
            format_timestamp(&r.timestamp),
            r.signal.name().to_string(),
            format!("{:?}", r.value),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_is_empty() {
        assert_eq!(parse_csv(b"timestamp,signal,value\n").unwrap(), vec![]);
    }

    #[test]
    fn one_row() {
        let r = parse_csv(b"timestamp,signal,value\n2014-10-01T08:00:00Z,cgm,14.0\n").unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].signal, Signal::Cgm);
        assert_eq!(r[0].value, 14.0);
        assert_eq!(format_timestamp(&r[0].timestamp), "2014-10-01T08:00:00Z");
    }

    #[test]
    fn errors_carry_rows() {
        let bad = |s: &str| parse_csv(s.as_bytes()).unwrap_err();
        assert_eq!(bad("").row(), 1);
        assert_eq!(bad("time,signal,value\n").row(), 1);
        let h = "timestamp,signal,value\n";
        assert_eq!(
            bad(&format!("{h}2014-10-01T08:00:00Z,cgm,14\n2014-10-01T08:05:00Z,ecg,1\n")),
            ParseError::UnknownSignal { row: 3, signal: "ecg".into() }
        );
        assert_eq!(
            bad(&format!("{h}2014-10-01T08:05:00Z,cgm,14\n2014-10-01T08:00:00Z,hr,80\n")),
            ParseError::UnsortedInput { row: 3 }
        );
        assert!(matches!(bad(&format!("{h}2014-10-01T08:00:00Z,cgm,NaN\n")), ParseError::CsvSyntax { row: 2, .. }));
        assert!(matches!(bad(&format!("{h}yesterday,cgm,1\n")), ParseError::CsvSyntax { row: 2, .. }));
        assert!(matches!(bad(&format!("{h}2014-10-01T08:00:00Z,cgm\n")), ParseError::CsvSyntax { row: 2, .. }));
    }

    #[test]
    fn json_shape() {
        let r = SignalRecord::new(parse_timestamp("2014-10-01T08:00:00Z").unwrap(), Signal::Hr, 125.0);
        let j = serde_json::to_string(&r).unwrap();
        assert_eq!(j, r#"{"timestamp":"2014-10-01T08:00:00Z","signal":"hr","value":125.0}"#);
        assert_eq!(serde_json::from_str::<SignalRecord>(&j).unwrap(), r);
    }
}
