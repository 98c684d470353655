use chrono::{DateTime, Duration, TimeZone, Utc};
use proptest::prelude::*;

use ceckd::pattern::Signal;
use ceckd_service::{parse_csv, to_csv, ParseError, SignalRecord};

fn base() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2014, 10, 1, 0, 0, 0).unwrap()
}

fn records() -> impl Strategy<Value = Vec<SignalRecord>> {
    let one = (0i64..3_000, 0u32..4, 0usize..6, -1.0e6f64..1.0e6);
    prop::collection::vec(one, 0..60).prop_map(|raw| {
        let mut t = base();
        raw.into_iter()
            .map(|(dt, milli, s, v)| {
                // Whole seconds most of the time, with the odd sub-second stamp.
                t += Duration::seconds(dt) + Duration::milliseconds(if milli == 3 { 250 } else { 0 });
                SignalRecord::new(t, Signal::ALL[s], v)
            })
            .collect()
    })
}

fn check_rows(bytes: &[u8]) {
    let lines = bytes.iter().filter(|&&b| b == b'\n').count() as u64 + 1;
    if let Err(e) = parse_csv(bytes) {
        assert!(e.row() >= 1, "{e:?}");
        assert!(e.row() <= lines + 1, "{e:?} beyond {lines} lines");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn round_trip(recs in records()) {
        let text = to_csv(&recs);
        prop_assert_eq!(parse_csv(text.as_bytes()).unwrap(), recs);
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        check_rows(&bytes);
        let mut with_header = b"timestamp,signal,value\n".to_vec();
        with_header.extend(&bytes);
        check_rows(&with_header);
    }

    #[test]
    fn mutated_files_never_panic(
        recs in records(),
        edits in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>(), 0u8..3), 1..8),
    ) {
        let mut bytes = to_csv(&recs).into_bytes();
        for (at, b, op) in edits {
            if bytes.is_empty() {
                bytes.push(b);
                continue;
            }
            let i = at.index(bytes.len());
            match op {
                0 => bytes[i] = b,
                1 => bytes.insert(i, b),
                _ => {
                    bytes.remove(i);
                }
            }
        }
        check_rows(&bytes);
    }
}

#[test]
fn unsorted_row_is_reported() {
    let mut recs = vec![
        SignalRecord::new(base(), Signal::Cgm, 5.0),
        SignalRecord::new(base() + Duration::minutes(5), Signal::Cgm, 5.5),
        SignalRecord::new(base() + Duration::minutes(10), Signal::Hr, 80.0),
    ];
    recs.swap(1, 2);
    recs[2].timestamp = base() + Duration::minutes(1);
    assert_eq!(parse_csv(to_csv(&recs).as_bytes()), Err(ParseError::UnsortedInput { row: 4 }));
}

#[test]
fn quoted_and_padded_fields() {
    let text = "timestamp,signal,value\n\"2014-10-01T08:00:00Z\", cgm , 7\r\n2014-10-01T10:00:00+02:00,hr,\"61.5\"\n";
    let r = parse_csv(text.as_bytes()).unwrap();
    assert_eq!(r.len(), 2);
    assert_eq!(r[0].value, 7.0);
    assert_eq!(r[0].timestamp, r[1].timestamp);
}
