//! Bench workloads: bootstrapped patient streams as engine narratives, and
//! the rule set they are monitored with.

use ceckd::pattern::{Comparator, Pattern, RuleBook, RuleSpec, Signal, ThresholdAtom, DAY};
use ceckd::{EventOccurrence, Parallelism};
use ceckd_service::{bootstrap, synthetic_seeds, BootstrapError, SignalRecord};

/// Days per synthetic seed patient.
pub const SEED_DAYS: usize = 7;

fn atom(s: Signal, c: Comparator, v: f64) -> ThresholdAtom {
    ThresholdAtom::new(s, c, v)
}

/// Hyperglycaemia with tachycardia.
pub fn rule0() -> RuleSpec {
    RuleSpec::new(
        "rule0",
        &["doctor"],
        Pattern::complex(
            vec![atom(Signal::Cgm, Comparator::Gt, 13.0), atom(Signal::Hr, Comparator::Gt, 120.0)],
            1,
            DAY,
        ),
    )
}

/// Hyperglycaemia with tachycardia followed by hypoglycaemia with bradycardia.
pub fn rule1() -> RuleSpec {
    RuleSpec::new(
        "rule1",
        &["doctor"],
        Pattern::complex_sequential(
            Pattern::complex(
                vec![atom(Signal::Hr, Comparator::Gt, 130.0), atom(Signal::Cgm, Comparator::Gt, 15.0)],
                1,
                DAY,
            ),
            Pattern::complex(
                vec![atom(Signal::Cgm, Comparator::Lt, 5.0), atom(Signal::Hr, Comparator::Lt, 60.0)],
                1,
                DAY,
            ),
            DAY,
        ),
    )
}

/// Both rules deployed.
pub fn rule_book() -> RuleBook {
    let mut book = RuleBook::new();
    book.deploy(&rule0()).expect("rule0 is valid");
    book.deploy(&rule1()).expect("rule1 is valid");
    book
}

/// Readings as `obs(signal, value)` events, ticked in seconds from the first one.
pub fn to_events(records: &[SignalRecord]) -> Vec<EventOccurrence> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    records
        .iter()
        .map(|r| {
            let tick = (r.timestamp - first.timestamp).num_seconds();
            EventOccurrence::new(r.signal.event(r.value), tick)
        })
        .collect()
}

/// `count` bootstrapped patients of exactly `events` events each.
pub fn patient_narratives(
    events: usize,
    count: usize,
    seed: u64,
    par: Parallelism,
) -> Result<Vec<Vec<EventOccurrence>>, BootstrapError> {
    let seeds = synthetic_seeds(SEED_DAYS, seed);
    let longest = seeds.iter().map(|s| s.len()).max().unwrap_or(0);
    let streams = bootstrap(&seeds, events.max(longest), count, seed, par)?;
    Ok(par.map(streams, |s| {
        let mut ev = to_events(&s.records);
        ev.truncate(events);
        ev
    }))
}

/// One bootstrapped patient of exactly `events` events.
pub fn narrative(events: usize, seed: u64) -> Result<Vec<EventOccurrence>, BootstrapError> {
    Ok(patient_narratives(events, 1, seed, Parallelism::Sequential)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn narratives_are_exact_and_ordered() {
        let n = narrative(150, 1).unwrap();
        assert_eq!(n.len(), 150);
        assert_eq!(n[0].time, 0);
        assert!(n.windows(2).all(|w| w[0].time <= w[1].time));
        let many = patient_narratives(3000, 3, 1, Parallelism::available()).unwrap();
        assert!(many.iter().all(|p| p.len() == 3000));
        assert_ne!(many[0], many[1]);
    }

    #[test]
    fn rules_compile() {
        assert_eq!(rule_book().len(), 2);
    }
}
