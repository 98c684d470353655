//! The per-event update procedure, written once against an abstract interval
//! store so the kd-indexed engine and the scan-based baseline share it.

use crate::kd::POS_INF;
use crate::term::Term;

use super::{
    check_tick, CloseOutcome, Derived, DomainTheory, EcError, EffectsReport, EventOccurrence,
    FluentAssignment, Mvi, QueryContext, Tick, Witness,
};

pub(crate) trait MviStore: QueryContext {
    fn last_event_time(&self) -> Option<Tick>;
    fn record_event(&mut self, e: &EventOccurrence);
    /// The open interval of `fluent`, if any. At most one exists.
    fn open_mvi(&self, fluent: &Term) -> Option<Mvi>;
    fn remove_mvi(&mut self, m: &Mvi);
    fn insert_mvi(&mut self, m: Mvi);
}

#[derive(Default)]
pub(crate) struct Tracker {
    opened: Vec<(FluentAssignment, Vec<Witness>)>,
    closed: Vec<Mvi>,
    discarded: Vec<Mvi>,
    firings: usize,
}

impl Tracker {
    fn finish(self, time: Tick) -> EffectsReport {
        let opened = self
            .opened
            .iter()
            .map(|(a, _)| Mvi::new(a.clone(), time, POS_INF))
            .collect();
        EffectsReport {
            time,
            opened,
            closed: self.closed,
            discarded: self.discarded,
            evidence: self.opened,
            rule_firings: self.firings,
        }
    }
}

pub(crate) fn close<S: MviStore + ?Sized>(
    s: &mut S,
    a: &FluentAssignment,
    t: Tick,
    tr: Option<&mut Tracker>,
) -> CloseOutcome {
    let Some(m) = s.open_mvi(&a.fluent) else {
        return CloseOutcome::NotOpen;
    };
    if m.assignment.value != a.value {
        return CloseOutcome::NotOpen;
    }
    s.remove_mvi(&m);
    if m.start < t {
        let c = Mvi::new(m.assignment, m.start, t);
        s.insert_mvi(c.clone());
        if let Some(tr) = tr {
            tr.closed.push(c.clone());
        }
        CloseOutcome::Closed(c)
    } else {
        if let Some(tr) = tr {
            match tr.opened.iter().position(|(x, _)| *x == m.assignment) {
                Some(i) => {
                    tr.opened.remove(i);
                }
                None => tr.discarded.push(m.clone()),
            }
        }
        CloseOutcome::Discarded(m)
    }
}

pub(crate) fn open<S: MviStore + ?Sized>(
    s: &mut S,
    a: &FluentAssignment,
    t: Tick,
) -> Result<bool, EcError> {
    match s.open_mvi(&a.fluent) {
        Some(m) if m.assignment.value == a.value => Ok(false),
        Some(m) => Err(EcError::EngineInvariantViolation(format!(
            "cannot open {a} at {t}: {m} is still open"
        ))),
        None => {
            s.insert_mvi(Mvi::new(a.clone(), t, POS_INF));
            Ok(true)
        }
    }
}

fn initiate<S: MviStore + ?Sized>(
    s: &mut S,
    d: Derived,
    t: Tick,
    tr: &mut Tracker,
) -> Result<(), EcError> {
    if let Some(m) = s.open_mvi(&d.assignment.fluent) {
        if m.assignment.value == d.assignment.value {
            return Ok(());
        }
        close(s, &m.assignment, t, Some(tr));
    }
    open(s, &d.assignment, t)?;
    tr.opened.push((d.assignment, d.evidence));
    Ok(())
}

/// Open every `initially` assignment at tick 0.
pub(crate) fn apply_initially<S: MviStore>(s: &mut S, theory: &DomainTheory) -> Result<(), EcError> {
    let mut tr = Tracker::default();
    for a in &theory.initially {
        initiate(s, Derived::new(a.clone()), 0, &mut tr)?;
    }
    Ok(())
}

/// Index the event, then evaluate the rules stratum by stratum: within a
/// stratum every rule sees the same snapshot, terminations are applied before
/// initiations, each in rule order.
pub(crate) fn update<S: MviStore>(
    s: &mut S,
    theory: &DomainTheory,
    strata: &[u8],
    e: &EventOccurrence,
) -> Result<EffectsReport, EcError> {
    check_tick(e.time)?;
    if let Some(last) = s.last_event_time() {
        if e.time < last {
            return Err(EcError::OutOfOrderEvent { time: e.time, last });
        }
    }
    s.record_event(e);
    let mut tr = Tracker::default();
    for &stratum in strata {
        let (terms, inits) = {
            let ctx: &dyn QueryContext = &*s;
            let eval = |rules: &[super::Rule]| -> Vec<Derived> {
                rules
                    .iter()
                    .filter(|r| r.stratum == stratum)
                    .flat_map(|r| r.eval(e, ctx))
                    .collect()
            };
            (eval(&theory.terminations), eval(&theory.initiations))
        };
        tr.firings += terms.len() + inits.len();
        for d in terms {
            close(s, &d.assignment, e.time, Some(&mut tr));
        }
        for d in inits {
            initiate(s, d, e.time, &mut tr)?;
        }
    }
    Ok(tr.finish(e.time))
}
