//! Reference evaluator that answers queries straight from the initiation and
//! termination points derived so far, with no interval cache.
//!
//! `holds_at(F=V, t)` is true iff some initiation of `F=V` at or before `t` is
//! not broken before `t` by a termination of `F=V` or an initiation of `F` to
//! another value. Intervals run from an initiation that finds `F=V` not already
//! holding to the first break after it, or stay open. Negation is failure to
//! find a witness among the finite set of points.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::kd::POS_INF;
use crate::term::Term;

use super::naive::sort_events;
use super::{
    check_tick, check_window, Derived, DomainTheory, EcError, EventOccurrence, EventPattern,
    FluentAssignment, FluentPattern, Mvi, QueryContext, Tick,
};

#[derive(Debug, Clone)]
struct Point {
    tick: Tick,
    initiates: bool,
    assignment: FluentAssignment,
}

impl Point {
    fn breaks(&self, v: &Term) -> bool {
        if self.initiates {
            self.assignment.value != *v
        } else {
            self.assignment.value == *v
        }
    }
}

pub struct AxiomEvaluator {
    theory: Arc<DomainTheory>,
    strata: Vec<u8>,
    events: Vec<EventOccurrence>,
    points: Vec<Point>,
    by_fluent: BTreeMap<Term, Vec<usize>>,
}

impl AxiomEvaluator {
    pub fn new(theory: impl Into<Arc<DomainTheory>>) -> Self {
        let theory = theory.into();
        let mut ev = AxiomEvaluator {
            strata: theory.strata(),
            theory: theory.clone(),
            events: Vec::new(),
            points: Vec::new(),
            by_fluent: BTreeMap::new(),
        };
        for a in &theory.initially {
            ev.push_point(0, true, a.clone());
        }
        ev
    }

    /// Evaluate a whole narrative from scratch.
    pub fn from_narrative(
        theory: impl Into<Arc<DomainTheory>>,
        narrative: &[EventOccurrence],
    ) -> Result<Self, EcError> {
        let mut ev = Self::new(theory);
        for e in narrative {
            ev.update(e.clone())?;
        }
        Ok(ev)
    }

    pub fn events(&self) -> &[EventOccurrence] {
        &self.events
    }

    fn push_point(&mut self, tick: Tick, initiates: bool, assignment: FluentAssignment) {
        self.by_fluent
            .entry(assignment.fluent.clone())
            .or_default()
            .push(self.points.len());
        self.points.push(Point {
            tick,
            initiates,
            assignment,
        });
    }

    pub fn update(&mut self, e: EventOccurrence) -> Result<(), EcError> {
        check_tick(e.time)?;
        if let Some(last) = self.events.last() {
            if e.time < last.time {
                return Err(EcError::OutOfOrderEvent {
                    time: e.time,
                    last: last.time,
                });
            }
        }
        self.events.push(e.clone());
        let theory = self.theory.clone();
        for &stratum in &self.strata.clone() {
            let view = self.view();
            let eval = |rules: &[super::Rule]| -> Vec<Derived> {
                rules
                    .iter()
                    .filter(|r| r.stratum == stratum)
                    .flat_map(|r| r.eval(&e, &view))
                    .collect()
            };
            let terms = eval(&theory.terminations);
            let inits = eval(&theory.initiations);
            for d in terms {
                self.push_point(e.time, false, d.assignment);
            }
            for d in inits {
                self.push_point(e.time, true, d.assignment);
            }
        }
        Ok(())
    }

    fn view(&self) -> View<'_> {
        View {
            ev: self,
            points: self.points.len(),
            events: self.events.len(),
        }
    }
}

/// The evaluator as seen part-way through processing: only the first
/// `points` effect points and `events` events exist.
struct View<'a> {
    ev: &'a AxiomEvaluator,
    points: usize,
    events: usize,
}

impl View<'_> {
    fn fluents<'s>(&'s self, q: &'s FluentPattern) -> Box<dyn Iterator<Item = (&'s Term, Vec<&'s Point>)> + 's> {
        let visible = move |idx: &'s Vec<usize>| -> Vec<&'s Point> {
            idx.iter()
                .take_while(|&&i| i < self.points)
                .map(|&i| &self.ev.points[i])
                .collect()
        };
        match &q.fluent {
            Some(f) => Box::new(self.ev.by_fluent.get_key_value(f).map(|(f, idx)| (f, visible(idx))).into_iter()),
            None => Box::new(self.ev.by_fluent.iter().map(move |(f, idx)| (f, visible(idx)))),
        }
    }

    fn values<'p>(pts: &[&'p Point], q: &FluentPattern) -> BTreeSet<&'p Term> {
        pts.iter()
            .filter(|p| p.initiates)
            .map(|p| &p.assignment.value)
            .filter(|v| q.value.as_ref().is_none_or(|qv| qv == *v))
            .collect()
    }

    fn holds_for_all(&self, q: &FluentPattern) -> Vec<Mvi> {
        let mut out = Vec::new();
        for (f, pts) in self.fluents(q) {
            for v in Self::values(&pts, q) {
                let mut start: Option<Tick> = None;
                for p in &pts {
                    if p.initiates && p.assignment.value == *v {
                        start.get_or_insert(p.tick);
                    } else if p.breaks(v) {
                        if let Some(s) = start.take() {
                            if s < p.tick {
                                out.push(Mvi::new(FluentAssignment::new(f.clone(), v.clone()), s, p.tick));
                            }
                        }
                    }
                }
                if let Some(s) = start {
                    out.push(Mvi::new(FluentAssignment::new(f.clone(), v.clone()), s, POS_INF));
                }
            }
        }
        out.sort();
        out
    }
}

impl QueryContext for View<'_> {
    fn holds_at(&self, q: &FluentPattern, t: Tick) -> Vec<FluentAssignment> {
        let mut out = Vec::new();
        for (f, pts) in self.fluents(q) {
            let upto: Vec<&Point> = pts.into_iter().filter(|p| p.tick <= t).collect();
            for v in Self::values(&upto, q) {
                let last_break = upto.iter().rposition(|p| p.breaks(v));
                let after = last_break.map_or(0, |b| b + 1);
                let initiated = upto[after..]
                    .iter()
                    .any(|p| p.initiates && p.assignment.value == *v);
                if initiated {
                    out.push(FluentAssignment::new(f.clone(), v.clone()));
                }
            }
        }
        out.sort();
        out
    }

    fn mholds_for(&self, q: &FluentPattern) -> Vec<Mvi> {
        self.holds_for_all(q)
    }

    fn cached_between(&self, ws: Tick, we: Tick, q: &FluentPattern) -> Result<Vec<Mvi>, EcError> {
        check_window(ws, we)?;
        let mut v = self.holds_for_all(q);
        v.retain(|m| m.intersects(ws, we));
        Ok(v)
    }

    fn happens_in_window(
        &self,
        q: &EventPattern,
        ws: Tick,
        we: Tick,
    ) -> Result<Vec<EventOccurrence>, EcError> {
        check_window(ws, we)?;
        let mut out: Vec<_> = self.ev.events[..self.events]
            .iter()
            .filter(|e| ws <= e.time && e.time <= we && q.matches(&e.event))
            .cloned()
            .collect();
        sort_events(&mut out);
        Ok(out)
    }
}

impl QueryContext for AxiomEvaluator {
    fn holds_at(&self, q: &FluentPattern, t: Tick) -> Vec<FluentAssignment> {
        self.view().holds_at(q, t)
    }

    fn mholds_for(&self, q: &FluentPattern) -> Vec<Mvi> {
        self.view().mholds_for(q)
    }

    fn cached_between(&self, ws: Tick, we: Tick, q: &FluentPattern) -> Result<Vec<Mvi>, EcError> {
        self.view().cached_between(ws, we, q)
    }

    fn happens_in_window(
        &self,
        q: &EventPattern,
        ws: Tick,
        we: Tick,
    ) -> Result<Vec<EventOccurrence>, EcError> {
        self.view().happens_in_window(q, ws, we)
    }
}

/// Assignments matching `q` that hold at `t`, evaluated from scratch over `narrative`.
pub fn naive_holds_at(
    theory: &Arc<DomainTheory>,
    narrative: &[EventOccurrence],
    q: &FluentPattern,
    t: Tick,
) -> Result<Vec<FluentAssignment>, EcError> {
    check_tick(t)?;
    Ok(AxiomEvaluator::from_narrative(theory.clone(), narrative)?.holds_at(q, t))
}

/// Every maximal validity interval matching `q`, evaluated from scratch over `narrative`.
pub fn naive_holds_for(
    theory: &Arc<DomainTheory>,
    narrative: &[EventOccurrence],
    q: &FluentPattern,
) -> Result<Vec<Mvi>, EcError> {
    Ok(AxiomEvaluator::from_narrative(theory.clone(), narrative)?.mholds_for(q))
}
