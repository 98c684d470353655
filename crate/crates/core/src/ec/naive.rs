//! Scan-based cached Event Calculus: the narrative and the interval cache are
//! flat vectors, and every lookup walks them end to end.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::term::Term;

use super::cache::{self, MviStore};
use super::{
    check_window, DomainTheory, EcError, EffectsReport, EventOccurrence, EventPattern,
    FluentAssignment, FluentPattern, Mvi, QueryContext, Reasoner, Tick,
};

pub struct NaiveState {
    theory: Arc<DomainTheory>,
    strata: Vec<u8>,
    narrative: Vec<EventOccurrence>,
    cache: Vec<Mvi>,
    scans: AtomicU64,
}

impl NaiveState {
    pub fn new(theory: impl Into<Arc<DomainTheory>>) -> Result<Self, EcError> {
        let theory = theory.into();
        let mut s = NaiveState {
            strata: theory.strata(),
            theory: theory.clone(),
            narrative: Vec::new(),
            cache: Vec::new(),
            scans: AtomicU64::new(0),
        };
        cache::apply_initially(&mut s, &theory)?;
        Ok(s)
    }

    pub fn theory(&self) -> &Arc<DomainTheory> {
        &self.theory
    }

    pub fn narrative(&self) -> &[EventOccurrence] {
        &self.narrative
    }

    /// The flat interval cache, in storage order.
    pub fn cached(&self) -> &[Mvi] {
        &self.cache
    }

    /// Total number of narrative entries and cached intervals inspected by lookups.
    pub fn scan_count(&self) -> u64 {
        self.scans.load(Ordering::Relaxed)
    }

    fn scanned(&self, n: usize) {
        self.scans.fetch_add(n as u64, Ordering::Relaxed);
    }
}

pub(crate) fn sort_events(v: &mut [EventOccurrence]) {
    v.sort_by(|a, b| a.time.cmp(&b.time).then_with(|| a.event.cmp(&b.event)));
}

impl QueryContext for NaiveState {
    fn holds_at(&self, q: &FluentPattern, t: Tick) -> Vec<FluentAssignment> {
        self.scanned(self.cache.len());
        let mut out: Vec<_> = self
            .cache
            .iter()
            .filter(|m| m.start <= t && t < m.end && q.matches(&m.assignment))
            .map(|m| m.assignment.clone())
            .collect();
        out.sort();
        out
    }

    fn mholds_for(&self, q: &FluentPattern) -> Vec<Mvi> {
        self.scanned(self.cache.len());
        let mut out: Vec<_> = self
            .cache
            .iter()
            .filter(|m| q.matches(&m.assignment))
            .cloned()
            .collect();
        out.sort();
        out
    }

    fn cached_between(&self, ws: Tick, we: Tick, q: &FluentPattern) -> Result<Vec<Mvi>, EcError> {
        check_window(ws, we)?;
        self.scanned(self.cache.len());
        let mut out: Vec<_> = self
            .cache
            .iter()
            .filter(|m| m.intersects(ws, we) && q.matches(&m.assignment))
            .cloned()
            .collect();
        out.sort();
        Ok(out)
    }

    fn happens_in_window(
        &self,
        q: &EventPattern,
        ws: Tick,
        we: Tick,
    ) -> Result<Vec<EventOccurrence>, EcError> {
        check_window(ws, we)?;
        self.scanned(self.narrative.len());
        let mut out: Vec<_> = self
            .narrative
            .iter()
            .filter(|e| ws <= e.time && e.time <= we && q.matches(&e.event))
            .cloned()
            .collect();
        sort_events(&mut out);
        Ok(out)
    }
}

impl MviStore for NaiveState {
    fn last_event_time(&self) -> Option<Tick> {
        self.narrative.last().map(|e| e.time)
    }

    fn record_event(&mut self, e: &EventOccurrence) {
        self.narrative.push(e.clone());
    }

    fn open_mvi(&self, fluent: &Term) -> Option<Mvi> {
        self.scanned(self.cache.len());
        self.cache
            .iter()
            .find(|m| m.is_open() && m.assignment.fluent == *fluent)
            .cloned()
    }

    fn remove_mvi(&mut self, m: &Mvi) {
        self.scanned(self.cache.len());
        if let Some(i) = self.cache.iter().position(|x| x == m) {
            self.cache.swap_remove(i);
        }
    }

    fn insert_mvi(&mut self, m: Mvi) {
        self.cache.push(m);
    }
}

impl Reasoner for NaiveState {
    fn update(&mut self, e: EventOccurrence) -> Result<EffectsReport, EcError> {
        let theory = self.theory.clone();
        let strata = std::mem::take(&mut self.strata);
        let r = cache::update(self, &theory, &strata, &e);
        self.strata = strata;
        r
    }

    fn last_time(&self) -> Option<Tick> {
        self.last_event_time()
    }

    fn event_count(&self) -> usize {
        self.narrative.len()
    }

    fn structure_bytes(&self) -> usize {
        let events: usize = self.narrative.iter().map(|e| e.event.heap_bytes()).sum();
        let mvis: usize = self
            .cache
            .iter()
            .map(|m| m.assignment.fluent.heap_bytes() + m.assignment.value.heap_bytes())
            .sum();
        self.narrative.len() * std::mem::size_of::<EventOccurrence>()
            + self.cache.len() * std::mem::size_of::<Mvi>()
            + events
            + mvis
    }
}
